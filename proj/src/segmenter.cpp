#include "ecg/segmenter.hpp"

#include <algorithm>
#include <cmath>

namespace ecg::segmenter {

namespace {

double median_copy(std::vector<double> v) {
    if (v.empty()) throw ArgumentError("median of empty vector");
    std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<long>(mid), v.end());
    double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    std::nth_element(v.begin(), v.begin() + static_cast<long>(mid) - 1,
                     v.begin() + static_cast<long>(mid));
    return 0.5 * (v[mid - 1] + hi);
}

}  // namespace

std::vector<Segment> extract_segments(const EcgRecording& recording, const qrs::PeakList& peaks) {
    const std::vector<int>& p = peaks.peaks;
    const long n = recording.sample_count();
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] < 0 || p[i] >= n)
            throw ArgumentError("extract_segments: peak outside the recording");
        if (i > 0 && p[i] <= p[i - 1])
            throw ArgumentError("extract_segments: peaks must be strictly increasing");
    }

    std::vector<Segment> out;
    const long N = static_cast<long>(p.size());
    if (N < 8) return out;  // fewer than 8 peaks: no segments, not an error

    // Retained peaks: drop the first 2 and last 2.
    std::vector<long> r(p.begin() + 2, p.end() - 2);
    const long K = static_cast<long>(r.size());

    for (long i = 0; i + 3 < K; ++i) {
        long start = (i == 0) ? r[0] - (r[1] - r[0]) / 2 : (r[i - 1] + r[i]) / 2;
        long end = (i + 4 < K) ? (r[i + 3] + r[i + 4]) / 2
                               : r[K - 1] + (r[K - 1] - r[K - 2]) / 2;
        start = std::clamp(start, 0L, n);
        end = std::clamp(end, 0L, n);
        if (end - start < 8) continue;  // defensive; cannot happen for real spacing

        Segment seg;
        seg.parent_id = recording.record_id;
        seg.sampling_rate = recording.sampling_rate;
        seg.samples = recording.samples.middleCols(start, end - start);
        for (int k = 0; k < 4; ++k)
            seg.peak_indices[static_cast<std::size_t>(k)] = static_cast<int>(r[i + k] - start);
        out.push_back(std::move(seg));
    }
    return out;
}

std::vector<BeatAnnotation> annotate_beats(const qrs::PeakList& peaks, double rate_hz,
                                           const SegmenterConfig& config) {
    if (!(rate_hz > 0.0)) throw ArgumentError("annotate_beats: rate must be positive");
    const std::vector<int>& p = peaks.peaks;
    if (p.size() < 3) throw ArgumentError("annotate_beats: need at least 3 peaks");

    std::vector<double> rr(p.size() - 1);
    for (std::size_t i = 0; i + 1 < p.size(); ++i)
        rr[i] = (p[i + 1] - p[i]) / rate_hz;
    const double global_median = median_copy(rr);

    std::vector<BeatAnnotation> out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        BeatAnnotation& a = out[i];
        a.peak = p[i];
        if (i > 0) a.rr_before = rr[i - 1];
        if (i + 1 < p.size()) a.rr_after = rr[i];
        if (i > 0 && config.premature_factor > 0.0) {
            // Running median of the previous intervals (up to median_window of
            // them); the global median stands in until any exist.
            std::size_t have = i - 1;  // intervals strictly before rr[i-1]
            double med;
            if (have == 0) {
                med = global_median;
            } else {
                std::size_t m = std::min<std::size_t>(have,
                                                      static_cast<std::size_t>(config.median_window));
                std::vector<double> window(rr.begin() + static_cast<long>(have - m),
                                           rr.begin() + static_cast<long>(have));
                med = median_copy(std::move(window));
            }
            a.premature = *a.rr_before < config.premature_factor * med;
        }
    }
    return out;
}

std::vector<Segment> label_segments(std::vector<Segment> segments,
                                    const std::vector<BeatAnnotation>& annotations,
                                    ClassLabel parent_label, const SegmenterConfig& config) {
    if (segments.empty()) return segments;
    if (annotations.size() != segments.size() + 3)
        throw ArgumentError("label_segments: annotations must cover the retained peaks");

    const bool inherit = parent_label == ClassLabel::Normal || parent_label == ClassLabel::IAVB ||
                         parent_label == ClassLabel::LBBB || parent_label == ClassLabel::RBBB ||
                         parent_label == ClassLabel::STD || parent_label == ClassLabel::STE;

    for (std::size_t i = 0; i < segments.size(); ++i) {
        if (inherit) {
            segments[i].label = parent_label;
            continue;
        }
        if (parent_label == ClassLabel::PAC || parent_label == ClassLabel::PVC) {
            bool any = false;
            for (std::size_t k = 0; k < 4; ++k) any = any || annotations[i + k].premature;
            segments[i].label = any ? parent_label : ClassLabel::Normal;
            continue;
        }
        // AF: local irregularity over the 3 in-window RR intervals plus one
        // context interval on each side.
        std::vector<double> rrs;
        rrs.reserve(5);
        if (annotations[i].rr_before) rrs.push_back(*annotations[i].rr_before);
        for (std::size_t k = 1; k < 4; ++k) {
            if (!annotations[i + k].rr_before)
                throw ArgumentError("label_segments: missing in-window RR interval");
            rrs.push_back(*annotations[i + k].rr_before);
        }
        if (annotations[i + 3].rr_after) rrs.push_back(*annotations[i + 3].rr_after);
        if (rrs.size() < 2) {
            segments[i].label = ClassLabel::Normal;
            continue;
        }
        double diff_sum = 0.0, mean = 0.0;
        for (std::size_t k = 0; k < rrs.size(); ++k) {
            mean += rrs[k];
            if (k > 0) diff_sum += std::abs(rrs[k] - rrs[k - 1]);
        }
        mean /= static_cast<double>(rrs.size());
        double irregularity = diff_sum / static_cast<double>(rrs.size() - 1) / mean;
        segments[i].label =
            irregularity > config.irregularity_threshold ? ClassLabel::AF : ClassLabel::Normal;
    }
    return segments;
}

}  // namespace ecg::segmenter
