#include "ecg/qrs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>

namespace ecg::qrs {

namespace {

// Centered moving average with edge replication, window w odd.
std::vector<double> moving_average_centered(const std::vector<double>& x, int w) {
    const long n = static_cast<long>(x.size());
    const long half = w / 2;
    std::vector<double> out(x.size());
    // Prefix sums over the edge-replicated extension.
    std::vector<double> prefix(x.size() + 2 * static_cast<std::size_t>(half) + 1, 0.0);
    for (long i = 0; i < n + 2 * half; ++i) {
        long src = std::clamp(i - half, 0L, n - 1);
        prefix[static_cast<std::size_t>(i + 1)] =
            prefix[static_cast<std::size_t>(i)] + x[static_cast<std::size_t>(src)];
    }
    for (long i = 0; i < n; ++i)
        out[static_cast<std::size_t>(i)] =
            (prefix[static_cast<std::size_t>(i + w)] - prefix[static_cast<std::size_t>(i)]) / w;
    return out;
}

// Linear-interpolation percentile (p in [0,1]) of a copy of v.
double percentile(std::vector<double> v, double p) {
    if (v.empty()) throw ArgumentError("percentile of empty range");
    std::sort(v.begin(), v.end());
    double rank = p * static_cast<double>(v.size() - 1);
    std::size_t lo = static_cast<std::size_t>(rank);
    std::size_t hi = std::min(lo + 1, v.size() - 1);
    double frac = rank - static_cast<double>(lo);
    return v[lo] + (v[hi] - v[lo]) * frac;
}

double median_copy(std::vector<double> v) {
    std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<long>(mid), v.end());
    double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    std::nth_element(v.begin(), v.begin() + static_cast<long>(mid) - 1,
                     v.begin() + static_cast<long>(mid));
    return 0.5 * (v[mid - 1] + hi);
}

}  // namespace

PeakList detect_r_peaks(const std::vector<double>& x, double rate_hz, const QrsConfig& config) {
    if (!(rate_hz > 0.0)) throw ArgumentError("detect_r_peaks: rate must be positive");
    const long n = static_cast<long>(x.size());
    if (n < static_cast<long>(2.0 * rate_hz))
        throw ArgumentError("detect_r_peaks: need at least 2 s of samples");
    if (config.feature_level_lo < 1 || config.feature_level_hi > config.swt_levels ||
        config.feature_level_lo > config.feature_level_hi)
        throw ArgumentError("detect_r_peaks: bad feature level range");

    PeakList out;
    out.lead = config.preferred_lead;
    out.config = config;

    const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
    if (*mx - *mn == 0.0) return out;  // flat input: nothing to detect

    // Detection feature: squared SWT detail coefficients of the chosen bands.
    dsp::SwtDecomposition d = dsp::swt_decompose(x, config.wavelet, config.swt_levels);
    std::vector<double> feat(x.size(), 0.0);
    for (int lvl = config.feature_level_lo; lvl <= config.feature_level_hi; ++lvl) {
        const std::vector<double>& band = d.details[static_cast<std::size_t>(lvl - 1)];
        for (long i = 0; i < n; ++i) {
            double c = band[static_cast<std::size_t>(i) + d.pad_left];
            feat[static_cast<std::size_t>(i)] += c * c;
        }
    }

    int w = static_cast<int>(std::lround(config.integration_window_s * rate_hz));
    if (w % 2 == 0) ++w;
    if (w < 1) w = 1;
    feat = moving_average_centered(feat, w);

    const long refractory = static_cast<long>(std::lround(config.refractory_s * rate_hz));
    const long refine = static_cast<long>(std::lround(config.refine_window_s * rate_hz));
    const long init_n = std::min(n, static_cast<long>(config.init_window_s * rate_hz));

    // Strict-ish local maxima (>= on the left admits plateaus, > on the right
    // picks a single representative per plateau).
    std::vector<long> candidates;
    for (long i = 1; i + 1 < n; ++i) {
        double f = feat[static_cast<std::size_t>(i)];
        if (f >= feat[static_cast<std::size_t>(i - 1)] &&
            f > feat[static_cast<std::size_t>(i + 1)] && f > 0.0)
            candidates.push_back(i);
    }

    std::vector<double> init_window(feat.begin(), feat.begin() + init_n);
    std::vector<double> peak_values{percentile(std::move(init_window), config.init_percentile)};
    std::vector<long> accepted;
    std::vector<std::pair<long, double>> pending;  // rejected candidates since last accept

    auto theta = [&]() {
        std::size_t m = std::min<std::size_t>(peak_values.size(),
                                              static_cast<std::size_t>(config.median_peaks));
        std::vector<double> tail(peak_values.end() - static_cast<long>(m), peak_values.end());
        return config.threshold_factor * median_copy(std::move(tail));
    };
    auto median_rr = [&]() -> double {
        if (accepted.size() < 2) return -1.0;
        std::size_t m = std::min<std::size_t>(accepted.size(),
                                              static_cast<std::size_t>(config.median_peaks) + 1);
        std::vector<double> rrs;
        rrs.reserve(m - 1);
        for (std::size_t i = accepted.size() - m + 1; i < accepted.size(); ++i)
            rrs.push_back(static_cast<double>(accepted[i] - accepted[i - 1]));
        return median_copy(std::move(rrs));
    };

    for (long i : candidates) {
        // Search-back: if the gap since the last accepted peak exceeds
        // 1.66x the median RR, revisit skipped candidates at half threshold.
        double mrr = median_rr();
        while (mrr > 0.0 && !accepted.empty() &&
               static_cast<double>(i - accepted.back()) > config.searchback_rr_factor * mrr) {
            double limit = config.searchback_threshold_factor * theta();
            long best_j = -1;
            double best_v = 0.0;
            for (const auto& [j, v] : pending) {
                if (j <= accepted.back() + refractory || j >= i) continue;
                if (v < limit) continue;
                if (best_j < 0 || v > best_v || (v == best_v && j > best_j)) {
                    best_v = v;
                    best_j = j;
                }
            }
            if (best_j < 0) break;
            accepted.push_back(best_j);
            peak_values.push_back(best_v);
            std::erase_if(pending, [&](const auto& p) { return p.first <= best_j; });
            mrr = median_rr();
        }

        if (!accepted.empty() && i - accepted.back() < refractory) continue;
        double f = feat[static_cast<std::size_t>(i)];
        if (f > theta()) {
            accepted.push_back(i);
            peak_values.push_back(f);
            pending.clear();
        } else {
            pending.emplace_back(i, f);
        }
    }

    // Refine each accepted feature peak to the largest |x| nearby.
    std::set<long> refined;
    for (long p : accepted) {
        long lo = std::max(0L, p - refine);
        long hi = std::min(n, p + refine + 1);
        long best = lo;
        double best_v = std::abs(x[static_cast<std::size_t>(lo)]);
        for (long i = lo + 1; i < hi; ++i) {
            double v = std::abs(x[static_cast<std::size_t>(i)]);
            if (v > best_v) {
                best_v = v;
                best = i;
            }
        }
        refined.insert(best);
    }

    // Refinement can merge neighbours; re-enforce the refractory spacing.
    for (long p : refined) {
        if (!out.peaks.empty() && p - out.peaks.back() < refractory) continue;
        out.peaks.push_back(static_cast<int>(p));
    }
    return out;
}

LeadChoice fuse_lead_choice(const EcgRecording& recording, const QrsConfig& config) {
    if (recording.lead_count() == 0) throw ArgumentError("fuse_lead_choice: empty recording");
    int preferred = config.preferred_lead;
    if (preferred < 0 || preferred >= recording.lead_count())
        throw ArgumentError("fuse_lead_choice: preferred lead out of range");

    auto peak_to_peak = [&](int lead) {
        float mn = recording.samples(lead, 0), mx = mn;
        for (long i = 1; i < recording.sample_count(); ++i) {
            float v = recording.samples(lead, i);
            mn = std::min(mn, v);
            mx = std::max(mx, v);
        }
        return static_cast<double>(mx) - static_cast<double>(mn);
    };

    int chosen = preferred;
    if (peak_to_peak(preferred) < config.min_lead_amplitude_mv) {
        double best = -1.0;
        for (int l = 0; l < recording.lead_count(); ++l) {
            double pp = peak_to_peak(l);
            if (pp > best) {
                best = pp;
                chosen = l;
            }
        }
        if (best < config.min_lead_amplitude_mv) chosen = preferred;  // all flat
    }

    LeadChoice choice;
    choice.lead = chosen;
    choice.samples.resize(static_cast<std::size_t>(recording.sample_count()));
    for (long i = 0; i < recording.sample_count(); ++i)
        choice.samples[static_cast<std::size_t>(i)] = recording.samples(chosen, i);
    return choice;
}

}  // namespace ecg::qrs
