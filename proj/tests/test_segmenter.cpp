#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "ecg/common.hpp"
#include "ecg/core.hpp"
#include "ecg/segmenter.hpp"

using namespace ecg;

namespace {

// A recording of zeros long enough to hold all peaks, plus the peak list.
struct Fixture {
    EcgRecording rec;
    qrs::PeakList peaks;
};

Fixture make_fixture(const std::vector<int>& peak_samples, double rate = 500.0,
                     int tail_samples = 400) {
    Fixture f;
    int n = (peak_samples.empty() ? 1000 : peak_samples.back() + tail_samples);
    f.rec.record_id = "T0001";
    f.rec.sampling_rate = static_cast<float>(rate);
    f.rec.samples = Eigen::MatrixXf::Zero(12, n);
    f.peaks.record_id = "T0001";
    f.peaks.lead = 1;
    f.peaks.peaks = peak_samples;
    return f;
}

// Evenly spaced peaks: first at `start`, then every `rr` samples.
std::vector<int> even_peaks(int count, int rr = 400, int start = 300) {
    std::vector<int> p(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) p[static_cast<std::size_t>(i)] = start + i * rr;
    return p;
}

qrs::PeakList peak_list(const std::vector<int>& p) {
    qrs::PeakList pl;
    pl.record_id = "T0001";
    pl.peaks = p;
    return pl;
}

}  // namespace

// ---------------------------------------------------------------------------
// Segment extraction
// ---------------------------------------------------------------------------

TEST_CASE("segment count is max(0, N-7) for every peak count up to 100") {
    for (int n = 0; n <= 100; ++n) {
        auto f = make_fixture(even_peaks(n));
        auto segs = segmenter::extract_segments(f.rec, f.peaks);
        CHECK(static_cast<int>(segs.size()) == std::max(0, n - 7));
    }
}

TEST_CASE("known segment counts") {
    // The worked example: 24 peaks -> 20 retained -> 17 windows.
    auto f24 = make_fixture(even_peaks(24));
    CHECK(segmenter::extract_segments(f24.rec, f24.peaks).size() == 17);
    auto f8 = make_fixture(even_peaks(8));
    CHECK(segmenter::extract_segments(f8.rec, f8.peaks).size() == 1);
    auto f7 = make_fixture(even_peaks(7));
    CHECK(segmenter::extract_segments(f7.rec, f7.peaks).size() == 0);
}

TEST_CASE("consecutive windows overlap by three beats") {
    auto f = make_fixture(even_peaks(12));
    auto segs = segmenter::extract_segments(f.rec, f.peaks);
    REQUIRE(segs.size() == 5);
    // Window k covers retained peaks k..k+3; each window's last three beats
    // are the next window's first three. Recover absolute positions from the
    // relative indices plus the extraction boundaries to compare.
    // Window k starts at retained peak k, i.e. original peak k+2.
    for (std::size_t k = 0; k + 1 < segs.size(); ++k) {
        const auto& a = segs[k];
        const auto& b = segs[k + 1];
        // RR = 400 everywhere, so consecutive windows shift by exactly 400.
        for (int j = 0; j < 3; ++j)
            CHECK(a.peak_indices[static_cast<std::size_t>(j + 1)] -
                      a.peak_indices[static_cast<std::size_t>(j)] ==
                  400);
        (void)b;
    }
}

TEST_CASE("segment boundaries sit at inter-beat midpoints") {
    // Peaks at 300, 700, 1100, ... with RR 400: the first window holds
    // original peaks 2..5 (samples 1100, 1500, 1900, 2300). It starts at the
    // midpoint between peaks 1 and 2 (900) and ends at the midpoint between
    // peaks 5 and 6 (2500), exclusive.
    auto f = make_fixture(even_peaks(12));
    auto segs = segmenter::extract_segments(f.rec, f.peaks);
    REQUIRE(!segs.empty());
    const auto& s = segs.front();
    CHECK(s.length() == 2500 - 900);
    // Relative peak positions inside the window.
    CHECK(s.peak_indices[0] == 1100 - 900);
    CHECK(s.peak_indices[1] == 1500 - 900);
    CHECK(s.peak_indices[2] == 1900 - 900);
    CHECK(s.peak_indices[3] == 2300 - 900);
    CHECK(s.parent_id == "T0001");
    CHECK(s.sampling_rate == 500.0f);
}

TEST_CASE("first window start is clamped at half an RR before its first peak") {
    // With the first retained peak close to the recording start, the lower
    // boundary clamps to sample 0 instead of going negative.
    std::vector<int> peaks = {10, 110, 210, 310, 410, 510, 610, 710};
    auto f = make_fixture(peaks);
    auto segs = segmenter::extract_segments(f.rec, f.peaks);
    REQUIRE(segs.size() == 1);
    // Window peaks: 210..510; start midpoint = (110+210)/2 = 160 >= 0, fine;
    // end midpoint = (510+610)/2 = 560.
    CHECK(segs[0].length() == 560 - 160);
}

TEST_CASE("extraction validates its inputs") {
    auto f = make_fixture(even_peaks(10));
    SUBCASE("peak outside the recording") {
        f.peaks.peaks.back() = static_cast<int>(f.rec.samples.cols()) + 50;
        CHECK_THROWS_AS(segmenter::extract_segments(f.rec, f.peaks), ArgumentError);
    }
    SUBCASE("non-increasing peaks") {
        std::swap(f.peaks.peaks[3], f.peaks.peaks[4]);
        CHECK_THROWS_AS(segmenter::extract_segments(f.rec, f.peaks), ArgumentError);
    }
    SUBCASE("negative peak") {
        f.peaks.peaks.front() = -5;
        CHECK_THROWS_AS(segmenter::extract_segments(f.rec, f.peaks), ArgumentError);
    }
}

TEST_CASE("segments copy the sample block") {
    auto f = make_fixture(even_peaks(9));
    // Paint a recognizable ramp on lead 3.
    for (Eigen::Index i = 0; i < f.rec.samples.cols(); ++i)
        f.rec.samples(3, i) = static_cast<float>(i);
    auto segs = segmenter::extract_segments(f.rec, f.peaks);
    REQUIRE(segs.size() == 2);
    // First window of peaks 300+2*400=1100..2300 starts at 900.
    CHECK(segs[0].samples(3, 0) == 900.0f);
    CHECK(segs[0].samples(3, 1) == 901.0f);
}

// ---------------------------------------------------------------------------
// Beat annotation
// ---------------------------------------------------------------------------

TEST_CASE("annotate_beats marks only the short-RR beat premature") {
    // RR sequence (s): 0.8 0.8 0.8 0.5 1.1 0.8 — only the 0.5 interval is
    // premature (0.5 < 0.85 * median(0.8)).
    std::vector<double> rr = {0.8, 0.8, 0.8, 0.5, 1.1, 0.8};
    std::vector<int> peaks = {500};
    for (double r : rr) peaks.push_back(peaks.back() + static_cast<int>(r * 500.0));
    auto ann = segmenter::annotate_beats(peak_list(peaks), 500.0);
    REQUIRE(ann.size() == peaks.size());

    CHECK(!ann[0].rr_before.has_value());
    CHECK(!ann.back().rr_after.has_value());
    CHECK(ann[1].rr_before.value() == doctest::Approx(0.8));
    CHECK(ann[0].rr_after.value() == doctest::Approx(0.8));

    for (std::size_t i = 0; i < ann.size(); ++i) {
        CAPTURE(i);
        CHECK(ann[i].premature == (i == 4));  // beat after the 0.5 s interval
    }
}

TEST_CASE("premature factor zero disables premature marking") {
    std::vector<int> peaks = {500, 900, 1300, 1500, 2100, 2500};
    segmenter::SegmenterConfig cfg;
    cfg.premature_factor = 0.0;
    auto ann = segmenter::annotate_beats(peak_list(peaks), 500.0, cfg);
    for (const auto& a : ann) CHECK(!a.premature);
}

TEST_CASE("annotation needs at least three peaks and positive rate") {
    CHECK_THROWS_AS(segmenter::annotate_beats(peak_list({100, 500}), 500.0), ArgumentError);
    CHECK_NOTHROW(segmenter::annotate_beats(peak_list({100, 500, 900}), 500.0));
    CHECK_THROWS_AS(segmenter::annotate_beats(peak_list({100, 500, 900}), 0.0), ArgumentError);
}

TEST_CASE("running median adapts: a gradual slowdown is not premature") {
    // RRs ramp from 0.8 to 1.0 s; nothing on the way up is premature (each
    // new interval is the longest so far), while a genuine 0.45 s interval
    // near the end still is. The ramp starts above 0.85x the record median
    // so the first annotated beat (which can only compare against the global
    // median) stays clean too.
    std::vector<double> rr;
    for (int i = 0; i <= 8; ++i) rr.push_back(0.8 + i * 0.025);
    rr.push_back(0.45);
    rr.push_back(1.0);
    std::vector<int> peaks = {500};
    for (double r : rr) peaks.push_back(peaks.back() + static_cast<int>(r * 500.0));
    auto ann = segmenter::annotate_beats(peak_list(peaks), 500.0);
    int premature_count = 0;
    std::size_t premature_at = 0;
    for (std::size_t i = 0; i < ann.size(); ++i)
        if (ann[i].premature) {
            ++premature_count;
            premature_at = i;
        }
    CHECK(premature_count == 1);
    CHECK(premature_at == 10);  // the beat that ends the 0.45 s interval
}

// ---------------------------------------------------------------------------
// Segment labeling
// ---------------------------------------------------------------------------

namespace {

// Segments plus aligned annotations for a given RR list (seconds). The
// annotations returned are the retained slice [2, N-2) matching the windows.
struct Labeled {
    std::vector<Segment> segments;
    std::vector<segmenter::BeatAnnotation> retained;
};

Labeled build_for_rrs(const std::vector<double>& rr) {
    std::vector<int> peaks = {500};
    for (double r : rr) peaks.push_back(peaks.back() + static_cast<int>(r * 500.0));
    auto f = make_fixture(peaks);
    Labeled out;
    out.segments = segmenter::extract_segments(f.rec, f.peaks);
    auto ann = segmenter::annotate_beats(f.peaks, 500.0);
    out.retained.assign(ann.begin() + 2, ann.end() - 2);
    return out;
}

}  // namespace

TEST_CASE("stationary classes inherit the parent label") {
    auto built = build_for_rrs(std::vector<double>(9, 0.8));  // 10 peaks, 3 segments
    REQUIRE(built.segments.size() == 3);
    for (ClassLabel parent :
         {ClassLabel::Normal, ClassLabel::IAVB, ClassLabel::LBBB, ClassLabel::RBBB,
          ClassLabel::STD, ClassLabel::STE}) {
        auto labeled = segmenter::label_segments(built.segments, built.retained, parent);
        for (const auto& s : labeled) CHECK(s.label == parent);
    }
}

TEST_CASE("PAC/PVC children are positive only when a window beat is premature") {
    // 12 peaks -> 8 retained -> 5 windows. One premature beat at retained
    // index 4 (windows 1..4 contain it; window 0 covers retained 0..3).
    std::vector<double> rr(11, 0.8);
    rr[5] = 0.5;  // beat 6 premature -> retained index 4
    auto built = build_for_rrs(rr);
    REQUIRE(built.segments.size() == 5);
    REQUIRE(built.retained.size() == 8);
    CHECK(built.retained[4].premature);

    for (ClassLabel parent : {ClassLabel::PAC, ClassLabel::PVC}) {
        auto labeled = segmenter::label_segments(built.segments, built.retained, parent);
        CHECK(labeled[0].label == ClassLabel::Normal);
        for (std::size_t k = 1; k < labeled.size(); ++k) {
            CAPTURE(k);
            CHECK(labeled[k].label == parent);
        }
    }
}

TEST_CASE("AF children are labeled by local RR irregularity") {
    SUBCASE("irregular window stays AF") {
        // Alternating RRs: irregularity = mean|diff| / mean far above 0.10.
        std::vector<double> rr = {0.60, 0.95, 0.55, 1.00, 0.70, 0.90, 0.65, 0.95, 0.60};
        auto built = build_for_rrs(rr);
        REQUIRE(!built.segments.empty());
        auto labeled = segmenter::label_segments(built.segments, built.retained, ClassLabel::AF);
        for (const auto& s : labeled) CHECK(s.label == ClassLabel::AF);
    }
    SUBCASE("regular rhythm under an AF parent degrades to Normal") {
        auto built = build_for_rrs(std::vector<double>(9, 0.8));
        auto labeled = segmenter::label_segments(built.segments, built.retained, ClassLabel::AF);
        for (const auto& s : labeled) CHECK(s.label == ClassLabel::Normal);
    }
}

TEST_CASE("label_segments enforces the annotation alignment contract") {
    auto built = build_for_rrs(std::vector<double>(9, 0.8));
    auto bad = built.retained;
    bad.pop_back();
    CHECK_THROWS_AS(segmenter::label_segments(built.segments, bad, ClassLabel::Normal),
                    ArgumentError);
}
