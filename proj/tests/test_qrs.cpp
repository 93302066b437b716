#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <vector>

#include "ecg/common.hpp"
#include "ecg/qrs.hpp"
#include "ecg/synth.hpp"

using namespace ecg;

namespace {

std::vector<double> lead_samples(const EcgRecording& rec, int lead) {
    std::vector<double> x(static_cast<std::size_t>(rec.samples.cols()));
    for (Eigen::Index i = 0; i < rec.samples.cols(); ++i)
        x[static_cast<std::size_t>(i)] = rec.samples(lead, i);
    return x;
}

synth::SynthRecord clean_record(ClassLabel label, double duration_s, double hr,
                                std::uint64_t seed) {
    synth::SynthSpec spec;
    spec.archetype = label;
    spec.duration_s = duration_s;
    spec.hr_bpm = hr;
    spec.seed = seed;
    return synth::generate(spec);
}

// Greedy matching of detected peaks to truth within a sample tolerance.
struct MatchStats {
    int matched = 0;
    int missed = 0;
    int spurious = 0;
};

MatchStats match_peaks(const std::vector<int>& truth, const std::vector<int>& found,
                       int tol) {
    MatchStats s;
    std::vector<bool> used(found.size(), false);
    for (int t : truth) {
        int best = -1;
        int best_dist = tol + 1;
        for (std::size_t i = 0; i < found.size(); ++i) {
            if (used[i]) continue;
            int d = std::abs(found[i] - t);
            if (d < best_dist) {
                best_dist = d;
                best = static_cast<int>(i);
            }
        }
        if (best >= 0) {
            used[static_cast<std::size_t>(best)] = true;
            ++s.matched;
        } else {
            ++s.missed;
        }
    }
    for (bool u : used)
        if (!u) ++s.spurious;
    return s;
}

}  // namespace

TEST_CASE("clean normal rhythm: every truth beat found within 50 ms") {
    auto rec = clean_record(ClassLabel::Normal, 30.0, 75.0, 42);
    auto x = lead_samples(rec.recording, 1);
    auto peaks = qrs::detect_r_peaks(x, 500.0);

    // 75 bpm for 30 s leaves 37-38 beats.
    CHECK(rec.truth_peaks.size() >= 36);
    CHECK(rec.truth_peaks.size() <= 38);

    auto m = match_peaks(rec.truth_peaks, peaks.peaks, 25);
    CHECK(m.missed == 0);
    CHECK(m.spurious == 0);
    CHECK(m.matched == static_cast<int>(rec.truth_peaks.size()));
}

TEST_CASE("detection works across heart rates and archetypes") {
    for (double hr : {50.0, 75.0, 110.0}) {
        for (ClassLabel label : {ClassLabel::Normal, ClassLabel::AF, ClassLabel::RBBB,
                                 ClassLabel::PVC}) {
            CAPTURE(hr);
            CAPTURE(to_string(label));
            auto rec = clean_record(label, 20.0, hr, 7 * static_cast<std::uint64_t>(hr));
            auto x = lead_samples(rec.recording, 1);
            auto peaks = qrs::detect_r_peaks(x, 500.0);
            auto m = match_peaks(rec.truth_peaks, peaks.peaks, 25);
            // Allow at most one slip per record on the harder archetypes.
            CHECK(m.missed <= 1);
            CHECK(m.spurious <= 1);
        }
    }
}

TEST_CASE("flat input yields no peaks") {
    std::vector<double> flat(5000, 0.0);
    auto peaks = qrs::detect_r_peaks(flat, 500.0);
    CHECK(peaks.peaks.empty());

    std::vector<double> dc(5000, 0.73);
    CHECK(qrs::detect_r_peaks(dc, 500.0).peaks.empty());
}

TEST_CASE("input shorter than two seconds is rejected") {
    std::vector<double> x(999, 0.0);
    CHECK_THROWS_AS(qrs::detect_r_peaks(x, 500.0), ArgumentError);
    std::vector<double> ok(1000, 0.0);
    CHECK_NOTHROW(qrs::detect_r_peaks(ok, 500.0));
    CHECK_THROWS_AS(qrs::detect_r_peaks(ok, 0.0), ArgumentError);
}

TEST_CASE("detection is invariant to amplitude scaling") {
    auto rec = clean_record(ClassLabel::Normal, 15.0, 80.0, 9);
    auto x = lead_samples(rec.recording, 1);
    auto base = qrs::detect_r_peaks(x, 500.0);

    for (double scale : {2.0, 0.5, 10.0}) {
        auto scaled = x;
        for (auto& v : scaled) v *= scale;
        auto got = qrs::detect_r_peaks(scaled, 500.0);
        CHECK(got.peaks == base.peaks);
    }
}

TEST_CASE("detection is deterministic") {
    auto rec = clean_record(ClassLabel::AF, 20.0, 90.0, 3);
    auto x = lead_samples(rec.recording, 1);
    auto a = qrs::detect_r_peaks(x, 500.0);
    auto b = qrs::detect_r_peaks(x, 500.0);
    CHECK(a.peaks == b.peaks);
}

TEST_CASE("peaks are increasing and respect the refractory period") {
    auto rec = clean_record(ClassLabel::PAC, 30.0, 100.0, 11);
    auto x = lead_samples(rec.recording, 1);
    auto peaks = qrs::detect_r_peaks(x, 500.0);
    REQUIRE(peaks.peaks.size() >= 2);
    const int min_gap = static_cast<int>(0.200 * 500.0);
    for (std::size_t i = 1; i < peaks.peaks.size(); ++i) {
        CHECK(peaks.peaks[i] > peaks.peaks[i - 1]);
        CHECK(peaks.peaks[i] - peaks.peaks[i - 1] >= min_gap);
    }
}

TEST_CASE("search-back recovers a beat after a long silent gap") {
    // Build a regular bump train with one missing beat; search-back should
    // find the low-amplitude replacement placed in the gap.
    const double fs = 500.0;
    const std::size_t n = 10000;
    std::vector<double> x(n, 0.0);
    std::vector<int> centers;
    for (int c = 400; c + 400 < static_cast<int>(n); c += 400) centers.push_back(c);
    for (std::size_t k = 0; k < centers.size(); ++k) {
        // Re-insert beat 12 at 45% amplitude. The detection feature squares
        // the signal, so this beat carries ~0.20x the normal feature energy:
        // below the running threshold (0.25x) yet above the search-back
        // threshold (0.125x).
        double amp = (k == 12) ? 0.45 : 1.0;
        for (int i = -10; i <= 10; ++i)
            x[static_cast<std::size_t>(centers[k] + i)] +=
                amp * std::exp(-i * i / (2.0 * 3.0 * 3.0));
    }
    auto peaks = qrs::detect_r_peaks(x, fs);
    auto m = match_peaks(std::vector<int>(centers.begin(), centers.end()), peaks.peaks, 25);
    CHECK(m.missed == 0);
}

TEST_CASE("lead fusion prefers lead II and falls back from a dead lead") {
    auto rec = clean_record(ClassLabel::Normal, 10.0, 70.0, 5);

    SUBCASE("healthy record uses the preferred lead") {
        auto choice = qrs::fuse_lead_choice(rec.recording);
        CHECK(choice.lead == 1);
        auto direct = lead_samples(rec.recording, 1);
        CHECK(choice.samples == direct);
    }

    SUBCASE("a flat preferred lead falls back to the strongest lead") {
        auto copy = rec.recording;
        copy.samples.row(1).setZero();
        auto choice = qrs::fuse_lead_choice(copy);
        CHECK(choice.lead != 1);
        // The fallback is the largest peak-to-peak lead.
        double best = -1;
        int best_lead = -1;
        for (int l = 0; l < 12; ++l) {
            double ptp = copy.samples.row(l).maxCoeff() - copy.samples.row(l).minCoeff();
            if (ptp > best) {
                best = ptp;
                best_lead = l;
            }
        }
        CHECK(choice.lead == best_lead);
    }
}

TEST_CASE("peak list carries the configuration snapshot") {
    auto rec = clean_record(ClassLabel::Normal, 10.0, 70.0, 5);
    auto x = lead_samples(rec.recording, 1);
    qrs::QrsConfig cfg;
    cfg.threshold_factor = 0.30;
    auto peaks = qrs::detect_r_peaks(x, 500.0, cfg);
    CHECK(peaks.config.threshold_factor == 0.30);
}
