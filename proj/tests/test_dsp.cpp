#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "ecg/common.hpp"
#include "ecg/dsp.hpp"

using namespace ecg;
using dsp::SwtPadding;
using dsp::Wavelet;

namespace {

constexpr double kPi = std::numbers::pi;

// Independent transfer-function evaluator: direct complex polynomial
// evaluation of H(z) = B(z^-1)/A(z^-1) at z = e^{j 2 pi f / fs}. This is the
// oracle the designed filters are compared against; it shares no code with
// the library's own evaluator.
double oracle_gain(const std::vector<double>& b, const std::vector<double>& a, double f,
                   double fs) {
    const std::complex<double> jw(0.0, -2.0 * kPi * f / fs);
    std::complex<double> num(0, 0), den(0, 0);
    for (std::size_t k = 0; k < b.size(); ++k) num += b[k] * std::exp(jw * double(k));
    for (std::size_t k = 0; k < a.size(); ++k) den += a[k] * std::exp(jw * double(k));
    return std::abs(num / den);
}

std::vector<double> random_signal(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> x(n);
    for (auto& v : x) v = rng.uniform(-1.0, 1.0);
    return x;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    REQUIRE(a.size() == b.size());
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// Wavelet filter banks
// ---------------------------------------------------------------------------

TEST_CASE("wavelet banks satisfy the scaling-filter identities") {
    for (Wavelet w : {Wavelet::Db4, Wavelet::Sym4}) {
        const auto& bank = dsp::wavelet_bank(w);
        REQUIRE(bank.dec_lo.size() == 8);
        REQUIRE(bank.dec_hi.size() == 8);

        // Sum h = sqrt(2); sum h^2 = 1.
        double s = 0, s2 = 0;
        for (double v : bank.dec_lo) {
            s += v;
            s2 += v * v;
        }
        CHECK(s == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
        CHECK(s2 == doctest::Approx(1.0).epsilon(1e-12));

        // Orthonormality of even shifts: sum_k h[k] h[k+2m] = 0 for m != 0.
        for (int m = 1; m <= 3; ++m) {
            double dot = 0;
            for (std::size_t k = 0; k + 2 * static_cast<std::size_t>(m) < 8; ++k)
                dot += bank.dec_lo[k] * bank.dec_lo[k + 2 * static_cast<std::size_t>(m)];
            CHECK(std::abs(dot) < 1e-12);
        }

        // Quadrature mirror: g[k] = (-1)^k h[L-1-k].
        for (std::size_t k = 0; k < 8; ++k) {
            double expected = ((k % 2) ? -1.0 : 1.0) * bank.dec_lo[7 - k];
            CHECK(bank.dec_hi[k] == doctest::Approx(expected).epsilon(1e-15));
        }

        // High-pass filter has zero mean.
        double hs = 0;
        for (double v : bank.dec_hi) hs += v;
        CHECK(std::abs(hs) < 1e-12);
    }
}

// ---------------------------------------------------------------------------
// Butterworth design
// ---------------------------------------------------------------------------

TEST_CASE("high-pass design: single-pass magnitudes against the oracle evaluator") {
    auto f = dsp::design_butterworth_highpass(4, 1.0, 500.0);
    REQUIRE(f.b.size() == 5);
    REQUIRE(f.a.size() == 5);
    CHECK(f.a[0] == doctest::Approx(1.0).epsilon(1e-15));

    // Butterworth cutoff: |H| = 1/sqrt(2) at the corner.
    CHECK(oracle_gain(f.b, f.a, 1.0, 500.0) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-6));
    // DC is exactly nulled: numerator coefficients sum to zero.
    double bsum = 0;
    for (double v : f.b) bsum += v;
    CHECK(std::abs(bsum) < 1e-12);
    // Deep in the passband the gain is unity.
    CHECK(oracle_gain(f.b, f.a, 40.0, 500.0) == doctest::Approx(1.0).epsilon(1e-3));
    // Monotone Butterworth rolloff below the corner.
    CHECK(oracle_gain(f.b, f.a, 0.5, 500.0) < oracle_gain(f.b, f.a, 0.7, 500.0));

    // Library evaluator agrees with the oracle wherever the response is not
    // dominated by cancellation noise (deep in the stopband both evaluators
    // compute a residual of near-total cancellation, so only the order of
    // magnitude is meaningful there).
    for (double freq : {0.5, 1.0, 2.0, 5.0, 10.0, 40.0, 100.0, 200.0})
        CHECK(dsp::filter_gain(f, freq) ==
              doctest::Approx(oracle_gain(f.b, f.a, freq, 500.0)).epsilon(1e-6));
    CHECK(dsp::filter_gain(f, 0.2) < 0.01);
    CHECK(oracle_gain(f.b, f.a, 0.2, 500.0) < 0.01);
}

TEST_CASE("high-pass design: stability and parameter validation") {
    for (int order : {1, 2, 3, 4, 5, 6}) {
        auto f = dsp::design_butterworth_highpass(order, 1.0, 500.0);
        CHECK(dsp::max_pole_magnitude(f) < 1.0);
        CHECK(static_cast<int>(f.b.size()) == order + 1);
    }
    // Higher orders stay stable when the cutoff is not pressed against DC.
    CHECK(dsp::max_pole_magnitude(dsp::design_butterworth_highpass(8, 10.0, 500.0)) < 1.0);
    // Order 8 with the cutoff at 1/250 of Nyquist rounds its poles outside
    // the unit circle in flat polynomial form; the design must refuse it.
    CHECK_THROWS_AS(dsp::design_butterworth_highpass(8, 1.0, 500.0), NumericError);

    CHECK_THROWS_AS(dsp::design_butterworth_highpass(0, 1.0, 500.0), ArgumentError);
    CHECK_THROWS_AS(dsp::design_butterworth_highpass(4, 0.0, 500.0), ArgumentError);
    CHECK_THROWS_AS(dsp::design_butterworth_highpass(4, 250.0, 500.0), ArgumentError);
}

// ---------------------------------------------------------------------------
// lfilter / filtfilt
// ---------------------------------------------------------------------------

TEST_CASE("lfilter matches the direct difference-equation recurrence") {
    // Oracle: naive y[n] = sum b[k] x[n-k] - sum a[k] y[n-k], written here
    // independently of the DF2T implementation.
    auto f = dsp::design_butterworth_highpass(3, 2.0, 360.0);
    auto x = random_signal(200, 99);
    std::vector<double> want(x.size(), 0.0);
    for (std::size_t n = 0; n < x.size(); ++n) {
        double acc = 0;
        for (std::size_t k = 0; k < f.b.size(); ++k)
            if (n >= k) acc += f.b[k] * x[n - k];
        for (std::size_t k = 1; k < f.a.size(); ++k)
            if (n >= k) acc -= f.a[k] * want[n - k];
        want[n] = acc;
    }
    auto got = dsp::lfilter(f, x);
    CHECK(max_abs_diff(got, want) < 1e-12);
}

TEST_CASE("lfilter_zi gives a transient-free response to a constant input") {
    auto f = dsp::design_butterworth_highpass(4, 1.0, 500.0);
    // For a high-pass filter the steady-state response to a constant is 0;
    // with zi scaled by the first sample the output must start there already.
    std::vector<double> ones(100, 1.0);
    auto zi = dsp::lfilter_zi(f);
    for (auto& v : zi) v *= ones.front();
    auto y = dsp::lfilter(f, ones, &zi);
    // The zi solve is ill-conditioned for poles this close to z = 1, so the
    // residual depends on FP contraction; 1e-6 is still far below the O(1)
    // transient the initial conditions are meant to cancel.
    for (double v : y) CHECK(std::abs(v) < 1e-6);
}

TEST_CASE("filtfilt is zero-phase and has |H|^2 magnitude") {
    auto f = dsp::design_butterworth_highpass(4, 1.0, 500.0);

    SUBCASE("symmetric input stays symmetric") {
        // A symmetric pulse through a zero-phase filter keeps its symmetry.
        // The 1 Hz cutoff makes the impulse response several thousand samples
        // long, so the signal must dwarf that for edge effects to vanish.
        const std::size_t n = 20001, mid = 10000;
        std::vector<double> x(n, 0.0);
        for (int i = -150; i <= 150; ++i)
            x[static_cast<std::size_t>(static_cast<long>(mid) + i)] =
                std::exp(-i * i / (2.0 * 30.0 * 30.0));
        auto y = dsp::filtfilt(f, x);
        double asym = 0;
        for (std::size_t i = 1; i <= 3000; ++i)
            asym = std::max(asym, std::abs(y[mid + i] - y[mid - i]));
        CHECK(asym < 1e-8);
    }

    SUBCASE("steady-state amplitude of a sinusoid equals |H|^2") {
        const double fs = 500.0, freq = 3.0;
        const std::size_t n = 5000;
        std::vector<double> x(n);
        for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(2 * kPi * freq * double(i) / fs);
        auto y = dsp::filtfilt(f, x);
        // Amplitude in the interior (edges carry reflection transients).
        double amp = 0;
        for (std::size_t i = n / 4; i < 3 * n / 4; ++i) amp = std::max(amp, std::abs(y[i]));
        const double g1 = oracle_gain(f.b, f.a, freq, fs);
        CHECK(amp == doctest::Approx(g1 * g1).epsilon(5e-3));
    }

    SUBCASE("linearity") {
        auto x1 = random_signal(400, 5);
        auto x2 = random_signal(400, 6);
        std::vector<double> mix(400);
        for (std::size_t i = 0; i < 400; ++i) mix[i] = 2.0 * x1[i] - 0.5 * x2[i];
        auto y1 = dsp::filtfilt(f, x1);
        auto y2 = dsp::filtfilt(f, x2);
        auto ym = dsp::filtfilt(f, mix);
        double err = 0;
        for (std::size_t i = 0; i < 400; ++i)
            err = std::max(err, std::abs(ym[i] - (2.0 * y1[i] - 0.5 * y2[i])));
        // Poles near z = 1 amplify rounding by ~1/(1-|p|), so exact linearity
        // degrades to ~1e-9; allow comfortable headroom.
        CHECK(err < 1e-7);
    }

    SUBCASE("input shorter than the pad is an argument error") {
        std::vector<double> tiny(5, 1.0);
        CHECK_THROWS_AS(dsp::filtfilt(f, tiny), ArgumentError);
    }
}

// ---------------------------------------------------------------------------
// Stationary wavelet transform
// ---------------------------------------------------------------------------

TEST_CASE("SWT perfect reconstruction across lengths, wavelets, paddings") {
    for (Wavelet w : {Wavelet::Db4, Wavelet::Sym4}) {
        for (SwtPadding pad : {SwtPadding::Symmetric, SwtPadding::Circular}) {
            for (std::size_t n : {512u, 777u, 1000u, 1024u}) {
                for (int levels : {1, 3, 5}) {
                    auto x = random_signal(n, 1000 + n + static_cast<std::size_t>(levels));
                    auto d = dsp::swt_decompose(x, w, levels, pad);
                    REQUIRE(d.details.size() == static_cast<std::size_t>(levels));
                    auto back = dsp::swt_reconstruct(d);
                    REQUIRE(back.size() == n);
                    CHECK(max_abs_diff(back, x) < 1e-10);
                }
            }
        }
    }
}

TEST_CASE("SWT decomposition bands all have the padded length") {
    auto x = random_signal(1000, 3);
    auto d = dsp::swt_decompose(x, Wavelet::Db4, 4);
    // 1000 padded to the next multiple of 2^4 = 1008.
    CHECK(d.details[0].size() == 1008);
    CHECK(d.approx.size() == 1008);
    CHECK(d.original_length == 1000);
}

TEST_CASE("SWT is shift-equivariant in circular mode") {
    const std::size_t n = 1024;
    auto x = random_signal(n, 17);
    const std::size_t shift = 37;
    std::vector<double> xs(n);
    for (std::size_t i = 0; i < n; ++i) xs[(i + shift) % n] = x[i];

    auto d = dsp::swt_decompose(x, Wavelet::Db4, 5, SwtPadding::Circular);
    auto ds = dsp::swt_decompose(xs, Wavelet::Db4, 5, SwtPadding::Circular);
    for (int lvl = 0; lvl < 5; ++lvl) {
        double err = 0;
        for (std::size_t i = 0; i < n; ++i)
            err = std::max(err, std::abs(ds.details[static_cast<std::size_t>(lvl)][(i + shift) % n] -
                                         d.details[static_cast<std::size_t>(lvl)][i]));
        CHECK(err < 1e-10);
    }
}

TEST_CASE("SWT is linear") {
    auto x = random_signal(512, 21);
    auto y = random_signal(512, 22);
    std::vector<double> mix(512);
    for (std::size_t i = 0; i < 512; ++i) mix[i] = 1.5 * x[i] + 0.25 * y[i];
    auto dx = dsp::swt_decompose(x, Wavelet::Db4, 3);
    auto dy = dsp::swt_decompose(y, Wavelet::Db4, 3);
    auto dm = dsp::swt_decompose(mix, Wavelet::Db4, 3);
    for (int lvl = 0; lvl < 3; ++lvl) {
        double err = 0;
        for (std::size_t i = 0; i < dm.details[0].size(); ++i)
            err = std::max(err, std::abs(dm.details[static_cast<std::size_t>(lvl)][i] -
                                         (1.5 * dx.details[static_cast<std::size_t>(lvl)][i] +
                                          0.25 * dy.details[static_cast<std::size_t>(lvl)][i])));
        CHECK(err < 1e-11);
    }
}

TEST_CASE("SWT argument validation and tiny-signal padding") {
    auto x = random_signal(64, 1);
    CHECK_THROWS_AS(dsp::swt_decompose(x, Wavelet::Db4, 0), ArgumentError);
    CHECK_THROWS_AS(dsp::swt_decompose({}, Wavelet::Db4, 1), ArgumentError);
    // A signal shorter than 2^levels is padded up and still round-trips.
    std::vector<double> tiny = {1.0, -2.0, 3.0, 0.5};
    auto d = dsp::swt_decompose(tiny, Wavelet::Db4, 6);
    CHECK(d.approx.size() == 64);
    auto back = dsp::swt_reconstruct(d);
    REQUIRE(back.size() == 4);
    CHECK(max_abs_diff(back, tiny) < 1e-12);
}

// ---------------------------------------------------------------------------
// Denoising
// ---------------------------------------------------------------------------

TEST_CASE("soft threshold shrinks toward zero") {
    CHECK(dsp::soft_threshold(3.0, 1.0) == 2.0);
    CHECK(dsp::soft_threshold(-3.0, 1.0) == -2.0);
    CHECK(dsp::soft_threshold(0.5, 1.0) == 0.0);
    CHECK(dsp::soft_threshold(-0.5, 1.0) == 0.0);
    CHECK(dsp::soft_threshold(0.0, 1.0) == 0.0);
    // |out| <= max(|c| - t, 0) for random values.
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        double c = rng.uniform(-4, 4), t = rng.uniform(0, 2);
        double out = dsp::soft_threshold(c, t);
        CHECK(std::abs(out) <= std::max(std::abs(c) - t, 0.0) + 1e-15);
        CHECK(out * c >= 0.0);  // sign preserved (or zero)
    }
}

TEST_CASE("wavelet denoising improves SNR on a bump train") {
    // A clean quasi-periodic bump train plus white noise; Donoho shrinkage
    // should recover at least 3 dB in most seeds (the full 20-seed gate runs
    // in the acceptance suite; this is a fast 5-seed version).
    const std::size_t n = 4000;
    std::vector<double> clean(n, 0.0);
    for (std::size_t c = 200; c + 200 < n; c += 400)
        for (int i = -40; i <= 40; ++i)
            clean[c + static_cast<std::size_t>(i)] += std::exp(-i * i / (2.0 * 6.0 * 6.0));

    int wins = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(seed * 7 + 1);
        std::vector<double> noisy(n);
        double p_sig = 0, p_in = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double noise = 0.1 * rng.next_gaussian();
            noisy[i] = clean[i] + noise;
            p_sig += clean[i] * clean[i];
            p_in += noise * noise;
        }
        auto den = dsp::wavelet_denoise(noisy, Wavelet::Db4, 4);
        double p_out = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double r = den[i] - clean[i];
            p_out += r * r;
        }
        double gain_db = 10 * std::log10(p_sig / p_out) - 10 * std::log10(p_sig / p_in);
        if (gain_db >= 3.0) ++wins;
    }
    CHECK(wins >= 4);
}

TEST_CASE("denoising a clean low-order polynomial is near-lossless") {
    // With essentially no detail-band noise the threshold is tiny and the
    // signal passes through intact.
    std::vector<double> x(600);
    for (std::size_t i = 0; i < 600; ++i) {
        double t = double(i) / 600.0;
        x[i] = 0.3 + 0.5 * t;
    }
    auto y = dsp::wavelet_denoise(x, Wavelet::Db4, 3);
    CHECK(max_abs_diff(x, y) < 1e-6);
}

// ---------------------------------------------------------------------------
// Rational resampling
// ---------------------------------------------------------------------------

TEST_CASE("resample_rational basics") {
    SUBCASE("identity when up == down == 1") {
        auto x = random_signal(777, 9);
        auto y = dsp::resample_rational(x, 1, 1);
        CHECK(max_abs_diff(x, y) == 0.0);
    }
    SUBCASE("output length is ceil(n*up/down)") {
        std::vector<double> x(3000, 0.0);
        CHECK(dsp::resample_rational(x, 7, 50).size() == 420);
        std::vector<double> odd(2999, 0.0);
        // ceil(2999*7/50) = ceil(419.86) = 420
        CHECK(dsp::resample_rational(odd, 7, 50).size() == 420);
    }
    SUBCASE("non-coprime factors are an argument error") {
        std::vector<double> x(100, 0.0);
        CHECK_THROWS_AS(dsp::resample_rational(x, 2, 4), ArgumentError);
        CHECK_THROWS_AS(dsp::resample_rational(x, 10, 500), ArgumentError);
        CHECK_THROWS_AS(dsp::resample_rational(x, 0, 1), ArgumentError);
    }
}

TEST_CASE("resampling preserves in-band sinusoids") {
    const double fs = 500.0;
    const std::size_t n = 5000;
    for (double freq : {1.0, 5.0, 12.0, 20.0}) {
        std::vector<double> x(n);
        for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(2 * kPi * freq * double(i) / fs);
        auto y = dsp::resample_rational(x, 7, 50);  // 500 -> 70 Hz
        // Compare against the analytically resampled sinusoid, interior only.
        double err = 0;
        for (std::size_t i = y.size() / 4; i < 3 * y.size() / 4; ++i) {
            double t = double(i) / 70.0;
            err = std::max(err, std::abs(y[i] - std::sin(2 * kPi * freq * t)));
        }
        CHECK(err < 0.02);
    }
}

TEST_CASE("down-then-up round trip keeps in-band content") {
    // Band-limited (<= 20 Hz) content survives 500 -> 70 -> 500 within 2% RMS.
    const double fs = 500.0;
    const std::size_t n = 4000;
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) {
        double t = double(i) / fs;
        x[i] = std::sin(2 * kPi * 4.0 * t) + 0.5 * std::sin(2 * kPi * 11.0 * t) +
               0.25 * std::sin(2 * kPi * 19.0 * t);
    }
    auto down = dsp::resample_rational(x, 7, 50);
    auto up = dsp::resample_rational(down, 50, 7);
    REQUIRE(up.size() >= n);
    double num = 0, den = 0;
    for (std::size_t i = n / 4; i < 3 * n / 4; ++i) {
        num += (up[i] - x[i]) * (up[i] - x[i]);
        den += x[i] * x[i];
    }
    CHECK(std::sqrt(num / den) < 0.02);
}

TEST_CASE("bessel_i0 reference values") {
    // Abramowitz & Stegun 9.8 table values.
    CHECK(dsp::bessel_i0(0.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(dsp::bessel_i0(1.0) == doctest::Approx(1.2660658777520084).epsilon(1e-12));
    CHECK(dsp::bessel_i0(2.0) == doctest::Approx(2.2795853023360673).epsilon(1e-12));
    CHECK(dsp::bessel_i0(5.0) == doctest::Approx(27.239871823604442).epsilon(1e-12));
    CHECK(dsp::bessel_i0(-1.0) == dsp::bessel_i0(1.0));  // even function
}
