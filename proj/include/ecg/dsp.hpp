#pragma once

#include <cstddef>
#include <vector>

#include "ecg/common.hpp"

namespace ecg::dsp {

// ---------------------------------------------------------------------------
// IIR filtering
// ---------------------------------------------------------------------------

struct IirFilter {
    std::vector<double> b;  // numerator, b[0..M]
    std::vector<double> a;  // denominator, a[0] = 1
    int order = 0;
    double cutoff_hz = 0.0;
    double rate_hz = 0.0;
};

// Digital Butterworth high-pass: analog prototype -> lp2hp -> bilinear
// transform with frequency prewarping. Single-pass magnitude at the cutoff
// is 1/sqrt(2).
IirFilter design_butterworth_highpass(int order, double cutoff_hz, double rate_hz);

// Largest pole magnitude of the filter (stability check: < 1).
double max_pole_magnitude(const IirFilter& f);

// |H(e^{j 2 pi f / rate})| evaluated directly from the coefficients.
double filter_gain(const IirFilter& f, double freq_hz);

// Single forward pass, direct form II transposed, zero initial state unless
// zi (length = order) is given.
std::vector<double> lfilter(const IirFilter& f, const std::vector<double>& x,
                            const std::vector<double>* zi = nullptr);

// Steady-state initial conditions for a unit-amplitude input (scale by the
// first sample before use), as needed for transient-free filtfilt edges.
std::vector<double> lfilter_zi(const IirFilter& f);

// Zero-phase filtering: odd-reflect pad of 3*order samples on each end,
// forward pass, reverse pass, pad removed. Effective magnitude is |H|^2.
std::vector<double> filtfilt(const IirFilter& f, const std::vector<double>& x);

// ---------------------------------------------------------------------------
// Stationary wavelet transform (a trous / undecimated)
// ---------------------------------------------------------------------------

enum class Wavelet { Db4, Sym4 };
enum class SwtPadding { Symmetric, Circular };

struct WaveletBank {
    std::vector<double> dec_lo;  // scaling (h)
    std::vector<double> dec_hi;  // wavelet (g), quadrature mirror of h
};

const WaveletBank& wavelet_bank(Wavelet w);

struct SwtDecomposition {
    std::vector<std::vector<double>> details;  // details[j-1] = level j, finest first
    std::vector<double> approx;                // approximation at deepest level
    Wavelet wavelet = Wavelet::Db4;
    int levels = 0;
    std::size_t original_length = 0;  // before padding
    std::size_t pad_left = 0;
    SwtPadding padding = SwtPadding::Symmetric;
};

// Undecimated decomposition: at level j the filters are upsampled by
// 2^(j-1); the input is padded to a multiple of 2^J (symmetric extension by
// default, circular wrap in Circular mode) and the pad is tracked so the
// inverse can remove it. Every band has the padded length.
SwtDecomposition swt_decompose(const std::vector<double>& x, Wavelet wavelet, int levels,
                               SwtPadding padding = SwtPadding::Symmetric);

// Exact inverse; returns a signal of the original (pre-padding) length.
std::vector<double> swt_reconstruct(const SwtDecomposition& d);

// Donoho soft-threshold shrinkage: sigma = median(|level-1 details|)/0.6745,
// threshold t = sigma*sqrt(2 ln N) with N the padded length, soft threshold
// applied to every detail band, then reconstruct.
std::vector<double> wavelet_denoise(const std::vector<double>& x, Wavelet wavelet, int levels);

// sign(c) * max(|c| - t, 0)
double soft_threshold(double c, double t);

// ---------------------------------------------------------------------------
// Rational resampling
// ---------------------------------------------------------------------------

// Zero-insertion upsample by `up`, windowed-sinc low-pass (Kaiser beta=8.6,
// length 10*max(up,down)+1, cutoff min(pi/up, pi/down), group delay
// compensated), downsample by `down`. Output length = ceil(n*up/down).
// up = down = 1 returns the input unchanged. Non-coprime factors are an
// argument error. rate_in_hz is carried for bookkeeping only.
std::vector<double> resample_rational(const std::vector<double>& x, int up, int down,
                                      double rate_in_hz = 0.0);

// Modified Bessel function of the first kind, order zero (Kaiser window).
double bessel_i0(double x);

}  // namespace ecg::dsp
