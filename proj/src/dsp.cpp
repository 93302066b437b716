#include "ecg/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>

namespace ecg::dsp {

namespace {

// Orthonormal scaling filters (sum of squares 1, sum sqrt(2)), 15+ significant
// digits. Daubechies-4 is the minimum-phase factor of the degree-7 Daubechies
// product filter; Symlet-4 is the least-asymmetric factor of the same product.
const std::vector<double> kDb4DecLo = {
    -0.010597401785069032, 0.032883011666885169, 0.030841381835560764,
    -0.187034811719093084, -0.027983769416859854, 0.630880767929858908,
    0.714846570552915647, 0.230377813308896501};

const std::vector<double> kSym4DecLo = {
    -0.075765714789502213, -0.029635527646002492, 0.497618667632774989,
    0.803738751805132080, 0.297857795605306051, -0.099219543576633533,
    -0.012603967262031304, 0.032223100604051468};

WaveletBank make_bank(const std::vector<double>& dec_lo) {
    WaveletBank bank;
    bank.dec_lo = dec_lo;
    const std::size_t L = dec_lo.size();
    bank.dec_hi.resize(L);
    // Quadrature mirror: g[k] = (-1)^k * h[L-1-k], giving |H|^2 + |G|^2 = 2.
    for (std::size_t k = 0; k < L; ++k) {
        double v = dec_lo[L - 1 - k];
        bank.dec_hi[k] = (k % 2 == 0) ? v : -v;
    }
    return bank;
}

// Centered circular convolution with a filter upsampled by `stride`:
// out[t] = sum_k f[k] * x[(t + c - k*stride) mod n], c = span/2.
std::vector<double> atrous_conv(const std::vector<double>& x, const std::vector<double>& f,
                                std::size_t stride) {
    const std::size_t n = x.size();
    const std::size_t span = (f.size() - 1) * stride;
    const std::size_t c = span / 2;
    std::vector<double> out(n, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
        double s = 0.0;
        std::size_t idx = (t + c) % n;
        for (std::size_t k = 0; k < f.size(); ++k) {
            s += f[k] * x[idx];
            idx = (idx + n - stride % n) % n;
        }
        out[t] = s;
    }
    return out;
}

// Matching circular correlation (the adjoint of atrous_conv):
// out[t] = sum_k f[k] * x[(t - c + k*stride) mod n].
std::vector<double> atrous_corr(const std::vector<double>& x, const std::vector<double>& f,
                                std::size_t stride) {
    const std::size_t n = x.size();
    const std::size_t span = (f.size() - 1) * stride;
    const std::size_t c = span / 2;
    std::vector<double> out(n, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
        double s = 0.0;
        std::size_t idx = (t + n - c % n) % n;
        for (std::size_t k = 0; k < f.size(); ++k) {
            s += f[k] * x[idx];
            idx = (idx + stride) % n;
        }
        out[t] = s;
    }
    return out;
}

// Symmetric (half-sample reflection) index into [0, n): ... x1 x0 | x0 x1 ...
std::size_t symmetric_index(long i, long n) {
    if (n == 1) return 0;
    long period = 2 * n;
    long m = i % period;
    if (m < 0) m += period;
    if (m >= n) m = period - 1 - m;
    return static_cast<std::size_t>(m);
}

std::vector<std::complex<double>> poly_from_roots(const std::vector<std::complex<double>>& roots) {
    std::vector<std::complex<double>> p{1.0};
    for (const auto& r : roots) {
        std::vector<std::complex<double>> q(p.size() + 1, 0.0);
        for (std::size_t i = 0; i < p.size(); ++i) {
            q[i] += p[i];
            q[i + 1] -= p[i] * r;
        }
        p = std::move(q);
    }
    return p;
}

double median_of(std::vector<double> v) {
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

const WaveletBank& wavelet_bank(Wavelet w) {
    static const WaveletBank db4 = make_bank(kDb4DecLo);
    static const WaveletBank sym4 = make_bank(kSym4DecLo);
    switch (w) {
        case Wavelet::Db4: return db4;
        case Wavelet::Sym4: return sym4;
    }
    throw ArgumentError("unsupported wavelet family");
}

// ---------------------------------------------------------------------------
// Butterworth design
// ---------------------------------------------------------------------------

IirFilter design_butterworth_highpass(int order, double cutoff_hz, double rate_hz) {
    if (order < 1) throw ArgumentError("butterworth: order must be >= 1");
    if (!(rate_hz > 0.0)) throw ArgumentError("butterworth: rate must be positive");
    if (!(cutoff_hz > 0.0) || cutoff_hz >= rate_hz / 2.0)
        throw ArgumentError("butterworth: cutoff must lie in (0, rate/2)");

    const double fs2 = 2.0 * rate_hz;
    // Prewarp the cutoff so the bilinear transform lands it exactly.
    const double warped = fs2 * std::tan(M_PI * cutoff_hz / rate_hz);

    // Analog low-pass prototype poles on the unit circle (left half-plane),
    // then lp2hp: p -> warped / p, with `order` zeros at s = 0 and unit gain
    // (the Butterworth polynomial evaluates to 1 at s = 0).
    std::vector<std::complex<double>> poles_a(static_cast<std::size_t>(order));
    for (int k = 0; k < order; ++k) {
        double theta = M_PI * (2.0 * k + 1.0) / (2.0 * order) + M_PI / 2.0;
        std::complex<double> proto(std::cos(theta), std::sin(theta));
        poles_a[static_cast<std::size_t>(k)] = warped / proto;
    }

    // Bilinear transform z = (2 fs + s) / (2 fs - s). The analog zeros at
    // s = 0 map to digital zeros at z = 1.
    std::vector<std::complex<double>> poles_d(poles_a.size());
    std::complex<double> gain = 1.0;  // analog gain 1
    for (std::size_t i = 0; i < poles_a.size(); ++i) {
        poles_d[i] = (fs2 + poles_a[i]) / (fs2 - poles_a[i]);
        gain *= (fs2 - 0.0) / (fs2 - poles_a[i]);  // zeros at 0 contribute (fs2 - 0)
    }
    std::vector<std::complex<double>> zeros_d(static_cast<std::size_t>(order),
                                              std::complex<double>(1.0, 0.0));

    auto bpoly = poly_from_roots(zeros_d);
    auto apoly = poly_from_roots(poles_d);

    IirFilter f;
    f.order = order;
    f.cutoff_hz = cutoff_hz;
    f.rate_hz = rate_hz;
    f.b.resize(bpoly.size());
    f.a.resize(apoly.size());
    double k = gain.real();
    for (std::size_t i = 0; i < bpoly.size(); ++i) f.b[i] = k * bpoly[i].real();
    for (std::size_t i = 0; i < apoly.size(); ++i) f.a[i] = apoly[i].real();
    // Normalize a[0] = 1 (it already is, up to rounding).
    double a0 = f.a[0];
    for (double& v : f.b) v /= a0;
    for (double& v : f.a) v /= a0;
    // Flat-polynomial coefficients lose precision when many poles cluster
    // near z = 1 (high order with a cutoff far below Nyquist); refuse a
    // design whose rounded coefficients are no longer stable rather than
    // letting the filter blow up downstream.
    if (max_pole_magnitude(f) >= 1.0)
        throw NumericError("butterworth: order " + std::to_string(order) + " at " +
                           std::to_string(cutoff_hz) +
                           " Hz is numerically unstable in polynomial form; "
                           "lower the order or raise the cutoff");
    return f;
}

double max_pole_magnitude(const IirFilter& f) {
    // Roots of the denominator by the companion-matrix power iteration is
    // overkill here; Durand-Kerner iteration is compact and robust for the
    // low orders involved.
    std::size_t n = f.a.size() - 1;
    if (n == 0) return 0.0;
    std::vector<std::complex<double>> coeff(f.a.begin(), f.a.end());
    std::vector<std::complex<double>> r(n);
    for (std::size_t i = 0; i < n; ++i)
        r[i] = std::pow(std::complex<double>(0.4, 0.9), static_cast<double>(i));
    for (int iter = 0; iter < 500; ++iter) {
        double moved = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            std::complex<double> num = coeff[0];
            for (std::size_t j = 1; j <= n; ++j) num = num * r[i] + coeff[j];
            std::complex<double> den = coeff[0];
            for (std::size_t j = 0; j < n; ++j)
                if (j != i) den *= (r[i] - r[j]);
            std::complex<double> delta = num / den;
            r[i] -= delta;
            moved = std::max(moved, std::abs(delta));
        }
        if (moved < 1e-14) break;
    }
    double mx = 0.0;
    for (const auto& root : r) mx = std::max(mx, std::abs(root));
    return mx;
}

double filter_gain(const IirFilter& f, double freq_hz) {
    const std::complex<double> zinv = std::exp(std::complex<double>(0.0, -2.0 * M_PI * freq_hz / f.rate_hz));
    std::complex<double> num = 0.0, den = 0.0, zk = 1.0;
    for (std::size_t k = 0; k < std::max(f.b.size(), f.a.size()); ++k) {
        if (k < f.b.size()) num += f.b[k] * zk;
        if (k < f.a.size()) den += f.a[k] * zk;
        zk *= zinv;
    }
    return std::abs(num / den);
}

std::vector<double> lfilter(const IirFilter& f, const std::vector<double>& x,
                            const std::vector<double>* zi) {
    const std::size_t M = f.a.size() - 1;
    std::vector<double> z(M, 0.0);
    if (zi) {
        if (zi->size() != M) throw ArgumentError("lfilter: zi size mismatch");
        z = *zi;
    }
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double xi = x[i];
        double yi = f.b[0] * xi + (M > 0 ? z[0] : 0.0);
        for (std::size_t k = 0; k + 1 < M; ++k)
            z[k] = f.b[k + 1] * xi + z[k + 1] - f.a[k + 1] * yi;
        if (M > 0) z[M - 1] = f.b[M] * xi - f.a[M] * yi;
        y[i] = yi;
    }
    return y;
}

std::vector<double> lfilter_zi(const IirFilter& f) {
    // Steady state of the direct form II transposed delays for constant unit
    // input: with y = H(1), the state recurrence telescopes backwards.
    const std::size_t M = f.a.size() - 1;
    double sb = std::accumulate(f.b.begin(), f.b.end(), 0.0);
    double sa = std::accumulate(f.a.begin(), f.a.end(), 0.0);
    double h1 = sb / sa;
    std::vector<double> zi(M, 0.0);
    if (M == 0) return zi;
    zi[M - 1] = f.b[M] - f.a[M] * h1;
    for (std::size_t k = M - 1; k-- > 0;) zi[k] = f.b[k + 1] - f.a[k + 1] * h1 + zi[k + 1];
    return zi;
}

std::vector<double> filtfilt(const IirFilter& f, const std::vector<double>& x) {
    const std::size_t pad = static_cast<std::size_t>(3 * f.order);
    if (x.size() <= pad)
        throw ArgumentError("filtfilt: input must be longer than 3*order samples");

    // Odd reflection keeps both value and slope continuous at the joints.
    std::vector<double> ext;
    ext.reserve(x.size() + 2 * pad);
    for (std::size_t i = 0; i < pad; ++i) ext.push_back(2.0 * x.front() - x[pad - i]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (std::size_t i = 0; i < pad; ++i) ext.push_back(2.0 * x.back() - x[x.size() - 2 - i]);

    std::vector<double> zi = lfilter_zi(f);
    std::vector<double> z0(zi.size());

    for (std::size_t i = 0; i < zi.size(); ++i) z0[i] = zi[i] * ext.front();
    std::vector<double> y = lfilter(f, ext, &z0);

    std::reverse(y.begin(), y.end());
    for (std::size_t i = 0; i < zi.size(); ++i) z0[i] = zi[i] * y.front();
    y = lfilter(f, y, &z0);
    std::reverse(y.begin(), y.end());

    return std::vector<double>(y.begin() + static_cast<long>(pad),
                               y.begin() + static_cast<long>(pad + x.size()));
}

// ---------------------------------------------------------------------------
// SWT
// ---------------------------------------------------------------------------

SwtDecomposition swt_decompose(const std::vector<double>& x, Wavelet wavelet, int levels,
                               SwtPadding padding) {
    if (levels < 1) throw ArgumentError("swt: levels must be >= 1");
    if (x.empty()) throw ArgumentError("swt: empty input");
    const WaveletBank& bank = wavelet_bank(wavelet);

    const std::size_t block = std::size_t{1} << levels;
    const std::size_t padded = (x.size() + block - 1) / block * block;
    const std::size_t pad_total = padded - x.size();
    const std::size_t pad_left = pad_total / 2;

    std::vector<double> a(padded);
    const long n = static_cast<long>(x.size());
    for (std::size_t i = 0; i < padded; ++i) {
        long src = static_cast<long>(i) - static_cast<long>(pad_left);
        if (padding == SwtPadding::Symmetric) {
            a[i] = x[symmetric_index(src, n)];
        } else {
            long m = src % n;
            if (m < 0) m += n;
            a[i] = x[static_cast<std::size_t>(m)];
        }
    }

    SwtDecomposition d;
    d.wavelet = wavelet;
    d.levels = levels;
    d.original_length = x.size();
    d.pad_left = pad_left;
    d.padding = padding;
    d.details.reserve(static_cast<std::size_t>(levels));
    for (int j = 1; j <= levels; ++j) {
        std::size_t stride = std::size_t{1} << (j - 1);
        d.details.push_back(atrous_conv(a, bank.dec_hi, stride));
        a = atrous_conv(a, bank.dec_lo, stride);
    }
    d.approx = std::move(a);
    return d;
}

std::vector<double> swt_reconstruct(const SwtDecomposition& d) {
    if (d.levels < 1 || d.details.size() != static_cast<std::size_t>(d.levels))
        throw ArgumentError("swt_reconstruct: inconsistent level count");
    const std::size_t padded = d.approx.size();
    for (const auto& band : d.details)
        if (band.size() != padded)
            throw ArgumentError("swt_reconstruct: inconsistent band lengths");
    if (d.original_length == 0 || d.original_length > padded)
        throw ArgumentError("swt_reconstruct: bad original length");

    const WaveletBank& bank = wavelet_bank(d.wavelet);
    std::vector<double> a = d.approx;
    for (int j = d.levels; j >= 1; --j) {
        std::size_t stride = std::size_t{1} << (j - 1);
        std::vector<double> lo = atrous_corr(a, bank.dec_lo, stride);
        std::vector<double> hi = atrous_corr(d.details[static_cast<std::size_t>(j - 1)],
                                             bank.dec_hi, stride);
        for (std::size_t i = 0; i < padded; ++i) a[i] = 0.5 * (lo[i] + hi[i]);
    }
    return std::vector<double>(a.begin() + static_cast<long>(d.pad_left),
                               a.begin() + static_cast<long>(d.pad_left + d.original_length));
}

double soft_threshold(double c, double t) {
    double mag = std::abs(c) - t;
    if (mag <= 0.0) return 0.0;
    return c < 0.0 ? -mag : mag;
}

std::vector<double> wavelet_denoise(const std::vector<double>& x, Wavelet wavelet, int levels) {
    SwtDecomposition d = swt_decompose(x, wavelet, levels);
    std::vector<double> abs_d1(d.details[0].size());
    for (std::size_t i = 0; i < abs_d1.size(); ++i) abs_d1[i] = std::abs(d.details[0][i]);
    double sigma = median_of(abs_d1) / 0.6745;
    double t = sigma * std::sqrt(2.0 * std::log(static_cast<double>(d.approx.size())));
    for (auto& band : d.details)
        for (double& c : band) c = soft_threshold(c, t);
    return swt_reconstruct(d);
}

// ---------------------------------------------------------------------------
// Resampling
// ---------------------------------------------------------------------------

double bessel_i0(double x) {
    // Power series: I0(x) = sum ((x/2)^k / k!)^2; converges fast for the
    // window arguments used here (|x| <= beta = 8.6).
    double term = 1.0, sum = 1.0;
    double half = 0.5 * x;
    for (int k = 1; k < 64; ++k) {
        term *= half / k;
        double sq = term * term;
        sum += sq;
        if (sq < sum * 1e-18) break;
    }
    return sum;
}

std::vector<double> resample_rational(const std::vector<double>& x, int up, int down,
                                      double /*rate_in_hz*/) {
    if (up < 1 || down < 1) throw ArgumentError("resample: factors must be >= 1");
    if (std::gcd(up, down) != 1) throw ArgumentError("resample: up/down must be coprime");
    if (x.empty()) return {};
    if (up == 1 && down == 1) return x;

    const int L = 10 * std::max(up, down) + 1;
    const int M = (L - 1) / 2;  // group delay of the symmetric FIR
    const double beta = 8.6;
    const double cutoff = 1.0 / std::max(up, down);  // of Nyquist at the upsampled rate

    std::vector<double> h(static_cast<std::size_t>(L));
    const double denom = bessel_i0(beta);
    for (int k = 0; k < L; ++k) {
        double m = k - M;
        double sinc = (m == 0.0) ? cutoff : std::sin(M_PI * cutoff * m) / (M_PI * m);
        double r = 2.0 * k / (L - 1.0) - 1.0;
        double w = bessel_i0(beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / denom;
        h[static_cast<std::size_t>(k)] = static_cast<double>(up) * sinc * w;
    }

    const long n = static_cast<long>(x.size());
    const long out_n = (n * up + down - 1) / down;  // ceil(n*up/down)
    // Reflect (no edge repeat) extension covers the filter span at the edges.
    auto sample = [&](long i) -> double {
        if (i >= 0 && i < n) return x[static_cast<std::size_t>(i)];
        if (n == 1) return x[0];
        long period = 2 * (n - 1);
        long m = i % period;
        if (m < 0) m += period;
        if (m >= n) m = period - m;
        return x[static_cast<std::size_t>(m)];
    };

    std::vector<double> y(static_cast<std::size_t>(out_n), 0.0);
    for (long out = 0; out < out_n; ++out) {
        // Position in the zero-stuffed grid, group delay compensated.
        const long q = out * down + M;
        // Only taps hitting nonzero (stuffed) samples contribute:
        // q - k == up * t  =>  k == q mod up (mod up).
        long k0 = q % up;
        double acc = 0.0;
        for (long k = k0; k < L; k += up) {
            long t = (q - k) / up;
            acc += h[static_cast<std::size_t>(k)] * sample(t);
        }
        y[static_cast<std::size_t>(out)] = acc;
    }
    return y;
}

}  // namespace ecg::dsp
