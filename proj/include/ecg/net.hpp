#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "ecg/common.hpp"
#include "ecg/core.hpp"

namespace ecg::net {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

struct ModelConfig {
    int input_dim = 12;
    int hidden_dim = 100;
    int class_count = 9;
    double dropout_prob = 0.5;
    // The backward stream's readout: true reads it at input step 1 (its final
    // processing step, having seen the whole sequence); false reads it at the
    // input's last step (its first processing step).
    bool backward_readout_at_start = true;
};

// One direction of one LSTM layer. Gate order in the stacked 4H rows is
// fixed: input i, forget f, cell candidate g, output o.
template <typename T>
struct LstmParams {
    Mat<T> W;  // 4H x in_dim
    Mat<T> U;  // 4H x H
    Mat<T> b;  // 4H x 1
};

template <typename T>
struct ModelState {
    ModelConfig config;
    LstmParams<T> l1f, l1b, l2f, l2b;
    Mat<T> head_W;  // class_count x 2H
    Mat<T> head_b;  // class_count x 1
    bool train_mode = false;
    std::uint64_t dropout_seed = 0;

    static constexpr int kTensorCount = 14;

    std::array<Mat<T>*, kTensorCount> tensors() {
        return {&l1f.W, &l1f.U, &l1f.b, &l1b.W, &l1b.U, &l1b.b,
                &l2f.W, &l2f.U, &l2f.b, &l2b.W, &l2b.U, &l2b.b,
                &head_W, &head_b};
    }
    std::array<const Mat<T>*, kTensorCount> tensors() const {
        return {&l1f.W, &l1f.U, &l1f.b, &l1b.W, &l1b.U, &l1b.b,
                &l2f.W, &l2f.U, &l2f.b, &l2b.W, &l2b.U, &l2b.b,
                &head_W, &head_b};
    }
};

inline const std::array<const char*, ModelState<float>::kTensorCount>& tensor_names() {
    static const std::array<const char*, ModelState<float>::kTensorCount> names = {
        "l1f.W", "l1f.U", "l1f.b", "l1b.W", "l1b.U", "l1b.b",
        "l2f.W", "l2f.U", "l2f.b", "l2b.W", "l2b.U", "l2b.b",
        "head.W", "head.b"};
    return names;
}

template <typename T>
struct Gradients {
    LstmParams<T> l1f, l1b, l2f, l2b;
    Mat<T> head_W, head_b;

    std::array<Mat<T>*, ModelState<T>::kTensorCount> tensors() {
        return {&l1f.W, &l1f.U, &l1f.b, &l1b.W, &l1b.U, &l1b.b,
                &l2f.W, &l2f.U, &l2f.b, &l2b.W, &l2b.U, &l2b.b,
                &head_W, &head_b};
    }
    std::array<const Mat<T>*, ModelState<T>::kTensorCount> tensors() const {
        return {&l1f.W, &l1f.U, &l1f.b, &l1b.W, &l1b.U, &l1b.b,
                &l2f.W, &l2f.U, &l2f.b, &l2b.W, &l2b.U, &l2b.b,
                &head_W, &head_b};
    }
};

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

// He scheme: every weight entry ~ N(0, 2/fan_in) with fan_in the number of
// input units of that matrix (columns); biases exactly zero. Deterministic
// in the seed.
template <typename T>
ModelState<T> he_init(const ModelConfig& config, std::uint64_t seed) {
    if (config.hidden_dim < 1 || config.class_count < 2 || config.input_dim < 1)
        throw ArgumentError("he_init: bad model dimensions");
    if (!(config.dropout_prob >= 0.0 && config.dropout_prob < 1.0))
        throw ArgumentError("he_init: dropout_prob must be in [0, 1)");

    const int H = config.hidden_dim;
    ModelState<T> s;
    s.config = config;
    s.dropout_seed = seed;
    Rng rng(seed ^ 0x8e51ab7c91335a4bULL);

    auto gaussian_fill = [&rng](Mat<T>& m, long rows, long cols) {
        m.resize(rows, cols);
        T scale = static_cast<T>(std::sqrt(2.0 / static_cast<double>(cols)));
        for (long c = 0; c < cols; ++c)
            for (long r = 0; r < rows; ++r) m(r, c) = scale * static_cast<T>(rng.next_gaussian());
    };
    auto init_lstm = [&](LstmParams<T>& p, int in_dim) {
        gaussian_fill(p.W, 4L * H, in_dim);
        gaussian_fill(p.U, 4L * H, H);
        p.b = Mat<T>::Zero(4L * H, 1);
    };
    init_lstm(s.l1f, config.input_dim);
    init_lstm(s.l1b, config.input_dim);
    init_lstm(s.l2f, H);
    init_lstm(s.l2b, H);
    gaussian_fill(s.head_W, config.class_count, 2L * H);
    s.head_b = Mat<T>::Zero(config.class_count, 1);
    return s;
}

template <typename T>
Gradients<T> zero_gradients(const ModelState<T>& s) {
    Gradients<T> g;
    auto src = s.tensors();
    auto dst = g.tensors();
    for (int i = 0; i < ModelState<T>::kTensorCount; ++i)
        *dst[static_cast<std::size_t>(i)] =
            Mat<T>::Zero(src[static_cast<std::size_t>(i)]->rows(),
                         src[static_cast<std::size_t>(i)]->cols());
    return g;
}

// ---------------------------------------------------------------------------
// Batched sequences
// ---------------------------------------------------------------------------

// A padded batch: step t holds an input_dim x batch matrix; element e is
// valid for t < lens[e] and zero-padded beyond.
template <typename T>
struct Batch {
    std::vector<Mat<T>> x;  // max_len entries, each input_dim x batch
    std::vector<int> lens;

    int batch_size() const { return static_cast<int>(lens.size()); }
    int max_len() const { return static_cast<int>(x.size()); }
};

// Build a batch from float segment matrices (12 x T each).
template <typename T>
Batch<T> make_batch(const std::vector<const Eigen::MatrixXf*>& segments) {
    if (segments.empty()) throw ArgumentError("make_batch: empty batch");
    Batch<T> b;
    int max_len = 0;
    const long in_dim = segments.front()->rows();
    for (const auto* s : segments) {
        if (s->rows() != in_dim) throw ArgumentError("make_batch: inconsistent input dims");
        if (s->cols() < 1) throw ArgumentError("make_batch: empty segment");
        b.lens.push_back(static_cast<int>(s->cols()));
        max_len = std::max(max_len, static_cast<int>(s->cols()));
    }
    const int B = static_cast<int>(segments.size());
    b.x.assign(static_cast<std::size_t>(max_len), Mat<T>::Zero(in_dim, B));
    for (int e = 0; e < B; ++e)
        for (int t = 0; t < b.lens[static_cast<std::size_t>(e)]; ++t)
            b.x[static_cast<std::size_t>(t)].col(e) =
                segments[static_cast<std::size_t>(e)]->col(t).template cast<T>();
    return b;
}

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
struct LstmTrace {
    // Per processing step (in processing order), all H x B:
    std::vector<Mat<T>> i, f, g, o, c, tanh_c, h;
};

template <typename T>
struct ValidMask {
    // valid(t) as a 1 x B row of 0/1 for input step t.
    std::vector<Eigen::Matrix<T, 1, Eigen::Dynamic>> rows;
};

}  // namespace detail

template <typename T>
struct ForwardCache {
    Batch<T> input;
    detail::LstmTrace<T> l1f, l1b, l2f, l2b;
    std::vector<Mat<T>> fused;          // after dropout, layer-2 input, per step
    std::vector<Mat<T>> fused_mask;     // dropout scale masks (empty if off)
    Mat<T> concat;                      // 2H x B, before dropout
    Mat<T> concat_mask;                 // empty if off
    Mat<T> concat_dropped;              // head input
    Mat<T> scores;                      // C x B
    Mat<T> log_probs;                   // C x B
    Mat<T> probs;                       // C x B
    detail::ValidMask<T> valid;
    bool train_mode = false;
};

namespace detail {

template <typename T>
inline T sigmoid(T v) {
    return static_cast<T>(1) / (static_cast<T>(1) + std::exp(-v));
}

// Run one direction of one layer over the batch. `inputs` are per input step;
// `reverse` runs processing steps from the last input step to the first.
// Invalid (padded) positions keep h = c = 0, so a reverse stream effectively
// starts at each element's own last valid step.
template <typename T>
LstmTrace<T> run_lstm(const LstmParams<T>& p, const std::vector<Mat<T>>& inputs,
                      const ValidMask<T>& valid, bool reverse) {
    const int Tn = static_cast<int>(inputs.size());
    const int B = static_cast<int>(inputs.front().cols());
    const int H = static_cast<int>(p.U.cols());

    // One big GEMM for the input contribution of every step.
    Mat<T> x_all(inputs.front().rows(), static_cast<long>(Tn) * B);
    for (int t = 0; t < Tn; ++t) x_all.middleCols(static_cast<long>(t) * B, B) = inputs[static_cast<std::size_t>(t)];
    Mat<T> wx_all = p.W * x_all;

    LstmTrace<T> tr;
    auto alloc = [&](std::vector<Mat<T>>& v) { v.assign(static_cast<std::size_t>(Tn), Mat<T>()); };
    alloc(tr.i); alloc(tr.f); alloc(tr.g); alloc(tr.o);
    alloc(tr.c); alloc(tr.tanh_c); alloc(tr.h);

    Mat<T> h_prev = Mat<T>::Zero(H, B);
    Mat<T> c_prev = Mat<T>::Zero(H, B);
    for (int s = 0; s < Tn; ++s) {
        const int t = reverse ? Tn - 1 - s : s;
        Mat<T> gates = wx_all.middleCols(static_cast<long>(t) * B, B) + p.U * h_prev;
        gates.colwise() += p.b.col(0);

        auto& i = tr.i[static_cast<std::size_t>(t)];
        auto& f = tr.f[static_cast<std::size_t>(t)];
        auto& g = tr.g[static_cast<std::size_t>(t)];
        auto& o = tr.o[static_cast<std::size_t>(t)];
        i = gates.topRows(H).unaryExpr([](T v) { return sigmoid(v); });
        f = gates.middleRows(H, H).unaryExpr([](T v) { return sigmoid(v); });
        g = gates.middleRows(2 * H, H).array().tanh();
        o = gates.bottomRows(H).unaryExpr([](T v) { return sigmoid(v); });

        Mat<T> c = (f.array() * c_prev.array() + i.array() * g.array()).matrix();
        // Mask padded positions so state never leaks across the pad boundary.
        const auto& vrow = valid.rows[static_cast<std::size_t>(t)];
        c.array().rowwise() *= vrow.array();
        Mat<T> tanh_c = c.array().tanh().matrix();
        Mat<T> h = (o.array() * tanh_c.array()).matrix();
        h.array().rowwise() *= vrow.array();

        tr.c[static_cast<std::size_t>(t)] = c;
        tr.tanh_c[static_cast<std::size_t>(t)] = tanh_c;
        tr.h[static_cast<std::size_t>(t)] = h;
        h_prev = h;
        c_prev = c;
    }
    return tr;
}

// BPTT for one direction. d_h_extra[t] is the gradient arriving at h_t from
// outside the recurrence (fusion, readout). Returns parameter gradients and,
// optionally, the gradient w.r.t. the inputs.
template <typename T>
void backward_lstm(const LstmParams<T>& p, const std::vector<Mat<T>>& inputs,
                   const LstmTrace<T>& tr, const ValidMask<T>& valid, bool reverse,
                   const std::vector<Mat<T>>& d_h_extra, LstmParams<T>& grad,
                   std::vector<Mat<T>>* d_inputs) {
    const int Tn = static_cast<int>(inputs.size());
    const int B = static_cast<int>(inputs.front().cols());
    const int H = static_cast<int>(p.U.cols());

    Mat<T> dG_all = Mat<T>::Zero(4L * H, static_cast<long>(Tn) * B);
    Mat<T> dh_carry = Mat<T>::Zero(H, B);
    Mat<T> dc_carry = Mat<T>::Zero(H, B);

    // Walk processing steps backwards: s = Tn-1 .. 0.
    for (int s = Tn - 1; s >= 0; --s) {
        const int t = reverse ? Tn - 1 - s : s;
        const auto& vrow = valid.rows[static_cast<std::size_t>(t)];

        Mat<T> dh = d_h_extra[static_cast<std::size_t>(t)] + dh_carry;
        dh.array().rowwise() *= vrow.array();  // h was masked; so is its gradient

        const auto& i = tr.i[static_cast<std::size_t>(t)];
        const auto& f = tr.f[static_cast<std::size_t>(t)];
        const auto& g = tr.g[static_cast<std::size_t>(t)];
        const auto& o = tr.o[static_cast<std::size_t>(t)];
        const auto& tanh_c = tr.tanh_c[static_cast<std::size_t>(t)];

        Mat<T> do_ = (dh.array() * tanh_c.array()).matrix();
        Mat<T> dc = (dh.array() * o.array() * (1 - tanh_c.array().square())).matrix() + dc_carry;
        dc.array().rowwise() *= vrow.array();

        // c_prev / h_prev are the previous *processing* step's values.
        const int prev_s = s - 1;
        const Mat<T>* c_prev = nullptr;
        if (prev_s >= 0) {
            const int pt = reverse ? Tn - 1 - prev_s : prev_s;
            c_prev = &tr.c[static_cast<std::size_t>(pt)];
        }

        Mat<T> di = (dc.array() * g.array()).matrix();
        Mat<T> dg = (dc.array() * i.array()).matrix();
        Mat<T> df = Mat<T>::Zero(H, B);
        if (c_prev) df = (dc.array() * c_prev->array()).matrix();
        dc_carry = (dc.array() * f.array()).matrix();

        auto dgates = dG_all.middleCols(static_cast<long>(t) * B, B);
        dgates.topRows(H) = (di.array() * i.array() * (1 - i.array())).matrix();
        dgates.middleRows(H, H) = (df.array() * f.array() * (1 - f.array())).matrix();
        dgates.middleRows(2 * H, H) = (dg.array() * (1 - g.array().square())).matrix();
        dgates.bottomRows(H) = (do_.array() * o.array() * (1 - o.array())).matrix();

        dh_carry = p.U.transpose() * dgates;
    }

    // Parameter gradients as single GEMMs over the stacked steps.
    Mat<T> x_all(inputs.front().rows(), static_cast<long>(Tn) * B);
    Mat<T> h_prev_all = Mat<T>::Zero(H, static_cast<long>(Tn) * B);
    for (int s = 0; s < Tn; ++s) {
        const int t = reverse ? Tn - 1 - s : s;
        x_all.middleCols(static_cast<long>(t) * B, B) = inputs[static_cast<std::size_t>(t)];
        if (s > 0) {
            const int pt = reverse ? Tn - 1 - (s - 1) : s - 1;
            h_prev_all.middleCols(static_cast<long>(t) * B, B) = tr.h[static_cast<std::size_t>(pt)];
        }
    }
    grad.W = dG_all * x_all.transpose();
    grad.U = dG_all * h_prev_all.transpose();
    grad.b = dG_all.rowwise().sum();

    if (d_inputs) {
        Mat<T> dx_all = p.W.transpose() * dG_all;
        d_inputs->assign(static_cast<std::size_t>(Tn), Mat<T>());
        for (int t = 0; t < Tn; ++t)
            (*d_inputs)[static_cast<std::size_t>(t)] = dx_all.middleCols(static_cast<long>(t) * B, B);
    }
}

template <typename T>
Mat<T> dropout_mask(long rows, long cols, double p, Rng& rng) {
    Mat<T> m(rows, cols);
    const T scale = static_cast<T>(1.0 / (1.0 - p));
    for (long c = 0; c < cols; ++c)
        for (long r = 0; r < rows; ++r) m(r, c) = rng.next_double() >= p ? scale : static_cast<T>(0);
    return m;
}

}  // namespace detail

// Single LSTM cell step (reference path for tests and hand checks).
template <typename T>
std::pair<Vec<T>, Vec<T>> lstm_cell_step(const LstmParams<T>& p, const Vec<T>& x_t,
                                         const Vec<T>& h_prev, const Vec<T>& c_prev) {
    const int H = static_cast<int>(p.U.cols());
    if (x_t.rows() != p.W.cols() || h_prev.rows() != H || c_prev.rows() != H)
        throw ArgumentError("lstm_cell_step: shape mismatch");
    if (!x_t.allFinite() || !h_prev.allFinite() || !c_prev.allFinite())
        throw NumericError("lstm_cell_step: non-finite input");
    Vec<T> gates = p.W * x_t + p.U * h_prev + p.b.col(0);
    Vec<T> i = gates.head(H).unaryExpr([](T v) { return detail::sigmoid(v); });
    Vec<T> f = gates.segment(H, H).unaryExpr([](T v) { return detail::sigmoid(v); });
    Vec<T> g = gates.segment(2 * H, H).array().tanh();
    Vec<T> o = gates.tail(H).unaryExpr([](T v) { return detail::sigmoid(v); });
    Vec<T> c = (f.array() * c_prev.array() + i.array() * g.array()).matrix();
    Vec<T> h = (o.array() * c.array().tanh()).matrix();
    return {h, c};
}

// Batched forward pass. In train mode with dropout_prob > 0, `dropout_rng`
// must be provided; masks are recorded in the cache for backward.
template <typename T>
ForwardCache<T> forward_batch(const ModelState<T>& s, Batch<T> batch, bool train_mode,
                              Rng* dropout_rng = nullptr) {
    const int B = batch.batch_size();
    const int Tn = batch.max_len();
    const int H = s.config.hidden_dim;
    if (Tn < 1 || B < 1) throw ArgumentError("forward: empty input");
    for (int e = 0; e < B; ++e)
        if (batch.lens[static_cast<std::size_t>(e)] < 1 ||
            batch.lens[static_cast<std::size_t>(e)] > Tn)
            throw ArgumentError("forward: bad element length");
    for (const auto& xt : batch.x)
        if (!xt.allFinite()) throw NumericError("forward: non-finite input");

    const bool use_dropout = train_mode && s.config.dropout_prob > 0.0;
    if (use_dropout && !dropout_rng)
        throw ArgumentError("forward: train-mode dropout needs an RNG");

    ForwardCache<T> cache;
    cache.train_mode = train_mode;
    cache.valid.rows.resize(static_cast<std::size_t>(Tn));
    for (int t = 0; t < Tn; ++t) {
        Eigen::Matrix<T, 1, Eigen::Dynamic> row(1, B);
        for (int e = 0; e < B; ++e)
            row(0, e) = t < batch.lens[static_cast<std::size_t>(e)] ? static_cast<T>(1)
                                                                    : static_cast<T>(0);
        cache.valid.rows[static_cast<std::size_t>(t)] = std::move(row);
    }

    cache.l1f = detail::run_lstm(s.l1f, batch.x, cache.valid, false);
    cache.l1b = detail::run_lstm(s.l1b, batch.x, cache.valid, true);

    // Hadamard fusion of the two layer-1 streams, then dropout.
    cache.fused.resize(static_cast<std::size_t>(Tn));
    if (use_dropout) cache.fused_mask.resize(static_cast<std::size_t>(Tn));
    for (int t = 0; t < Tn; ++t) {
        Mat<T> fused = (cache.l1f.h[static_cast<std::size_t>(t)].array() *
                        cache.l1b.h[static_cast<std::size_t>(t)].array())
                           .matrix();
        if (use_dropout) {
            Mat<T> mask = detail::dropout_mask<T>(H, B, s.config.dropout_prob, *dropout_rng);
            fused = (fused.array() * mask.array()).matrix();
            cache.fused_mask[static_cast<std::size_t>(t)] = std::move(mask);
        }
        cache.fused[static_cast<std::size_t>(t)] = std::move(fused);
    }

    cache.l2f = detail::run_lstm(s.l2f, cache.fused, cache.valid, false);
    cache.l2b = detail::run_lstm(s.l2b, cache.fused, cache.valid, true);

    // Readout: forward stream at each element's last valid step, backward
    // stream at step 1 (or the literal last step when configured so).
    cache.concat.resize(2L * H, B);
    for (int e = 0; e < B; ++e) {
        const int last = batch.lens[static_cast<std::size_t>(e)] - 1;
        cache.concat.col(e).head(H) = cache.l2f.h[static_cast<std::size_t>(last)].col(e);
        const int bw_step = s.config.backward_readout_at_start ? 0 : last;
        cache.concat.col(e).tail(H) = cache.l2b.h[static_cast<std::size_t>(bw_step)].col(e);
    }

    cache.concat_dropped = cache.concat;
    if (use_dropout) {
        cache.concat_mask = detail::dropout_mask<T>(2L * H, B, s.config.dropout_prob, *dropout_rng);
        cache.concat_dropped = (cache.concat.array() * cache.concat_mask.array()).matrix();
    }

    cache.scores = s.head_W * cache.concat_dropped;
    cache.scores.colwise() += s.head_b.col(0);

    // Log-space softmax.
    cache.log_probs.resize(cache.scores.rows(), B);
    for (int e = 0; e < B; ++e) {
        T mx = cache.scores.col(e).maxCoeff();
        T lse = std::log(static_cast<T>((cache.scores.col(e).array() - mx).exp().sum())) + mx;
        cache.log_probs.col(e) = cache.scores.col(e).array() - lse;
    }
    cache.probs = cache.log_probs.array().exp();
    cache.input = std::move(batch);
    return cache;
}

// Convenience single-segment forward: probabilities for a 12 x T input.
template <typename T>
Vec<T> forward_probs(const ModelState<T>& s, const Eigen::MatrixXf& segment, bool train_mode,
                     Rng* dropout_rng = nullptr) {
    std::vector<const Eigen::MatrixXf*> one{&segment};
    ForwardCache<T> cache = forward_batch(s, make_batch<T>(one), train_mode, dropout_rng);
    return cache.probs.col(0);
}

// Cross-entropy of an already-computed probability vector.
template <typename T>
double cross_entropy(const Vec<T>& probs, ClassLabel truth) {
    int idx = ordinal(truth);
    if (idx >= probs.rows()) throw ArgumentError("cross_entropy: label out of range");
    return -std::log(static_cast<double>(probs(idx)));
}

// Mean cross-entropy of a batch, straight from the cached log-probabilities
// (log-sum-exp path, no re-exponentiation).
template <typename T>
double batch_loss(const ForwardCache<T>& cache, const std::vector<ClassLabel>& labels) {
    const int B = static_cast<int>(cache.probs.cols());
    if (static_cast<int>(labels.size()) != B)
        throw ArgumentError("batch_loss: label count mismatch");
    double total = 0.0;
    for (int e = 0; e < B; ++e) {
        const int idx = ordinal(labels[static_cast<std::size_t>(e)]);
        if (idx >= cache.log_probs.rows()) throw ArgumentError("batch_loss: label out of range");
        total -= static_cast<double>(cache.log_probs(idx, e));
    }
    return total / B;
}

// Gradients of the mean batch cross-entropy w.r.t. every parameter.
template <typename T>
Gradients<T> backward_batch(const ModelState<T>& s, const ForwardCache<T>& cache,
                            const std::vector<ClassLabel>& labels) {
    const int B = static_cast<int>(cache.probs.cols());
    const int Tn = cache.input.max_len();
    const int H = s.config.hidden_dim;
    if (static_cast<int>(labels.size()) != B)
        throw ArgumentError("backward: label count mismatch");
    if (cache.l1f.h.empty() || static_cast<int>(cache.l1f.h.size()) != Tn)
        throw ArgumentError("backward: stale or mismatched cache");
    const bool used_dropout = cache.train_mode && s.config.dropout_prob > 0.0;
    if (used_dropout && cache.fused_mask.empty())
        throw ArgumentError("backward: cache missing dropout masks");

    Gradients<T> grad;

    // Softmax + cross-entropy: dscore = (p - onehot) / B.
    Mat<T> dscores = cache.probs;
    for (int e = 0; e < B; ++e) {
        const int idx = ordinal(labels[static_cast<std::size_t>(e)]);
        if (idx >= dscores.rows()) throw ArgumentError("backward: label out of range");
        dscores(idx, e) -= 1;
    }
    dscores /= static_cast<T>(B);

    grad.head_W = dscores * cache.concat_dropped.transpose();
    grad.head_b = dscores.rowwise().sum();

    Mat<T> dconcat = s.head_W.transpose() * dscores;
    if (used_dropout) dconcat = (dconcat.array() * cache.concat_mask.array()).matrix();

    // Scatter the readout gradient into the per-step streams of layer 2.
    std::vector<Mat<T>> dh2f(static_cast<std::size_t>(Tn), Mat<T>::Zero(H, B));
    std::vector<Mat<T>> dh2b(static_cast<std::size_t>(Tn), Mat<T>::Zero(H, B));
    for (int e = 0; e < B; ++e) {
        const int last = cache.input.lens[static_cast<std::size_t>(e)] - 1;
        dh2f[static_cast<std::size_t>(last)].col(e) = dconcat.col(e).head(H);
        const int bw_step = s.config.backward_readout_at_start ? 0 : last;
        dh2b[static_cast<std::size_t>(bw_step)].col(e) += dconcat.col(e).tail(H);
    }

    std::vector<Mat<T>> dfused_f, dfused_b;
    detail::backward_lstm(s.l2f, cache.fused, cache.l2f, cache.valid, false, dh2f, grad.l2f,
                          &dfused_f);
    detail::backward_lstm(s.l2b, cache.fused, cache.l2b, cache.valid, true, dh2b, grad.l2b,
                          &dfused_b);

    // Through the fused-sequence dropout and the Hadamard product rule.
    std::vector<Mat<T>> dh1f(static_cast<std::size_t>(Tn));
    std::vector<Mat<T>> dh1b(static_cast<std::size_t>(Tn));
    for (int t = 0; t < Tn; ++t) {
        Mat<T> dfused = dfused_f[static_cast<std::size_t>(t)] + dfused_b[static_cast<std::size_t>(t)];
        if (used_dropout)
            dfused = (dfused.array() * cache.fused_mask[static_cast<std::size_t>(t)].array()).matrix();
        dh1f[static_cast<std::size_t>(t)] =
            (dfused.array() * cache.l1b.h[static_cast<std::size_t>(t)].array()).matrix();
        dh1b[static_cast<std::size_t>(t)] =
            (dfused.array() * cache.l1f.h[static_cast<std::size_t>(t)].array()).matrix();
    }

    detail::backward_lstm(s.l1f, cache.input.x, cache.l1f, cache.valid, false, dh1f, grad.l1f,
                          static_cast<std::vector<Mat<T>>*>(nullptr));
    detail::backward_lstm(s.l1b, cache.input.x, cache.l1b, cache.valid, true, dh1b, grad.l1b,
                          static_cast<std::vector<Mat<T>>*>(nullptr));
    return grad;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O (BLTM format), float states only
// ---------------------------------------------------------------------------

void save_model(const std::filesystem::path& path, const ModelState<float>& state);
ModelState<float> load_model(const std::filesystem::path& path);

}  // namespace ecg::net
