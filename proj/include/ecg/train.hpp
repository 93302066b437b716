#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include "ecg/core.hpp"
#include "ecg/net.hpp"

namespace ecg::train {

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

template <typename T>
struct AdamState {
    std::vector<net::Mat<T>> m, v;  // per-tensor moments, shapes match params
    long t = 0;
    double alpha = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

template <typename T>
AdamState<T> make_adam(const net::ModelState<T>& params, double alpha = 0.001,
                       double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8) {
    AdamState<T> s;
    s.alpha = alpha;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.epsilon = epsilon;
    for (const auto* p : params.tensors()) {
        s.m.push_back(net::Mat<T>::Zero(p->rows(), p->cols()));
        s.v.push_back(net::Mat<T>::Zero(p->rows(), p->cols()));
    }
    return s;
}

// One Adam update over every parameter tensor. A non-finite gradient refuses
// the whole step (parameters, moments, and t untouched).
template <typename T>
void adam_step(net::ModelState<T>& params, const net::Gradients<T>& grads, AdamState<T>& opt) {
    auto ps = params.tensors();
    auto gs = grads.tensors();
    if (opt.m.size() != ps.size() || opt.v.size() != ps.size())
        throw ArgumentError("adam_step: optimizer state shape mismatch");
    for (std::size_t i = 0; i < ps.size(); ++i) {
        if (gs[i]->rows() != ps[i]->rows() || gs[i]->cols() != ps[i]->cols())
            throw ArgumentError("adam_step: gradient shape mismatch");
        if (!gs[i]->allFinite()) throw NumericError("adam_step: non-finite gradient, step refused");
    }
    opt.t += 1;
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.t));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.t));
    for (std::size_t i = 0; i < ps.size(); ++i) {
        auto& m = opt.m[i];
        auto& v = opt.v[i];
        const auto& g = *gs[i];
        m = static_cast<T>(opt.beta1) * m + static_cast<T>(1.0 - opt.beta1) * g;
        v = (static_cast<T>(opt.beta2) * v.array() +
             static_cast<T>(1.0 - opt.beta2) * g.array().square())
                .matrix();
        net::Mat<T> m_hat = m / static_cast<T>(bc1);
        net::Mat<T> v_hat = v / static_cast<T>(bc2);
        ps[i]->array() -= static_cast<T>(opt.alpha) * m_hat.array() /
                          (v_hat.array().sqrt() + static_cast<T>(opt.epsilon));
    }
}

// ---------------------------------------------------------------------------
// Batching and augmentation
// ---------------------------------------------------------------------------

// One training example: a child segment already downsampled to the model
// rate, with its label.
struct TrainItem {
    Eigen::MatrixXf samples;  // 12 x T
    ClassLabel label = ClassLabel::Normal;
    bool preprocessed = false;
    std::string parent_id;
};

// A preprocessed segment and its raw counterpart (both at the model rate).
struct SegmentPair {
    TrainItem preprocessed;
    std::optional<TrainItem> raw;
};

// Deterministic length bucketing: shuffle by seed, stable-sort by length,
// split into buckets whose max/min length ratio stays <= 1.25, chunk each
// bucket into batches, shuffle the batch order. Returns index groups into
// `lengths`.
std::vector<std::vector<int>> make_batches(const std::vector<int>& lengths, int batch_size,
                                           std::uint64_t seed);

// Training set = preprocessed segments, plus their raw variants when
// augmentation is on. A missing raw counterpart is skipped and counted.
std::vector<TrainItem> augment(const std::vector<SegmentPair>& pairs, bool enabled,
                               int* missing_raw_count = nullptr);

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct TrainConfig {
    int batch_size = 32;
    int max_epochs = 50;
    int patience = 5;  // early stop on validation segment accuracy
    std::uint64_t seed = 0;
    bool dropout = true;
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double grad_clip = 1.0;  // global-norm clip; 0 disables
};

struct EpochStats {
    int epoch = 0;
    double mean_loss = 0.0;
    double val_accuracy = 0.0;
    double seconds = 0.0;
};

struct TrainResult {
    net::ModelState<float> best_state;
    std::vector<EpochStats> history;
    int best_epoch = -1;
    double best_val_accuracy = 0.0;
};

// Segment-level eval-mode accuracy of the model on `items`.
double segment_accuracy(const net::ModelState<float>& model, const std::vector<TrainItem>& items,
                        int batch_size = 32);

// Epoch loop: make_batches -> forward(train) -> mean loss -> backward ->
// adam_step; per-epoch validation segment accuracy with best-state keeping
// (strict improvement; ties keep the earlier epoch) and patience-based early
// stopping. Non-finite loss aborts with a diagnostic. If `log` is given, one
// line per epoch: `epoch,mean_loss,val_acc,seconds`.
TrainResult train(net::ModelState<float> model, const std::vector<TrainItem>& train_items,
                  const std::vector<TrainItem>& val_items, const TrainConfig& config,
                  std::ostream* log = nullptr);

}  // namespace ecg::train
