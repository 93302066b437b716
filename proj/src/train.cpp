#include "ecg/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

namespace ecg::train {

std::vector<std::vector<int>> make_batches(const std::vector<int>& lengths, int batch_size,
                                           std::uint64_t seed) {
    if (lengths.empty()) throw ArgumentError("make_batches: empty input");
    if (batch_size < 1) throw ArgumentError("make_batches: batch size must be >= 1");
    for (int len : lengths)
        if (len < 1) throw ArgumentError("make_batches: non-positive segment length");

    std::vector<int> order(lengths.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed ^ 0x5eedba7cULL);
    rng.shuffle(order);
    // Stable sort by length keeps the shuffled order within equal lengths, so
    // the seed still controls batch composition.
    std::stable_sort(order.begin(), order.end(), [&lengths](int a, int b) {
        return lengths[static_cast<std::size_t>(a)] < lengths[static_cast<std::size_t>(b)];
    });

    // Buckets: extend while the running max/min ratio stays within 1.25.
    std::vector<std::vector<int>> batches;
    std::size_t start = 0;
    while (start < order.size()) {
        const double lo = lengths[static_cast<std::size_t>(order[start])];
        std::size_t end = start;
        while (end < order.size() &&
               lengths[static_cast<std::size_t>(order[end])] <= 1.25 * lo)
            ++end;
        for (std::size_t i = start; i < end; i += static_cast<std::size_t>(batch_size)) {
            std::size_t j = std::min(end, i + static_cast<std::size_t>(batch_size));
            batches.emplace_back(order.begin() + static_cast<long>(i),
                                 order.begin() + static_cast<long>(j));
        }
        start = end;
    }
    rng.shuffle(batches);
    return batches;
}

std::vector<TrainItem> augment(const std::vector<SegmentPair>& pairs, bool enabled,
                               int* missing_raw_count) {
    int missing = 0;
    std::vector<TrainItem> out;
    out.reserve(pairs.size() * (enabled ? 2 : 1));
    for (const auto& p : pairs) out.push_back(p.preprocessed);
    if (enabled) {
        for (const auto& p : pairs) {
            if (p.raw)
                out.push_back(*p.raw);
            else
                ++missing;
        }
    }
    if (missing_raw_count) *missing_raw_count = missing;
    return out;
}

namespace {

double tensor_global_norm(const net::Gradients<float>& g) {
    double sq = 0.0;
    for (const auto* t : g.tensors()) sq += static_cast<double>(t->squaredNorm());
    return std::sqrt(sq);
}

std::vector<int> item_lengths(const std::vector<TrainItem>& items) {
    std::vector<int> lens;
    lens.reserve(items.size());
    for (const auto& it : items) lens.push_back(static_cast<int>(it.samples.cols()));
    return lens;
}

}  // namespace

double segment_accuracy(const net::ModelState<float>& model, const std::vector<TrainItem>& items,
                        int batch_size) {
    if (items.empty()) throw ArgumentError("segment_accuracy: empty item list");
    // Fixed-seed batching: composition is irrelevant to accuracy, batching
    // only amortizes the forward passes.
    auto batches = make_batches(item_lengths(items), batch_size, 0);
    long correct = 0;
    for (const auto& batch : batches) {
        std::vector<const Eigen::MatrixXf*> segs;
        segs.reserve(batch.size());
        for (int idx : batch) segs.push_back(&items[static_cast<std::size_t>(idx)].samples);
        auto cache = net::forward_batch(model, net::make_batch<float>(segs), false);
        for (std::size_t e = 0; e < batch.size(); ++e) {
            int pred = 0;
            cache.probs.col(static_cast<long>(e)).maxCoeff(&pred);
            if (pred == ordinal(items[static_cast<std::size_t>(batch[e])].label)) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(items.size());
}

TrainResult train(net::ModelState<float> model, const std::vector<TrainItem>& train_items,
                  const std::vector<TrainItem>& val_items, const TrainConfig& config,
                  std::ostream* log) {
    if (train_items.empty()) throw ArgumentError("train: empty training set");
    if (val_items.empty()) throw ArgumentError("train: empty validation set");
    if (config.batch_size < 1 || config.patience < 1 || config.max_epochs < 1)
        throw ArgumentError("train: bad config");
    {
        bool multi_class = false;
        for (const auto& it : train_items)
            if (it.label != train_items.front().label) {
                multi_class = true;
                break;
            }
        if (!multi_class) throw ArgumentError("train: need at least 2 classes in training data");
    }

    if (!config.dropout) model.config.dropout_prob = 0.0;
    model.train_mode = true;
    AdamState<float> opt = make_adam(model, config.learning_rate, config.beta1, config.beta2,
                                     config.epsilon);
    Rng seeder(config.seed);
    Rng dropout_rng(seeder.derive(0xd20b0d70ULL));

    const auto lens = item_lengths(train_items);

    TrainResult result;
    result.best_state = model;
    int epochs_since_best = 0;

    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        auto batches = make_batches(lens, config.batch_size,
                                    seeder.derive(0xe90c0000ULL + static_cast<std::uint64_t>(epoch)));

        double loss_sum = 0.0;
        long loss_count = 0;
        for (const auto& batch : batches) {
            std::vector<const Eigen::MatrixXf*> segs;
            std::vector<ClassLabel> labels;
            segs.reserve(batch.size());
            labels.reserve(batch.size());
            for (int idx : batch) {
                segs.push_back(&train_items[static_cast<std::size_t>(idx)].samples);
                labels.push_back(train_items[static_cast<std::size_t>(idx)].label);
            }
            auto cache = net::forward_batch(model, net::make_batch<float>(segs), true,
                                            &dropout_rng);
            const double loss = net::batch_loss(cache, labels);
            if (!std::isfinite(loss)) {
                std::ostringstream msg;
                msg << "train: loss diverged (non-finite) at epoch " << epoch << ", batch with "
                    << batch.size() << " elements";
                throw NumericError(msg.str());
            }
            loss_sum += loss * static_cast<double>(batch.size());
            loss_count += static_cast<long>(batch.size());

            auto grads = net::backward_batch(model, cache, labels);
            if (config.grad_clip > 0.0) {
                const double norm = tensor_global_norm(grads);
                if (norm > config.grad_clip) {
                    const float scale = static_cast<float>(config.grad_clip / norm);
                    for (auto* t : grads.tensors()) *t *= scale;
                }
            }
            adam_step(model, grads, opt);
        }
        const double mean_loss = loss_sum / static_cast<double>(loss_count);

        model.train_mode = false;
        const double val_acc = segment_accuracy(model, val_items, config.batch_size);
        model.train_mode = true;

        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.history.push_back({epoch, mean_loss, val_acc, seconds});
        if (log)
            *log << epoch << ',' << mean_loss << ',' << val_acc << ',' << seconds << '\n';

        if (val_acc > result.best_val_accuracy || result.best_epoch < 0) {
            result.best_val_accuracy = val_acc;
            result.best_epoch = epoch;
            result.best_state = model;
            epochs_since_best = 0;
        } else {
            ++epochs_since_best;
            if (epochs_since_best >= config.patience) break;
        }
    }

    result.best_state.train_mode = false;
    return result;
}

}  // namespace ecg::train
