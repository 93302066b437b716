#include "ecg/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <thread>

#include "ecg/train.hpp"

namespace ecg::eval {

std::int64_t ConfusionMatrix::total() const {
    std::int64_t n = 0;
    for (const auto& row : counts)
        for (std::int64_t v : row) n += v;
    return n;
}

std::array<double, kClassCount> f1_per_class(const ConfusionMatrix& cm) {
    std::array<double, kClassCount> f1{};
    for (int i = 0; i < kClassCount; ++i) {
        std::int64_t denom = 0;
        for (int j = 0; j < kClassCount; ++j)
            denom += cm.counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] +
                     cm.counts[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
        const std::int64_t diag =
            cm.counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)];
        f1[static_cast<std::size_t>(i)] =
            denom == 0 ? 0.0 : 2.0 * static_cast<double>(diag) / static_cast<double>(denom);
    }
    return f1;
}

double f1_simple_mean(const std::array<double, kClassCount>& f1s) {
    double s = 0.0;
    for (double v : f1s) s += v;
    return s / kClassCount;
}

double f1_weighted_mean(const std::array<double, kClassCount>& f1s,
                        const std::array<std::int64_t, kClassCount>& class_counts) {
    std::int64_t total = 0;
    for (std::int64_t c : class_counts) {
        if (c < 0) throw ArgumentError("f1_weighted_mean: negative class count");
        total += c;
    }
    if (total == 0) throw ArgumentError("f1_weighted_mean: all class counts are zero");
    double s = 0.0;
    for (int i = 0; i < kClassCount; ++i)
        s += (static_cast<double>(class_counts[static_cast<std::size_t>(i)]) /
              static_cast<double>(total)) *
             f1s[static_cast<std::size_t>(i)];
    return s;
}

std::array<std::array<double, kClassCount>, kClassCount> row_normalize(const ConfusionMatrix& cm) {
    std::array<std::array<double, kClassCount>, kClassCount> out{};
    for (int i = 0; i < kClassCount; ++i) {
        std::int64_t row_sum = 0;
        for (int j = 0; j < kClassCount; ++j)
            row_sum += cm.counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        for (int j = 0; j < kClassCount; ++j)
            out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                row_sum == 0 ? 0.0
                             : static_cast<double>(cm.counts[static_cast<std::size_t>(i)]
                                                            [static_cast<std::size_t>(j)]) /
                                   static_cast<double>(row_sum);
    }
    return out;
}

// ---------------------------------------------------------------------------

Prediction predict_record(const net::ModelState<float>& model, const EcgRecording& recording,
                          const PredictConfig& config) {
    const auto [up, down] = pipeline::rate_ratio(recording.sampling_rate, config.target_rate_hz);

    std::vector<Eigen::MatrixXf> children;
    if (recording.duration_s() >= 2.0) {
        qrs::PeakList peaks = pipeline::detect_peaks(recording, false, config.qrs,
                                                     config.preprocess);
        std::vector<Segment> segments = segmenter::extract_segments(recording, peaks);
        children.reserve(segments.size());
        for (const auto& seg : segments)
            children.push_back(pipeline::resample_leads(seg.samples, up, down));
    }

    Prediction pred;
    if (children.empty()) {
        // Whole-record fallback, capped, flagged.
        const long cap = std::max<long>(
            8, std::lround(config.fallback_cap_s * recording.sampling_rate));
        const long n = std::min(recording.sample_count(), cap);
        children.push_back(pipeline::resample_leads(recording.samples.leftCols(n), up, down));
        pred.fallback = true;
    }
    pred.child_count = static_cast<int>(children.size());

    // Eval-mode probabilities for every child, batched by length.
    std::vector<int> child_label(children.size(), 0);
    std::vector<int> lens;
    lens.reserve(children.size());
    for (const auto& c : children) lens.push_back(static_cast<int>(c.cols()));
    for (const auto& group : train::make_batches(lens, config.batch_size, 0)) {
        std::vector<const Eigen::MatrixXf*> segs;
        segs.reserve(group.size());
        for (int idx : group) segs.push_back(&children[static_cast<std::size_t>(idx)]);
        auto cache = net::forward_batch(model, net::make_batch<float>(segs), false);
        for (std::size_t e = 0; e < group.size(); ++e) {
            int argmax = 0;
            cache.probs.col(static_cast<long>(e)).maxCoeff(&argmax);
            child_label[static_cast<std::size_t>(group[e])] = argmax;
            for (int c = 0; c < kClassCount; ++c)
                pred.prob_sums[static_cast<std::size_t>(c)] +=
                    static_cast<double>(cache.probs(c, static_cast<long>(e)));
        }
    }
    for (int lbl : child_label) pred.votes[static_cast<std::size_t>(lbl)] += 1;
    pred.label = resolve_vote(pred.votes, pred.prob_sums);
    return pred;
}

ClassLabel resolve_vote(const std::array<int, kClassCount>& votes,
                        const std::array<double, kClassCount>& prob_sums) {
    int best = 0;
    for (int c = 1; c < kClassCount; ++c) {
        const auto cu = static_cast<std::size_t>(c);
        const auto bu = static_cast<std::size_t>(best);
        if (votes[cu] > votes[bu] ||
            (votes[cu] == votes[bu] && prob_sums[cu] > prob_sums[bu]))
            best = c;
    }
    return class_from_ordinal(best);
}

// ---------------------------------------------------------------------------

void finalize_report(EvalReport& report) {
    report.f1 = f1_per_class(report.cm);
    report.simple_mean = f1_simple_mean(report.f1);
    report.class_counts = {};
    for (int i = 0; i < kClassCount; ++i)
        for (int j = 0; j < kClassCount; ++j)
            report.class_counts[static_cast<std::size_t>(i)] +=
                report.cm.counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    std::int64_t total = 0;
    for (std::int64_t c : report.class_counts) total += c;
    report.weighted_mean = total == 0 ? 0.0 : f1_weighted_mean(report.f1, report.class_counts);
    report.row_norm = row_normalize(report.cm);
}

EvalReport evaluate(const net::ModelState<float>& model, const DatasetIndex& index,
                    const PredictConfig& config, int threads) {
    std::vector<const DatasetEntry*> val;
    for (const auto& entry : index.entries)
        if (entry.split == Split::validation) val.push_back(&entry);
    if (val.empty()) throw ArgumentError("evaluate: validation split is empty");

    // Per-record work, stored by index so the reduction order (and therefore
    // the report) is independent of the thread count.
    struct Slot {
        bool ok = false;
        RecordOutcome outcome;
        std::string error;
    };
    std::vector<Slot> slots(val.size());
    auto work = [&](std::size_t i) {
        const DatasetEntry& entry = *val[i];
        try {
            EcgRecording rec = load_recording(entry.path);
            slots[i].outcome.record_id = entry.record_id;
            slots[i].outcome.truth = entry.labels.primary();
            slots[i].outcome.prediction = predict_record(model, rec, config);
            slots[i].ok = true;
        } catch (const std::exception& e) {
            slots[i].error = e.what();
        }
    };

    if (threads > 1) {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        const int n = std::min<int>(threads, static_cast<int>(val.size()));
        pool.reserve(static_cast<std::size_t>(n));
        for (int w = 0; w < n; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < slots.size(); i = next.fetch_add(1))
                    work(i);
            });
        for (auto& t : pool) t.join();
    } else {
        for (std::size_t i = 0; i < slots.size(); ++i) work(i);
    }

    EvalReport report;
    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (slots[i].ok) {
            report.cm.add(slots[i].outcome.truth, slots[i].outcome.prediction.label);
            report.records.push_back(std::move(slots[i].outcome));
        } else {
            report.failures.emplace_back(val[i]->record_id, slots[i].error);
        }
    }
    finalize_report(report);
    return report;
}

std::string format_report(const EvalReport& report) {
    std::ostringstream out;
    char buf[64];
    auto fmt = [&buf](double v) {
        std::snprintf(buf, sizeof buf, "%.6f", v);
        return std::string(buf);
    };

    out << "[metrics]\n";
    for (int i = 0; i < kClassCount; ++i)
        out << "f1." << to_string(class_from_ordinal(i)) << '='
            << fmt(report.f1[static_cast<std::size_t>(i)]) << '\n';
    out << "f1.simple_mean=" << fmt(report.simple_mean) << '\n';
    out << "f1.weighted_mean=" << fmt(report.weighted_mean) << '\n';
    out << "records.evaluated=" << report.records.size() << '\n';
    out << "records.failed=" << report.failures.size() << '\n';

    out << "[confusion]\n";
    for (int i = 0; i < kClassCount; ++i) {
        out << "counts." << to_string(class_from_ordinal(i)) << '=';
        for (int j = 0; j < kClassCount; ++j)
            out << (j ? "," : "")
                << report.cm.counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        out << '\n';
    }
    for (int i = 0; i < kClassCount; ++i) {
        out << "row_norm." << to_string(class_from_ordinal(i)) << '=';
        for (int j = 0; j < kClassCount; ++j)
            out << (j ? "," : "")
                << fmt(report.row_norm[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
        out << '\n';
    }

    out << "[records]\n";
    for (const auto& r : report.records) {
        out << r.record_id << ',' << to_string(r.truth) << ','
            << to_string(r.prediction.label) << ",votes=";
        for (int c = 0; c < kClassCount; ++c)
            out << (c ? "|" : "") << r.prediction.votes[static_cast<std::size_t>(c)];
        out << ",children=" << r.prediction.child_count
            << ",fallback=" << (r.prediction.fallback ? 1 : 0) << '\n';
    }
    for (const auto& [id, err] : report.failures) out << id << ",FAILED," << err << '\n';
    return out.str();
}

}  // namespace ecg::eval
