#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ecg/core.hpp"
#include "ecg/net.hpp"
#include "ecg/pipeline.hpp"
#include "ecg/qrs.hpp"
#include "ecg/segmenter.hpp"

namespace ecg::eval {

// ---------------------------------------------------------------------------
// Confusion matrix and F1 metrics
// ---------------------------------------------------------------------------

// counts[i][j] = records of true class i predicted as class j.
struct ConfusionMatrix {
    std::array<std::array<std::int64_t, kClassCount>, kClassCount> counts{};

    void add(ClassLabel truth, ClassLabel predicted) {
        counts[static_cast<std::size_t>(ordinal(truth))]
              [static_cast<std::size_t>(ordinal(predicted))] += 1;
    }
    std::int64_t total() const;
};

// F1_i = 2*N_ii / sum_j (N_ij + N_ji); a zero denominator gives 0.
std::array<double, kClassCount> f1_per_class(const ConfusionMatrix& cm);

// Arithmetic mean over the 9 classes.
double f1_simple_mean(const std::array<double, kClassCount>& f1s);

// Class-frequency weighted mean, weights N_i / N. All-zero counts is an
// argument error.
double f1_weighted_mean(const std::array<double, kClassCount>& f1s,
                        const std::array<std::int64_t, kClassCount>& class_counts);

// Each row divided by its sum; an all-zero row stays all-zero.
std::array<std::array<double, kClassCount>, kClassCount> row_normalize(const ConfusionMatrix& cm);

// ---------------------------------------------------------------------------
// Record-level prediction
// ---------------------------------------------------------------------------

struct PredictConfig {
    qrs::QrsConfig qrs;
    pipeline::PreprocessConfig preprocess;  // high-pass settings for detection
    double target_rate_hz = 70.0;
    double fallback_cap_s = 60.0;  // whole-record fallback length cap
    int batch_size = 32;
};

struct Prediction {
    ClassLabel label = ClassLabel::Normal;
    std::array<int, kClassCount> votes{};        // children per predicted class
    std::array<double, kClassCount> prob_sums{}; // summed softmax probabilities
    int child_count = 0;
    bool fallback = false;  // whole-record path was used (no segments)
};

// The vote rule on its own: modal class, ties broken by the larger summed
// probability over the tied classes, remaining ties by lower ordinal.
ClassLabel resolve_vote(const std::array<int, kClassCount>& votes,
                        const std::array<double, kClassCount>& prob_sums);

// Children are extracted from the recording as given (validation stays raw);
// a high-passed copy of the fused lead is used for R-peak detection only.
// Children are downsampled to the model rate and classified in eval mode;
// the record label is the modal child label, ties broken by the larger
// summed softmax probability over the tied classes, then by lower ordinal.
// If no segment can be extracted the whole recording (capped) is classified
// as a single child and the result is flagged.
Prediction predict_record(const net::ModelState<float>& model, const EcgRecording& recording,
                          const PredictConfig& config = {});

// ---------------------------------------------------------------------------
// Split evaluation and report
// ---------------------------------------------------------------------------

struct RecordOutcome {
    std::string record_id;
    ClassLabel truth = ClassLabel::Normal;
    Prediction prediction;
};

struct EvalReport {
    ConfusionMatrix cm;
    std::array<double, kClassCount> f1{};
    double simple_mean = 0.0;
    double weighted_mean = 0.0;
    std::array<std::array<double, kClassCount>, kClassCount> row_norm{};
    std::array<std::int64_t, kClassCount> class_counts{};
    std::vector<RecordOutcome> records;
    std::vector<std::pair<std::string, std::string>> failures;  // record id, error
};

// Runs predict_record over the validation split of `index` (entries are
// loaded from their paths). A record that fails to load or predict is listed
// in `failures` and excluded from the matrix. threads > 1 evaluates records
// in parallel; results are reduced in index order, so the report does not
// depend on the thread count.
EvalReport evaluate(const net::ModelState<float>& model, const DatasetIndex& index,
                    const PredictConfig& config = {}, int threads = 0);

// Metrics assembly for an already-filled confusion matrix + outcomes.
void finalize_report(EvalReport& report);

// Deterministic text rendering: a `[metrics]` block, a `[confusion]` block
// (counts and row-normalized fractions), and a `[records]` block.
std::string format_report(const EvalReport& report);

}  // namespace ecg::eval
