#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ecg/common.hpp"

namespace ecg {

// ---------------------------------------------------------------------------
// Class vocabulary
// ---------------------------------------------------------------------------

enum class ClassLabel : int {
    Normal = 0,
    AF = 1,
    IAVB = 2,
    LBBB = 3,
    RBBB = 4,
    PAC = 5,
    PVC = 6,
    STD = 7,
    STE = 8,
};

inline constexpr int kClassCount = 9;

const char* to_string(ClassLabel c);
ClassLabel parse_class_label(const std::string& s);  // VocabularyError on unknown
inline int ordinal(ClassLabel c) { return static_cast<int>(c); }
ClassLabel class_from_ordinal(int i);  // ArgumentError outside 0..8

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

// 12-lead sampled signal. Samples are lead-major (row = lead), in millivolts,
// stored as float so the ECGB binary round trip is bit-exact.
struct EcgRecording {
    std::string record_id;
    float sampling_rate = 500.0f;
    Eigen::MatrixXf samples;  // lead_count x sample_count

    int lead_count() const { return static_cast<int>(samples.rows()); }
    long sample_count() const { return static_cast<long>(samples.cols()); }
    double duration_s() const { return sample_count() / static_cast<double>(sampling_rate); }
};

struct LabelSet {
    std::string record_id;
    std::vector<ClassLabel> labels;  // 1..3 entries, first is primary

    ClassLabel primary() const {
        if (labels.empty()) throw ArgumentError("LabelSet has no labels");
        return labels.front();
    }
};

// A 4-beat child window of a recording.
struct Segment {
    std::string parent_id;
    Eigen::MatrixXf samples;  // 12 x n, millivolts
    float sampling_rate = 500.0f;
    std::array<int, 4> peak_indices{};  // relative to segment start, increasing
    ClassLabel label = ClassLabel::Normal;
    bool preprocessed = false;

    long length() const { return static_cast<long>(samples.cols()); }
};

enum class Split { train, validation };

struct DatasetEntry {
    std::string record_id;
    LabelSet labels;
    Split split = Split::train;
    std::filesystem::path path;
};

struct DatasetIndex {
    std::vector<DatasetEntry> entries;

    std::size_t size() const { return entries.size(); }
    std::size_t count(Split s) const;
};

// ---------------------------------------------------------------------------
// Recording I/O
//
// ECGB binary format, little-endian throughout:
//   magic 45 43 47 42 ("ECGB"), version u16 = 1, reserved u16 = 0,
//   lead_count u16, sampling_rate f32, sample_count u32,
//   then lead-major f32 samples (lead 0 samples 0..n-1, then lead 1, ...).
//
// CSV recording format: optional header row; 12 numeric columns
// (leads I, II, III, aVR, aVL, aVF, V1-V6), one row per sample instant.
// CSV carries no rate, so the caller supplies it (default 500 Hz).
// ---------------------------------------------------------------------------

EcgRecording load_recording(const std::filesystem::path& path, float csv_rate = 500.0f);
void write_recording(const std::filesystem::path& path, const EcgRecording& rec);

// Label CSV: record_id,label1[,label2[,label3]]
std::vector<LabelSet> load_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const std::vector<LabelSet>& sets);

// ---------------------------------------------------------------------------
// Dataset operations
// ---------------------------------------------------------------------------

// Deterministic shuffle by seed, then the first round(ratio*N) entries are
// tagged train and the rest validation. Same seed, same membership.
DatasetIndex split_dataset(const DatasetIndex& index, double ratio, std::uint64_t seed);

// Counts by primary label.
std::array<long, kClassCount> dataset_stats(const std::vector<LabelSet>& labelsets);

}  // namespace ecg
