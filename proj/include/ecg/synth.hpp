#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ecg/core.hpp"

namespace ecg::synth {

struct SynthSpec {
    ClassLabel archetype = ClassLabel::Normal;
    double duration_s = 10.0;     // [6, 60]
    double hr_bpm = 75.0;         // [40, 180]
    double noise_sigma_mv = 0.0;  // additive white noise
    double wander_amp_mv = 0.0;   // sinusoidal baseline wander
    double wander_freq_hz = 0.25;
    std::uint64_t seed = 0;
    double sampling_rate_hz = 500.0;
};

struct SynthRecord {
    EcgRecording recording;
    std::vector<int> truth_peaks;       // exact R-bump sample positions
    std::vector<bool> premature_flags;  // per beat, aligned with truth_peaks
};

// Gaussian-bump beat model: P, Q, R, S, T bumps with per-lead amplitude
// scaling; rhythm, P-wave, QRS-width, polarity, and ST-offset features vary
// by archetype. Everything is deterministic in the seed, and the exported
// truth peaks mark the noiseless R bumps. The archetypes are caricatures
// whose job is to make the pipeline's acceptance behavior measurable, not to
// be clinically faithful.
SynthRecord generate(const SynthSpec& spec);

struct CorpusRanges {
    double duration_min_s = 10.0, duration_max_s = 20.0;
    double hr_min_bpm = 55.0, hr_max_bpm = 100.0;
    double noise_min_mv = 0.01, noise_max_mv = 0.04;
    double wander_min_mv = 0.05, wander_max_mv = 0.30;
    double wander_freq_hz = 0.25;
};

// per_class records per archetype with randomized duration/HR/noise/wander,
// written as ECGB files plus labels.csv and truth.csv (sidecar rows
// record_id,peak_sample,premature_flag). Returns the index of what was
// written; identical seeds give byte-identical directories.
DatasetIndex generate_corpus(int per_class, std::uint64_t seed,
                             const std::filesystem::path& out_dir,
                             const CorpusRanges& ranges = {});

}  // namespace ecg::synth
