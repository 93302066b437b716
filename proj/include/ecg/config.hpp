#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "ecg/eval.hpp"
#include "ecg/net.hpp"
#include "ecg/pipeline.hpp"
#include "ecg/qrs.hpp"
#include "ecg/segmenter.hpp"
#include "ecg/train.hpp"

namespace ecg::config {

// Every tunable constant of the pipeline, flat, with the shipped defaults.
// Anything here can be overridden with --config key=value.
struct ToolConfig {
    // core
    double csv_rate_hz = 500.0;

    // dsp / preprocessing
    int highpass_order = 4;
    double highpass_cutoff_hz = 1.0;
    std::string denoise_wavelet = "db4";
    int denoise_levels = 4;
    double target_rate_hz = 70.0;

    // qrs detection
    std::string qrs_wavelet = "db4";
    int qrs_swt_levels = 5;
    int qrs_feature_level_lo = 3;
    int qrs_feature_level_hi = 4;
    double qrs_threshold_factor = 0.25;
    double qrs_integration_window_s = 0.150;
    double qrs_refractory_s = 0.200;
    double qrs_searchback_rr_factor = 1.66;
    double qrs_searchback_threshold_factor = 0.5;
    double qrs_refine_window_s = 0.050;
    int qrs_median_peaks = 8;
    double qrs_init_percentile = 0.98;
    double qrs_init_window_s = 2.0;
    int qrs_preferred_lead = 1;
    double qrs_min_lead_amplitude_mv = 0.05;

    // segmenter
    double segmenter_premature_factor = 0.85;
    double segmenter_irregularity_threshold = 0.10;
    int segmenter_median_window = 8;

    // net
    int net_hidden_dim = 100;
    double net_dropout_prob = 0.5;
    bool net_backward_readout_at_start = true;

    // train
    int train_batch_size = 32;
    int train_max_epochs = 50;
    int train_patience = 5;
    double train_learning_rate = 0.001;
    double train_beta1 = 0.9;
    double train_beta2 = 0.999;
    double train_epsilon = 1e-8;
    double train_grad_clip = 1.0;
    bool train_augment = true;
    double train_split_ratio = 0.9;

    // eval
    double eval_fallback_cap_s = 60.0;
};

// The key registry: stable dotted names for every field above.
struct ConfigField {
    const char* key;
    std::function<std::string(const ToolConfig&)> get;
    std::function<void(ToolConfig&, const std::string&)> set;
};
const std::vector<ConfigField>& config_fields();

// key=value override; unknown key is a vocabulary error, an unparsable value
// an argument error.
void apply_override(ToolConfig& cfg, const std::string& key, const std::string& value);

// Full materialization, one `key=value` line per field, registry order.
// Doubles use %.17g so apply_override round-trips exactly.
std::string to_key_values(const ToolConfig& cfg);

// Parse a config file (key=value lines, '#' comments) or a comma/newline-free
// single override; apply_override semantics per line.
ToolConfig load_config_file(const std::filesystem::path& path, ToolConfig base = {});

// Wavelet name mapping ("db4", "sym4").
dsp::Wavelet parse_wavelet(const std::string& name);
const char* wavelet_name(dsp::Wavelet w);

// Sub-config assembly.
qrs::QrsConfig make_qrs_config(const ToolConfig& cfg);
pipeline::PreprocessConfig make_preprocess_config(const ToolConfig& cfg);
segmenter::SegmenterConfig make_segmenter_config(const ToolConfig& cfg);
net::ModelConfig make_model_config(const ToolConfig& cfg);
train::TrainConfig make_train_config(const ToolConfig& cfg, std::uint64_t seed);
eval::PredictConfig make_predict_config(const ToolConfig& cfg);

}  // namespace ecg::config
