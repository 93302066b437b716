#include "ecg/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace ecg::config {

namespace {

std::string render_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(const std::string& s) {
    std::size_t pos = 0;
    double v;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw ArgumentError("config: not a number: '" + s + "'");
    }
    if (pos != s.size()) throw ArgumentError("config: trailing junk in number: '" + s + "'");
    return v;
}

int parse_int(const std::string& s) {
    std::size_t pos = 0;
    long v;
    try {
        v = std::stol(s, &pos);
    } catch (const std::exception&) {
        throw ArgumentError("config: not an integer: '" + s + "'");
    }
    if (pos != s.size()) throw ArgumentError("config: trailing junk in integer: '" + s + "'");
    return static_cast<int>(v);
}

bool parse_bool(const std::string& s) {
    if (s == "1" || s == "true") return true;
    if (s == "0" || s == "false") return false;
    throw ArgumentError("config: not a boolean (use 0/1): '" + s + "'");
}

#define FIELD_DOUBLE(key, member)                                                  \
    ConfigField{key, [](const ToolConfig& c) { return render_double(c.member); },  \
                [](ToolConfig& c, const std::string& v) { c.member = parse_double(v); }}
#define FIELD_INT(key, member)                                                     \
    ConfigField{key, [](const ToolConfig& c) { return std::to_string(c.member); }, \
                [](ToolConfig& c, const std::string& v) { c.member = parse_int(v); }}
#define FIELD_BOOL(key, member)                                                      \
    ConfigField{key, [](const ToolConfig& c) { return c.member ? "1" : "0"; },       \
                [](ToolConfig& c, const std::string& v) { c.member = parse_bool(v); }}
#define FIELD_STRING(key, member)                                       \
    ConfigField{key, [](const ToolConfig& c) { return c.member; },      \
                [](ToolConfig& c, const std::string& v) { c.member = v; }}

}  // namespace

const std::vector<ConfigField>& config_fields() {
    static const std::vector<ConfigField> fields = {
        FIELD_DOUBLE("core.csv_rate_hz", csv_rate_hz),
        FIELD_INT("dsp.highpass_order", highpass_order),
        FIELD_DOUBLE("dsp.highpass_cutoff_hz", highpass_cutoff_hz),
        FIELD_STRING("dsp.denoise_wavelet", denoise_wavelet),
        FIELD_INT("dsp.denoise_levels", denoise_levels),
        FIELD_DOUBLE("dsp.target_rate_hz", target_rate_hz),
        FIELD_STRING("qrs.wavelet", qrs_wavelet),
        FIELD_INT("qrs.swt_levels", qrs_swt_levels),
        FIELD_INT("qrs.feature_level_lo", qrs_feature_level_lo),
        FIELD_INT("qrs.feature_level_hi", qrs_feature_level_hi),
        FIELD_DOUBLE("qrs.threshold_factor", qrs_threshold_factor),
        FIELD_DOUBLE("qrs.integration_window_s", qrs_integration_window_s),
        FIELD_DOUBLE("qrs.refractory_s", qrs_refractory_s),
        FIELD_DOUBLE("qrs.searchback_rr_factor", qrs_searchback_rr_factor),
        FIELD_DOUBLE("qrs.searchback_threshold_factor", qrs_searchback_threshold_factor),
        FIELD_DOUBLE("qrs.refine_window_s", qrs_refine_window_s),
        FIELD_INT("qrs.median_peaks", qrs_median_peaks),
        FIELD_DOUBLE("qrs.init_percentile", qrs_init_percentile),
        FIELD_DOUBLE("qrs.init_window_s", qrs_init_window_s),
        FIELD_INT("qrs.preferred_lead", qrs_preferred_lead),
        FIELD_DOUBLE("qrs.min_lead_amplitude_mv", qrs_min_lead_amplitude_mv),
        FIELD_DOUBLE("segmenter.premature_factor", segmenter_premature_factor),
        FIELD_DOUBLE("segmenter.irregularity_threshold", segmenter_irregularity_threshold),
        FIELD_INT("segmenter.median_window", segmenter_median_window),
        FIELD_INT("net.hidden_dim", net_hidden_dim),
        FIELD_DOUBLE("net.dropout_prob", net_dropout_prob),
        FIELD_BOOL("net.backward_readout_at_start", net_backward_readout_at_start),
        FIELD_INT("train.batch_size", train_batch_size),
        FIELD_INT("train.max_epochs", train_max_epochs),
        FIELD_INT("train.patience", train_patience),
        FIELD_DOUBLE("train.learning_rate", train_learning_rate),
        FIELD_DOUBLE("train.beta1", train_beta1),
        FIELD_DOUBLE("train.beta2", train_beta2),
        FIELD_DOUBLE("train.epsilon", train_epsilon),
        FIELD_DOUBLE("train.grad_clip", train_grad_clip),
        FIELD_BOOL("train.augment", train_augment),
        FIELD_DOUBLE("train.split_ratio", train_split_ratio),
        FIELD_DOUBLE("eval.fallback_cap_s", eval_fallback_cap_s),
    };
    return fields;
}

void apply_override(ToolConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& f : config_fields()) {
        if (key == f.key) {
            f.set(cfg, value);
            return;
        }
    }
    throw VocabularyError("config: unknown key '" + key + "'");
}

std::string to_key_values(const ToolConfig& cfg) {
    std::ostringstream out;
    for (const auto& f : config_fields()) out << f.key << '=' << f.get(cfg) << '\n';
    return out.str();
}

ToolConfig load_config_file(const std::filesystem::path& path, ToolConfig base) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config file: " + path.string());
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        // Trim whitespace.
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const auto e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw FormatError("config: line " + std::to_string(lineno) + " is not key=value");
        apply_override(base, line.substr(0, eq), line.substr(eq + 1));
    }
    return base;
}

dsp::Wavelet parse_wavelet(const std::string& name) {
    if (name == "db4") return dsp::Wavelet::Db4;
    if (name == "sym4") return dsp::Wavelet::Sym4;
    throw VocabularyError("unknown wavelet '" + name + "' (expected db4 or sym4)");
}

const char* wavelet_name(dsp::Wavelet w) {
    return w == dsp::Wavelet::Db4 ? "db4" : "sym4";
}

qrs::QrsConfig make_qrs_config(const ToolConfig& cfg) {
    qrs::QrsConfig q;
    q.wavelet = parse_wavelet(cfg.qrs_wavelet);
    q.swt_levels = cfg.qrs_swt_levels;
    q.feature_level_lo = cfg.qrs_feature_level_lo;
    q.feature_level_hi = cfg.qrs_feature_level_hi;
    q.threshold_factor = cfg.qrs_threshold_factor;
    q.integration_window_s = cfg.qrs_integration_window_s;
    q.refractory_s = cfg.qrs_refractory_s;
    q.searchback_rr_factor = cfg.qrs_searchback_rr_factor;
    q.searchback_threshold_factor = cfg.qrs_searchback_threshold_factor;
    q.refine_window_s = cfg.qrs_refine_window_s;
    q.median_peaks = cfg.qrs_median_peaks;
    q.init_percentile = cfg.qrs_init_percentile;
    q.init_window_s = cfg.qrs_init_window_s;
    q.preferred_lead = cfg.qrs_preferred_lead;
    q.min_lead_amplitude_mv = cfg.qrs_min_lead_amplitude_mv;
    return q;
}

pipeline::PreprocessConfig make_preprocess_config(const ToolConfig& cfg) {
    pipeline::PreprocessConfig p;
    p.highpass_order = cfg.highpass_order;
    p.highpass_cutoff_hz = cfg.highpass_cutoff_hz;
    p.denoise_wavelet = parse_wavelet(cfg.denoise_wavelet);
    p.denoise_levels = cfg.denoise_levels;
    return p;
}

segmenter::SegmenterConfig make_segmenter_config(const ToolConfig& cfg) {
    segmenter::SegmenterConfig s;
    s.premature_factor = cfg.segmenter_premature_factor;
    s.irregularity_threshold = cfg.segmenter_irregularity_threshold;
    s.median_window = cfg.segmenter_median_window;
    return s;
}

net::ModelConfig make_model_config(const ToolConfig& cfg) {
    net::ModelConfig m;
    m.hidden_dim = cfg.net_hidden_dim;
    m.dropout_prob = cfg.net_dropout_prob;
    m.backward_readout_at_start = cfg.net_backward_readout_at_start;
    return m;
}

train::TrainConfig make_train_config(const ToolConfig& cfg, std::uint64_t seed) {
    train::TrainConfig t;
    t.batch_size = cfg.train_batch_size;
    t.max_epochs = cfg.train_max_epochs;
    t.patience = cfg.train_patience;
    t.seed = seed;
    t.dropout = cfg.net_dropout_prob > 0.0;
    t.learning_rate = cfg.train_learning_rate;
    t.beta1 = cfg.train_beta1;
    t.beta2 = cfg.train_beta2;
    t.epsilon = cfg.train_epsilon;
    t.grad_clip = cfg.train_grad_clip;
    return t;
}

eval::PredictConfig make_predict_config(const ToolConfig& cfg) {
    eval::PredictConfig p;
    p.qrs = make_qrs_config(cfg);
    p.preprocess = make_preprocess_config(cfg);
    p.target_rate_hz = cfg.target_rate_hz;
    p.fallback_cap_s = cfg.eval_fallback_cap_s;
    p.batch_size = cfg.train_batch_size;
    return p;
}

}  // namespace ecg::config
