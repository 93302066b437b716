// ecgtool: batch command-line surface for the ECG classification pipeline.
//
// Subcommands: synth, qrs, preprocess, segment, train, eval, predict.
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ecg/config.hpp"
#include "ecg/eval.hpp"
#include "ecg/manifest.hpp"
#include "ecg/net.hpp"
#include "ecg/pipeline.hpp"
#include "ecg/qrs.hpp"
#include "ecg/segmenter.hpp"
#include "ecg/synth.hpp"
#include "ecg/train.hpp"

namespace fs = std::filesystem;
using namespace ecg;

namespace {

struct CommonOpts {
    std::uint64_t seed = 0;
    int threads = 0;
    std::vector<std::string> overrides;  // key=value
    std::string config_file;
};

void add_common(CLI::App* cmd, CommonOpts& c) {
    cmd->add_option("--seed", c.seed, "Random seed (default 0)");
    cmd->add_option("--threads", c.threads,
                    "Worker threads; 0 = single-threaded deterministic (default)");
    cmd->add_option("--config", c.overrides, "Configuration override key=value (repeatable)");
    cmd->add_option("--config-file", c.config_file, "Configuration file of key=value lines");
}

config::ToolConfig resolve_config(const CommonOpts& c) {
    config::ToolConfig cfg;
    if (!c.config_file.empty()) cfg = config::load_config_file(c.config_file, cfg);
    for (const auto& kv : c.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw ArgumentError("--config expects key=value, got '" + kv + "'");
        config::apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
}

manifest::RunManifest base_manifest(const std::string& command, const CommonOpts& c,
                                    const config::ToolConfig& cfg) {
    manifest::RunManifest m;
    m.command = command;
    m.resolved_config = cfg;
    m.seed = c.seed;
    m.threads = c.threads;
    return m;
}

fs::path dataset_record_path(const fs::path& dir, const std::string& record_id) {
    fs::path ecgb = dir / (record_id + ".ecgb");
    if (fs::exists(ecgb)) return ecgb;
    fs::path csv = dir / (record_id + ".csv");
    if (fs::exists(csv)) return csv;
    throw IoError("no recording file for record '" + record_id + "' in " + dir.string());
}

DatasetIndex index_from_labels(const fs::path& data_dir, const fs::path& labels_path) {
    DatasetIndex index;
    for (auto& ls : load_labels(labels_path)) {
        DatasetEntry e;
        e.record_id = ls.record_id;
        e.path = dataset_record_path(data_dir, ls.record_id);
        e.labels = std::move(ls);
        index.entries.push_back(std::move(e));
    }
    if (index.entries.empty()) throw DataError("labels file lists no records");
    return index;
}

// Children of one record, labeled and downsampled to the model rate.
// When `pre` is non-null its windows (same peaks) come back too, so the
// caller can pair preprocessed and raw variants.
struct ChildSet {
    std::vector<train::TrainItem> raw;
    std::vector<train::TrainItem> pre;
};

ChildSet make_children(const EcgRecording& raw_rec, const EcgRecording* pre_rec,
                       const qrs::PeakList& peaks, ClassLabel parent,
                       const segmenter::SegmenterConfig& scfg, int up, int down) {
    ChildSet out;
    if (peaks.peaks.size() < 8) return out;
    auto annotations = segmenter::annotate_beats(peaks, raw_rec.sampling_rate, scfg);
    std::vector<segmenter::BeatAnnotation> retained(annotations.begin() + 2,
                                                    annotations.end() - 2);

    auto build = [&](const EcgRecording& rec, bool preprocessed) {
        auto segments = segmenter::label_segments(segmenter::extract_segments(rec, peaks),
                                                  retained, parent, scfg);
        std::vector<train::TrainItem> items;
        items.reserve(segments.size());
        for (const auto& seg : segments) {
            train::TrainItem item;
            item.samples = pipeline::resample_leads(seg.samples, up, down);
            item.label = seg.label;
            item.preprocessed = preprocessed;
            item.parent_id = rec.record_id;
            items.push_back(std::move(item));
        }
        return items;
    };
    out.raw = build(raw_rec, false);
    if (pre_rec) out.pre = build(*pre_rec, true);
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::trunc | std::ios::binary);
    if (!f) throw IoError("cannot write " + path.string());
    f << text;
    if (!f) throw IoError("failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// Subcommand bodies
// ---------------------------------------------------------------------------

int run_synth(const CommonOpts& common, int per_class, const std::string& out_dir) {
    auto cfg = resolve_config(common);
    fs::create_directories(out_dir);
    DatasetIndex index = synth::generate_corpus(per_class, common.seed, out_dir);
    auto m = base_manifest("synth", common, cfg);
    m.outputs.push_back(out_dir);
    manifest::write_manifest(fs::path(out_dir) / "manifest.json", std::move(m));
    std::cout << "wrote " << index.size() << " records to " << out_dir << "\n";
    return 0;
}

int run_qrs(const CommonOpts& common, const std::string& input, const std::string& output,
            bool baseline_corrected) {
    auto cfg = resolve_config(common);
    EcgRecording rec = load_recording(input, static_cast<float>(cfg.csv_rate_hz));
    qrs::PeakList peaks = pipeline::detect_peaks(rec, baseline_corrected,
                                                 config::make_qrs_config(cfg),
                                                 config::make_preprocess_config(cfg));
    std::ostringstream csv;
    csv << "record_id,lead,peak_sample\n";
    for (int p : peaks.peaks) csv << peaks.record_id << ',' << peaks.lead << ',' << p << '\n';
    write_text(output, csv.str());

    auto m = base_manifest("qrs", common, cfg);
    m.inputs.push_back(input);
    m.outputs.push_back(output);
    manifest::write_manifest(output + ".manifest.json", std::move(m));
    std::cout << peaks.peaks.size() << " peaks on lead " << peaks.lead << "\n";
    return 0;
}

int run_preprocess(const CommonOpts& common, const std::string& input,
                   const std::string& output) {
    auto cfg = resolve_config(common);
    EcgRecording rec = load_recording(input, static_cast<float>(cfg.csv_rate_hz));
    EcgRecording pre = pipeline::preprocess_recording(rec, config::make_preprocess_config(cfg));
    write_recording(output, pre);

    auto m = base_manifest("preprocess", common, cfg);
    m.inputs.push_back(input);
    m.outputs.push_back(output);
    manifest::write_manifest(output + ".manifest.json", std::move(m));
    return 0;
}

int run_segment(const CommonOpts& common, const std::string& input, const std::string& out_dir,
                const std::string& label_name, bool baseline_corrected, double resample_to) {
    auto cfg = resolve_config(common);
    EcgRecording rec = load_recording(input, static_cast<float>(cfg.csv_rate_hz));
    qrs::PeakList peaks = pipeline::detect_peaks(rec, baseline_corrected,
                                                 config::make_qrs_config(cfg),
                                                 config::make_preprocess_config(cfg));
    auto segments = segmenter::extract_segments(rec, peaks);
    const bool labeled = !label_name.empty();
    if (labeled && peaks.peaks.size() >= 8) {
        auto scfg = config::make_segmenter_config(cfg);
        auto annotations = segmenter::annotate_beats(peaks, rec.sampling_rate, scfg);
        std::vector<segmenter::BeatAnnotation> retained(annotations.begin() + 2,
                                                        annotations.end() - 2);
        segments = segmenter::label_segments(std::move(segments), retained,
                                             parse_class_label(label_name), scfg);
    }

    fs::create_directories(out_dir);
    std::ostringstream idx;
    idx << "file,parent_id,length,label\n";
    auto m = base_manifest("segment", common, cfg);
    m.inputs.push_back(input);
    for (std::size_t i = 0; i < segments.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof name, "%s_child%03zu.ecgb", rec.record_id.c_str(), i);
        EcgRecording child;
        child.record_id = fs::path(name).stem().string();
        child.sampling_rate = rec.sampling_rate;
        child.samples = segments[i].samples;
        if (resample_to > 0) {
            const auto [up, down] = pipeline::rate_ratio(rec.sampling_rate, resample_to);
            child.samples = pipeline::resample_leads(child.samples, up, down);
            child.sampling_rate = static_cast<float>(resample_to);
        }
        write_recording(fs::path(out_dir) / name, child);
        idx << name << ',' << rec.record_id << ',' << child.sample_count() << ','
            << (labeled ? to_string(segments[i].label) : "") << '\n';
        m.outputs.push_back((fs::path(out_dir) / name).string());
    }
    write_text(fs::path(out_dir) / "segments.csv", idx.str());
    manifest::write_manifest(fs::path(out_dir) / "manifest.json", std::move(m));
    std::cout << segments.size() << " segments -> " << out_dir << "\n";
    return 0;
}

int run_train(const CommonOpts& common, const std::string& data_dir, std::string labels_path,
              const std::string& model_out, std::string log_path) {
    auto cfg = resolve_config(common);
    if (labels_path.empty()) labels_path = (fs::path(data_dir) / "labels.csv").string();
    DatasetIndex index = index_from_labels(data_dir, labels_path);
    index = split_dataset(index, cfg.train_split_ratio, common.seed);

    const auto qcfg = config::make_qrs_config(cfg);
    const auto pcfg = config::make_preprocess_config(cfg);
    const auto scfg = config::make_segmenter_config(cfg);

    std::vector<train::SegmentPair> pairs;
    std::vector<train::TrainItem> val_items;
    int skipped_records = 0;
    for (const auto& entry : index.entries) {
        EcgRecording rec = load_recording(entry.path, static_cast<float>(cfg.csv_rate_hz));
        const auto [rup, rdown] = pipeline::rate_ratio(rec.sampling_rate, cfg.target_rate_hz);
        if (entry.split == Split::train) {
            // Training children come from the preprocessed record, with raw
            // counterparts of the same windows for augmentation.
            EcgRecording pre = pipeline::preprocess_recording(rec, pcfg);
            qrs::PeakList peaks = pipeline::detect_peaks(pre, true, qcfg, pcfg);
            ChildSet children = make_children(rec, &pre, peaks, entry.labels.primary(), scfg,
                                              rup, rdown);
            if (children.pre.empty()) {
                ++skipped_records;
                continue;
            }
            for (std::size_t i = 0; i < children.pre.size(); ++i) {
                train::SegmentPair pair;
                pair.preprocessed = std::move(children.pre[i]);
                if (i < children.raw.size()) pair.raw = std::move(children.raw[i]);
                pairs.push_back(std::move(pair));
            }
        } else {
            // Validation children stay raw; the high-passed copy inside
            // detect_peaks is for detection only.
            qrs::PeakList peaks = pipeline::detect_peaks(rec, false, qcfg, pcfg);
            ChildSet children = make_children(rec, nullptr, peaks, entry.labels.primary(), scfg,
                                              rup, rdown);
            if (children.raw.empty()) {
                ++skipped_records;
                continue;
            }
            for (auto& item : children.raw) val_items.push_back(std::move(item));
        }
    }
    int missing_raw = 0;
    std::vector<train::TrainItem> train_items = train::augment(pairs, cfg.train_augment,
                                                               &missing_raw);
    std::cout << "train segments: " << train_items.size() << " (augment "
              << (cfg.train_augment ? "on" : "off") << "), validation segments: "
              << val_items.size() << ", skipped records: " << skipped_records << "\n";

    net::ModelState<float> model = net::he_init<float>(config::make_model_config(cfg),
                                                       common.seed);
    auto tcfg = config::make_train_config(cfg, common.seed);
    std::ostringstream log;
    log << "epoch,mean_loss,val_acc,seconds\n";

    struct Tee : std::ostream, std::streambuf {
        std::ostream &a, &b;
        Tee(std::ostream& a_, std::ostream& b_) : std::ostream(this), a(a_), b(b_) {}
        int overflow(int c) override {
            if (c != EOF) {
                a.put(static_cast<char>(c));
                b.put(static_cast<char>(c));
            }
            return c;
        }
    } tee(log, std::cout);

    train::TrainResult result = train::train(model, train_items, val_items, tcfg, &tee);
    std::cout << "best epoch " << result.best_epoch << ", validation segment accuracy "
              << result.best_val_accuracy << "\n";

    net::save_model(model_out, result.best_state);
    if (log_path.empty()) log_path = model_out + ".log.csv";
    write_text(log_path, log.str());

    std::ostringstream split_csv;
    split_csv << "record_id,split\n";
    for (const auto& e : index.entries)
        split_csv << e.record_id << ','
                  << (e.split == Split::train ? "train" : "validation") << '\n';
    write_text(model_out + ".split.csv", split_csv.str());

    auto m = base_manifest("train", common, cfg);
    m.inputs = {data_dir, labels_path};
    m.outputs = {model_out, log_path, model_out + ".split.csv"};
    manifest::write_manifest(model_out + ".manifest.json", std::move(m));
    return 0;
}

int run_eval(const CommonOpts& common, const std::string& model_path, const std::string& data_dir,
             std::string labels_path, const std::string& split_path, const std::string& output) {
    auto cfg = resolve_config(common);
    if (labels_path.empty()) labels_path = (fs::path(data_dir) / "labels.csv").string();
    DatasetIndex index = index_from_labels(data_dir, labels_path);

    if (!split_path.empty()) {
        // Keep only the rows the split file marks as validation.
        std::ifstream f(split_path);
        if (!f) throw IoError("cannot open split file: " + split_path);
        std::map<std::string, std::string> split_of;
        std::string line;
        std::getline(f, line);  // header
        while (std::getline(f, line)) {
            const auto comma = line.find(',');
            if (comma == std::string::npos) continue;
            std::string id = line.substr(0, comma);
            std::string tag = line.substr(comma + 1);
            if (!tag.empty() && tag.back() == '\r') tag.pop_back();
            split_of[id] = tag;
        }
        for (auto& e : index.entries) {
            auto it = split_of.find(e.record_id);
            e.split = (it != split_of.end() && it->second == "validation") ? Split::validation
                                                                           : Split::train;
        }
    } else {
        for (auto& e : index.entries) e.split = Split::validation;
    }

    net::ModelState<float> model = net::load_model(model_path);
    eval::EvalReport report = eval::evaluate(model, index, config::make_predict_config(cfg),
                                             common.threads);
    write_text(output, eval::format_report(report));

    auto m = base_manifest("eval", common, cfg);
    m.inputs = {model_path, data_dir, labels_path};
    if (!split_path.empty()) m.inputs.push_back(split_path);
    m.outputs = {output};
    manifest::write_manifest(output + ".manifest.json", std::move(m));
    std::cout << "simple-mean F1 " << report.simple_mean << " over " << report.records.size()
              << " records (" << report.failures.size() << " failed)\n";
    return 0;
}

int run_predict(const CommonOpts& common, const std::string& model_path, const std::string& input,
                const std::string& output) {
    auto cfg = resolve_config(common);
    net::ModelState<float> model = net::load_model(model_path);
    EcgRecording rec = load_recording(input, static_cast<float>(cfg.csv_rate_hz));
    eval::Prediction pred = eval::predict_record(model, rec, config::make_predict_config(cfg));

    std::ostringstream out;
    out << "record_id=" << rec.record_id << "\n"
        << "label=" << to_string(pred.label) << "\n"
        << "votes=";
    for (int c = 0; c < kClassCount; ++c)
        out << (c ? "|" : "") << pred.votes[static_cast<std::size_t>(c)];
    out << "\nchildren=" << pred.child_count << "\nfallback=" << (pred.fallback ? 1 : 0) << "\n";
    std::cout << out.str();
    if (!output.empty()) {
        write_text(output, out.str());
        auto m = base_manifest("predict", common, cfg);
        m.inputs = {model_path, input};
        m.outputs = {output};
        manifest::write_manifest(output + ".manifest.json", std::move(m));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"12-lead ECG arrhythmia classification toolkit"};
    app.require_subcommand(1);

    CommonOpts common;

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic labeled corpus");
    int per_class = 10;
    std::string out_dir;
    synth_cmd->add_option("--per-class", per_class, "Records per class")->required();
    synth_cmd->add_option("--out", out_dir, "Output directory")->required();
    add_common(synth_cmd, common);

    // qrs
    auto* qrs_cmd = app.add_subcommand("qrs", "Detect R peaks in a recording");
    std::string qrs_in, qrs_out;
    bool qrs_corrected = false;
    qrs_cmd->add_option("--input", qrs_in, "Recording (.ecgb or .csv)")->required();
    qrs_cmd->add_option("--output", qrs_out, "Peaks CSV path")->required();
    qrs_cmd->add_flag("--baseline-corrected", qrs_corrected,
                      "Input is already baseline-corrected; skip the detection high-pass");
    add_common(qrs_cmd, common);

    // preprocess
    auto* pre_cmd = app.add_subcommand("preprocess",
                                       "Baseline correction + wavelet denoising");
    std::string pre_in, pre_out;
    pre_cmd->add_option("--input", pre_in, "Recording (.ecgb or .csv)")->required();
    pre_cmd->add_option("--output", pre_out, "Output ECGB path")->required();
    add_common(pre_cmd, common);

    // segment
    auto* seg_cmd = app.add_subcommand("segment", "Extract 4-beat child segments");
    std::string seg_in, seg_out, seg_label;
    bool seg_corrected = false;
    double seg_resample = 0.0;
    seg_cmd->add_option("--input", seg_in, "Recording (.ecgb or .csv)")->required();
    seg_cmd->add_option("--out", seg_out, "Output directory")->required();
    seg_cmd->add_option("--label", seg_label, "Parent class label for child labeling");
    seg_cmd->add_flag("--baseline-corrected", seg_corrected,
                      "Input is already baseline-corrected");
    seg_cmd->add_option("--resample-to", seg_resample, "Resample children to this rate (Hz)");
    add_common(seg_cmd, common);

    // train
    auto* train_cmd = app.add_subcommand("train", "Train a classifier on a labeled corpus");
    std::string train_data, train_labels, train_model, train_log;
    train_cmd->add_option("--data", train_data, "Corpus directory")->required();
    train_cmd->add_option("--labels", train_labels, "Labels CSV (default <data>/labels.csv)");
    train_cmd->add_option("--output", train_model, "Checkpoint output path")->required();
    train_cmd->add_option("--log", train_log, "Training log path (default <output>.log.csv)");
    add_common(train_cmd, common);

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a labeled corpus");
    std::string eval_model, eval_data, eval_labels, eval_split, eval_out;
    eval_cmd->add_option("--model", eval_model, "Checkpoint path")->required();
    eval_cmd->add_option("--data", eval_data, "Corpus directory")->required();
    eval_cmd->add_option("--labels", eval_labels, "Labels CSV (default <data>/labels.csv)");
    eval_cmd->add_option("--split", eval_split,
                         "Split CSV from training; only validation rows are scored");
    eval_cmd->add_option("--output", eval_out, "Report output path")->required();
    add_common(eval_cmd, common);

    // predict
    auto* pred_cmd = app.add_subcommand("predict", "Classify a single recording");
    std::string pred_model, pred_in, pred_out;
    pred_cmd->add_option("--model", pred_model, "Checkpoint path")->required();
    pred_cmd->add_option("--input", pred_in, "Recording (.ecgb or .csv)")->required();
    pred_cmd->add_option("--output", pred_out, "Also write the result to this path");
    add_common(pred_cmd, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    }

    try {
        if (synth_cmd->parsed()) return run_synth(common, per_class, out_dir);
        if (qrs_cmd->parsed()) return run_qrs(common, qrs_in, qrs_out, qrs_corrected);
        if (pre_cmd->parsed()) return run_preprocess(common, pre_in, pre_out);
        if (seg_cmd->parsed())
            return run_segment(common, seg_in, seg_out, seg_label, seg_corrected, seg_resample);
        if (train_cmd->parsed())
            return run_train(common, train_data, train_labels, train_model, train_log);
        if (eval_cmd->parsed())
            return run_eval(common, eval_model, eval_data, eval_labels, eval_split, eval_out);
        if (pred_cmd->parsed()) return run_predict(common, pred_model, pred_in, pred_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cerr << "error: no subcommand\n";
    return 2;
}
