#include "ecg/synth.hpp"

#include <array>
#include <cmath>
#include <fstream>

namespace ecg::synth {

namespace {

constexpr int kLeadCount = 12;

// Relative projection of the cardiac vector onto the 12 leads
// (I, II, III, aVR, aVL, aVF, V1-V6).
constexpr std::array<double, kLeadCount> kLeadScale = {
    0.70, 1.00, 0.55, -0.75, 0.45, 0.85, 0.60, 0.80, 0.95, 1.05, 0.90, 0.75};

// Leads whose QRS polarity flips under each bundle-branch archetype.
constexpr std::array<bool, kLeadCount> kRbbbFlip = {
    false, false, false, false, false, false, true, true, true, false, false, false};
constexpr std::array<bool, kLeadCount> kLbbbFlip = {
    true, false, false, false, true, false, false, false, false, false, true, true};

// Beat bump parameters (amplitude mV, center offset s, width s).
constexpr double kPAmp = 0.28, kPMu = -0.20, kPSigma = 0.042;
constexpr double kPMuAvBlock = -0.38;             // delayed conduction: early P
constexpr double kPAmpEctopic = 0.35, kPMuEctopic = -0.14;  // PAC premature beats
constexpr double kQAmp = -0.18, kQMu = -0.065, kQSigma = 0.020;
constexpr double kRAmp = 1.20, kRSigma = 0.012;   // kept narrow for detectability
constexpr double kSAmp = -0.30, kSMu = 0.065, kSSigma = 0.022;
constexpr double kTAmp = 0.45, kTMu = 0.30, kTSigma = 0.075;

// ST plateau between S and T for the ST-shift archetypes.
constexpr double kStOffsetMv = 0.15;
constexpr double kStFrom = 0.08, kStTo = 0.23, kStRamp = 0.02;

// Rhythm parameters.
constexpr double kFirstBeatS = 0.5;
constexpr double kBeatTail = 0.6;      // keep the last beat clear of the end
constexpr double kRrJitter = 0.03;
constexpr double kAfRrLo = 0.6, kAfRrHi = 1.2;
constexpr int kPrematureEvery = 4;
constexpr double kPrematureRr = 0.65;
constexpr double kCompensatoryRr = 1.30;
constexpr double kPrematureTruthFactor = 0.8;  // truth flag: RR-before < 0.8*mean

// QRS flank widening for the wide-complex archetypes. The R spike keeps its
// width so the detector's high-frequency bands still see every beat; the Q/S
// flanks carry the visible widening.
constexpr double kBundleWiden = 2.0;
constexpr double kPvcWiden = 2.5;

struct Bump {
    double amp, mu, sigma;
    bool is_qrs;
};

}  // namespace

SynthRecord generate(const SynthSpec& spec) {
    if (!(spec.duration_s >= 6.0 && spec.duration_s <= 60.0))
        throw ArgumentError("synth: duration must be in [6, 60] s");
    if (!(spec.hr_bpm >= 40.0 && spec.hr_bpm <= 180.0))
        throw ArgumentError("synth: heart rate must be in [40, 180] bpm");
    if (spec.noise_sigma_mv < 0.0 || spec.wander_amp_mv < 0.0)
        throw ArgumentError("synth: noise and wander amplitudes must be non-negative");
    if (!(spec.sampling_rate_hz > 0.0)) throw ArgumentError("synth: rate must be positive");
    int ord = ordinal(spec.archetype);
    if (ord < 0 || ord >= kClassCount) throw ArgumentError("synth: invalid archetype");

    const double fs = spec.sampling_rate_hz;
    const ClassLabel cls = spec.archetype;
    Rng rng(spec.seed);

    // Rhythm: beat times by archetype.
    const double mean_rr = 60.0 / spec.hr_bpm;
    std::vector<double> beat_times;
    {
        double t = kFirstBeatS;
        int beat = 0;
        while (t + kBeatTail < spec.duration_s) {
            beat_times.push_back(t);
            double rr;
            if ((cls == ClassLabel::PAC || cls == ClassLabel::PVC) &&
                beat % kPrematureEvery == kPrematureEvery - 1) {
                rr = kPrematureRr * mean_rr;
            } else if ((cls == ClassLabel::PAC || cls == ClassLabel::PVC) &&
                       beat % kPrematureEvery == 0 && beat > 0) {
                rr = kCompensatoryRr * mean_rr;  // pause after the premature beat
            } else if (cls == ClassLabel::AF) {
                rr = mean_rr * rng.uniform(kAfRrLo, kAfRrHi);
            } else {
                rr = mean_rr * (1.0 + rng.uniform(-kRrJitter, kRrJitter));
            }
            t += rr;
            ++beat;
        }
    }

    SynthRecord out;
    out.premature_flags.assign(beat_times.size(), false);
    for (std::size_t i = 1; i < beat_times.size(); ++i)
        out.premature_flags[i] =
            beat_times[i] - beat_times[i - 1] < kPrematureTruthFactor * mean_rr;

    const long n = static_cast<long>(spec.duration_s * fs);
    Eigen::MatrixXd clean = Eigen::MatrixXd::Zero(kLeadCount, n);

    const double qrs_widen =
        (cls == ClassLabel::LBBB || cls == ClassLabel::RBBB) ? kBundleWiden : 1.0;
    const double st_off = cls == ClassLabel::STD ? -kStOffsetMv
                          : cls == ClassLabel::STE ? kStOffsetMv
                                                   : 0.0;

    for (std::size_t bi = 0; bi < beat_times.size(); ++bi) {
        const double p = beat_times[bi];
        double widen = qrs_widen;
        double p_amp = cls == ClassLabel::AF ? 0.0 : kPAmp;
        double p_mu = cls == ClassLabel::IAVB ? kPMuAvBlock : kPMu;
        if (cls == ClassLabel::PVC && out.premature_flags[bi]) {
            widen = kPvcWiden;
            p_amp = 0.0;  // ventricular beat: no preceding P
        }
        if (cls == ClassLabel::PAC && out.premature_flags[bi]) {
            p_amp = kPAmpEctopic;
            p_mu = kPMuEctopic;
        }

        const std::array<Bump, 5> bumps = {{
            {p_amp, p_mu, kPSigma, false},
            {kQAmp, kQMu, kQSigma * widen, true},
            {kRAmp, 0.0, kRSigma, true},
            {kSAmp, kSMu, kSSigma * widen, true},
            {kTAmp, kTMu, kTSigma, false},
        }};

        const long lo = std::max(0L, static_cast<long>((p - 0.70) * fs));
        const long hi = std::min(n, static_cast<long>((p + 0.80) * fs));
        for (long i = lo; i < hi; ++i) {
            const double t = static_cast<double>(i) / fs;
            double wave = 0.0, qrs_wave = 0.0;
            for (const Bump& b : bumps) {
                if (b.amp == 0.0) continue;
                double z = (t - (p + b.mu)) / b.sigma;
                double v = b.amp * std::exp(-0.5 * z * z);
                (b.is_qrs ? qrs_wave : wave) += v;
            }
            double st = 0.0;
            if (st_off != 0.0) {
                double up = std::clamp((t - (p + kStFrom)) / kStRamp, 0.0, 1.0);
                double down = std::clamp(((p + kStTo) - t) / kStRamp, 0.0, 1.0);
                st = st_off * up * down;
            }
            for (int l = 0; l < kLeadCount; ++l) {
                double s = kLeadScale[static_cast<std::size_t>(l)];
                double qs = s;
                if (cls == ClassLabel::RBBB && kRbbbFlip[static_cast<std::size_t>(l)]) qs = -qs;
                if (cls == ClassLabel::LBBB && kLbbbFlip[static_cast<std::size_t>(l)]) qs = -qs;
                clean(l, i) += s * wave + qs * qrs_wave + std::abs(s) * st;
            }
        }
    }

    // Truth peaks: the noiseless R bump argmax is its center sample.
    out.truth_peaks.reserve(beat_times.size());
    for (double p : beat_times) {
        long idx = std::lround(p * fs);
        out.truth_peaks.push_back(static_cast<int>(std::min<long>(idx, n - 1)));
    }

    // Wander and noise, drawn per lead in a fixed order.
    out.recording.sampling_rate = static_cast<float>(fs);
    out.recording.samples.resize(kLeadCount, n);
    for (int l = 0; l < kLeadCount; ++l) {
        double phase = rng.uniform(0.0, 2.0 * M_PI);
        for (long i = 0; i < n; ++i) {
            double t = static_cast<double>(i) / fs;
            double v = clean(l, i) +
                       spec.wander_amp_mv * std::sin(2.0 * M_PI * spec.wander_freq_hz * t + phase);
            if (spec.noise_sigma_mv > 0.0) v += spec.noise_sigma_mv * rng.next_gaussian();
            out.recording.samples(l, i) = static_cast<float>(v);
        }
    }
    return out;
}

DatasetIndex generate_corpus(int per_class, std::uint64_t seed,
                             const std::filesystem::path& out_dir, const CorpusRanges& ranges) {
    if (per_class < 1) throw ArgumentError("generate_corpus: per_class must be >= 1");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec || !std::filesystem::is_directory(out_dir))
        throw IoError("generate_corpus: cannot create " + out_dir.string());

    Rng master(seed);
    DatasetIndex index;
    std::vector<LabelSet> labels;
    std::ofstream truth(out_dir / "truth.csv", std::ios::trunc);
    if (!truth) throw IoError("generate_corpus: cannot write truth.csv");

    int counter = 0;
    for (int c = 0; c < kClassCount; ++c) {
        for (int k = 0; k < per_class; ++k) {
            SynthSpec spec;
            spec.archetype = class_from_ordinal(c);
            spec.duration_s = master.uniform(ranges.duration_min_s, ranges.duration_max_s);
            spec.hr_bpm = master.uniform(ranges.hr_min_bpm, ranges.hr_max_bpm);
            spec.noise_sigma_mv = master.uniform(ranges.noise_min_mv, ranges.noise_max_mv);
            spec.wander_amp_mv = master.uniform(ranges.wander_min_mv, ranges.wander_max_mv);
            spec.wander_freq_hz = ranges.wander_freq_hz;
            spec.seed = master.next_u64();

            char id[16];
            std::snprintf(id, sizeof(id), "S%04d", ++counter);
            SynthRecord rec = generate(spec);
            rec.recording.record_id = id;

            std::filesystem::path path = out_dir / (std::string(id) + ".ecgb");
            write_recording(path, rec.recording);
            for (std::size_t i = 0; i < rec.truth_peaks.size(); ++i)
                truth << id << ',' << rec.truth_peaks[i] << ','
                      << (rec.premature_flags[i] ? 1 : 0) << '\n';

            LabelSet ls;
            ls.record_id = id;
            ls.labels = {spec.archetype};
            labels.push_back(ls);

            DatasetEntry entry;
            entry.record_id = id;
            entry.labels = ls;
            entry.path = path;
            index.entries.push_back(std::move(entry));
        }
    }
    if (!truth) throw IoError("generate_corpus: truth.csv write failed");
    write_labels(out_dir / "labels.csv", labels);
    return index;
}

}  // namespace ecg::synth
