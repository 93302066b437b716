#include "ecg/pipeline.hpp"

#include <cmath>
#include <numeric>

namespace ecg::pipeline {

EcgRecording preprocess_recording(const EcgRecording& rec, const PreprocessConfig& config) {
    if (rec.sample_count() < 2) throw ArgumentError("preprocess: recording too short");
    const auto hp = dsp::design_butterworth_highpass(config.highpass_order,
                                                     config.highpass_cutoff_hz,
                                                     rec.sampling_rate);
    EcgRecording out = rec;
    std::vector<double> lead(static_cast<std::size_t>(rec.sample_count()));
    for (int l = 0; l < rec.lead_count(); ++l) {
        for (long t = 0; t < rec.sample_count(); ++t)
            lead[static_cast<std::size_t>(t)] = rec.samples(l, t);
        std::vector<double> corrected = dsp::filtfilt(hp, lead);
        std::vector<double> clean =
            dsp::wavelet_denoise(corrected, config.denoise_wavelet, config.denoise_levels);
        for (long t = 0; t < rec.sample_count(); ++t)
            out.samples(l, t) = static_cast<float>(clean[static_cast<std::size_t>(t)]);
    }
    return out;
}

std::pair<int, int> rate_ratio(double rate_from, double rate_to) {
    if (!(rate_from > 0) || !(rate_to > 0)) throw ArgumentError("rate_ratio: rates must be positive");
    const long from = std::lround(rate_from);
    const long to = std::lround(rate_to);
    if (std::abs(rate_from - static_cast<double>(from)) > 1e-6 ||
        std::abs(rate_to - static_cast<double>(to)) > 1e-6)
        throw ArgumentError("rate_ratio: rates must be integral");
    const long g = std::gcd(from, to);
    return {static_cast<int>(to / g), static_cast<int>(from / g)};
}

Eigen::MatrixXf resample_leads(const Eigen::MatrixXf& samples, int up, int down) {
    if (up == down) return samples;
    const long n = samples.cols();
    std::vector<double> lead(static_cast<std::size_t>(n));
    Eigen::MatrixXf out;
    for (long l = 0; l < samples.rows(); ++l) {
        for (long t = 0; t < n; ++t) lead[static_cast<std::size_t>(t)] = samples(l, t);
        std::vector<double> y = dsp::resample_rational(lead, up, down);
        if (out.size() == 0) out.resize(samples.rows(), static_cast<long>(y.size()));
        for (long t = 0; t < out.cols(); ++t)
            out(l, t) = static_cast<float>(y[static_cast<std::size_t>(t)]);
    }
    return out;
}

qrs::PeakList detect_peaks(const EcgRecording& rec, bool baseline_corrected,
                           const qrs::QrsConfig& qrs_config,
                           const PreprocessConfig& pre_config) {
    qrs::LeadChoice choice = qrs::fuse_lead_choice(rec, qrs_config);
    std::vector<double> detection = std::move(choice.samples);
    if (!baseline_corrected) {
        const auto hp = dsp::design_butterworth_highpass(pre_config.highpass_order,
                                                         pre_config.highpass_cutoff_hz,
                                                         rec.sampling_rate);
        detection = dsp::filtfilt(hp, detection);
    }
    qrs::PeakList peaks = qrs::detect_r_peaks(detection, rec.sampling_rate, qrs_config);
    peaks.record_id = rec.record_id;
    peaks.lead = choice.lead;
    return peaks;
}

}  // namespace ecg::pipeline
