#pragma once

#include <utility>

#include "ecg/core.hpp"
#include "ecg/dsp.hpp"
#include "ecg/qrs.hpp"

namespace ecg::pipeline {

struct PreprocessConfig {
    int highpass_order = 4;
    double highpass_cutoff_hz = 1.0;
    dsp::Wavelet denoise_wavelet = dsp::Wavelet::Db4;
    int denoise_levels = 4;
};

// Baseline correction + noise removal, per lead independently: zero-phase
// Butterworth high-pass, then wavelet shrinkage. Rate and length unchanged.
EcgRecording preprocess_recording(const EcgRecording& rec, const PreprocessConfig& config = {});

// Reduced integer up/down pair converting rate_from to rate_to
// (e.g. 500 -> 70 gives {7, 50}). Rates must be positive integers.
std::pair<int, int> rate_ratio(double rate_from, double rate_to);

// Rational resampling applied to every lead (row) of a lead-major matrix.
Eigen::MatrixXf resample_leads(const Eigen::MatrixXf& samples, int up, int down);

// R-peak detection on the fused lead choice. When `baseline_corrected` is
// false a zero-phase high-pass copy of the chosen lead is detected on; the
// copy is used for detection only.
qrs::PeakList detect_peaks(const EcgRecording& rec, bool baseline_corrected,
                           const qrs::QrsConfig& qrs_config = {},
                           const PreprocessConfig& pre_config = {});

}  // namespace ecg::pipeline
