#pragma once

#include <string>
#include <vector>

#include "ecg/core.hpp"
#include "ecg/dsp.hpp"

namespace ecg::qrs {

struct QrsConfig {
    dsp::Wavelet wavelet = dsp::Wavelet::Db4;
    int swt_levels = 5;
    // Detail levels whose squared coefficients form the detection feature
    // (1-indexed; 3 and 4 cover roughly 15-60 Hz at a 500 Hz rate).
    int feature_level_lo = 3;
    int feature_level_hi = 4;
    double threshold_factor = 0.25;       // theta = factor * running peak median
    double integration_window_s = 0.150;  // centered moving average
    double refractory_s = 0.200;
    double searchback_rr_factor = 1.66;   // trigger beyond this multiple of median RR
    double searchback_threshold_factor = 0.5;
    double refine_window_s = 0.050;       // refine to max |x| within +/- this
    int median_peaks = 8;                 // running median window (peaks and RRs)
    double init_percentile = 0.98;        // threshold seed from the first seconds
    double init_window_s = 2.0;
    int preferred_lead = 1;               // lead II
    double min_lead_amplitude_mv = 0.05;  // fallback trigger for a dead lead
};

struct PeakList {
    std::string record_id;
    int lead = 1;
    std::vector<int> peaks;  // sample indices at the input rate, increasing
    QrsConfig config;        // snapshot of the detector configuration
};

// SWT detail-band energy detector with adaptive thresholding, refractory
// logic, RR-gap search-back, and |x|-refinement. Flat input gives an empty
// list; input shorter than 2 s is an argument error. The input is expected
// to be baseline-corrected.
PeakList detect_r_peaks(const std::vector<double>& x, double rate_hz,
                        const QrsConfig& config = {});

struct LeadChoice {
    int lead = 1;
    std::vector<double> samples;
};

// The preferred lead (default II), unless its peak-to-peak amplitude over the
// whole record is below min_lead_amplitude_mv, in which case the lead with
// maximal peak-to-peak amplitude is used.
LeadChoice fuse_lead_choice(const EcgRecording& recording, const QrsConfig& config = {});

}  // namespace ecg::qrs
