#pragma once

#include <optional>
#include <vector>

#include "ecg/core.hpp"
#include "ecg/qrs.hpp"

namespace ecg::segmenter {

struct BeatAnnotation {
    int peak = 0;  // sample index at the source rate
    std::optional<double> rr_before;  // seconds; absent for the first peak
    std::optional<double> rr_after;   // seconds; absent for the last peak
    bool premature = false;           // only ever set when rr_before exists
};

struct SegmenterConfig {
    double premature_factor = 0.85;       // RR-before < factor * running median
    double irregularity_threshold = 0.10; // AF local RR irregularity cut
    int median_window = 8;                // RR intervals in the running median
};

// Sliding 4-beat windows over the peaks with the first and last 2 peaks
// excluded: N peaks give max(0, N-7) segments. Boundaries run from the
// midpoint before each window's first peak (RR/2 before it at the retained
// list's start) to the symmetric midpoint after its fourth peak, clamped to
// the recording. Labels are left at Normal for label_segments to assign.
std::vector<Segment> extract_segments(const EcgRecording& recording, const qrs::PeakList& peaks);

// RR bookkeeping plus premature flags: a beat is premature when its RR-before
// is shorter than premature_factor times the running median of the previous
// `median_window` RR intervals (the record's global median stands in while
// fewer exist). Needs at least 3 peaks.
std::vector<BeatAnnotation> annotate_beats(const qrs::PeakList& peaks, double rate_hz,
                                           const SegmenterConfig& config = {});

// Child labeling: the six stationary classes inherit the parent label;
// PAC/PVC children take the parent label when any of their 4 beats is
// premature, else Normal; AF children take AF when the window's local RR
// irregularity (mean |successive RR difference| / mean RR over the 3
// in-window intervals plus one context interval each side) exceeds the
// threshold, else Normal. `annotations` must align with the retained peaks
// (segments.size() + 3 entries).
std::vector<Segment> label_segments(std::vector<Segment> segments,
                                    const std::vector<BeatAnnotation>& annotations,
                                    ClassLabel parent_label,
                                    const SegmenterConfig& config = {});

}  // namespace ecg::segmenter
