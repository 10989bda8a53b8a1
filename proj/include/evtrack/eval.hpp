#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "evtrack/geometry.hpp"
#include "evtrack/tracklog.hpp"

namespace evt {

/// Ground-truth row; shares the TrackRow layout (occluded unused).
using Annotation = TrackRow;
using AnnotationList = std::vector<Annotation>;

struct PrecisionRecall {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::int64_t tp = 0, fp = 0, fn = 0;
};

/// Pooled precision/recall over the recording: per frame, track rows are
/// matched one-to-one to GT boxes greedily in descending IoU; pairs above
/// iou_th are true positives.
PrecisionRecall detection_f1(const TrackLog& tracks, const AnnotationList& gt,
                             double iou_th);

/// Track-count-weighted mean of per-recording F1 values.
double weighted_f1(const std::vector<std::pair<double, std::int64_t>>& f1_and_tracks);

/// Expected average overlap: every GT track is paired with the predicted
/// track sharing the most frames; per-frame IoU (0 where lost) is averaged
/// per track, then across tracks.
double eao(const TrackLog& tracks, const AnnotationList& gt);

struct ClassificationReport {
    double per_sample = 0.0;
    double per_track = 0.0;
    double balanced_per_sample = 0.0;
    double balanced_per_track = 0.0;
    std::map<int, std::map<int, std::int64_t>> confusion;  // gt -> predicted -> count
    std::vector<int> classes_missing_gt;
};

/// Class accuracy over matched (track row, GT row) pairs and over mode-voted
/// tracks. `match_iou` gates the per-frame pairing.
ClassificationReport classification_report(const TrackLog& tracks,
                                           const AnnotationList& gt,
                                           double match_iou = 0.1);

struct RecordingMetrics {
    std::string name;
    std::vector<double> iou_thresholds;  // 0.1 .. 0.9
    std::vector<PrecisionRecall> detection;  // one per threshold
    double f1_auc = 0.0;   // trapezoidal over the threshold sweep
    double eao = 0.0;
    std::int64_t gt_tracks = 0;
    ClassificationReport classification;
};

/// Full sweep at IoU_th in {0.1,...,0.9}.
RecordingMetrics evaluate_recording(const std::string& name, const TrackLog& tracks,
                                    const AnnotationList& gt);

/// Trapezoidal area under (threshold, f1) samples.
double f1_auc(const std::vector<double>& thresholds, const std::vector<double>& f1);

std::string metrics_to_json(const std::vector<RecordingMetrics>& recordings,
                            double weighted_f1_at_01);
std::string metrics_to_csv(const std::vector<RecordingMetrics>& recordings);

}  // namespace evt
