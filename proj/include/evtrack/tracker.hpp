#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "evtrack/geometry.hpp"
#include "evtrack/nndc.hpp"
#include "evtrack/tracklog.hpp"

namespace evt {

struct OpCounters;
struct OtBranchStats;

struct OTConfig {
    int max_trackers = 8;
    double t_ov = 0.2;        // overlap fraction of the smaller area
    int n_occl = 2;           // future steps for the occlusion test
    double kappa_pos = 0.5;   // detection weight in the position blend
    double kappa_vel = 0.5;   // displacement weight in the velocity blend
    int max_invisible = 5;
    double min_visibility = 0.6;
    int min_locked_frames = 3;
};

enum class SlotMode { Free, Tracking, Locked };

struct TrackerSlot {
    int id = 0;
    SlotMode mode = SlotMode::Free;
    double x = 0, y = 0, w = 0, h = 0;  // T_i, continuous
    double vx = 0, vy = 0;              // pixels/frame
    int track_count = -1;               // assigned on lock
    int invisible_frames = 0;
    int lifetime_frames = 0;
    int visible_frames = 0;
    std::vector<int> class_votes;       // non-occluded frame votes
    double best_conf = 0.0;
    bool occluded_now = false;

    BoundingBox box() const;
    BoundingBox predicted_box(int steps = 1) const;
};

class OverlapTracker {
public:
    OverlapTracker(SensorGeometry geometry, OTConfig config, int num_classes);

    /// Advances one frame. Detections must already be NMS-filtered; if more
    /// than max_trackers arrive, the lowest-confidence ones are dropped.
    /// Returns the TrackLog rows emitted for this frame (locked slots only).
    std::vector<TrackRow> step(std::int64_t frame_idx,
                               std::vector<Detection> detections,
                               OpCounters* counters = nullptr,
                               OtBranchStats* stats = nullptr);

    const std::vector<TrackerSlot>& slots() const { return slots_; }
    int tracks_created() const { return next_track_id_; }

    /// Track-level class: statistical mode of the per-frame votes collected
    /// while the slot was visible and not occluded.
    static int vote_mode(const std::vector<int>& votes);

private:
    SensorGeometry geometry_;
    OTConfig config_;
    int num_classes_;
    std::vector<TrackerSlot> slots_;
    int next_track_id_ = 0;
};

/// Per-frame class decision for a set of matched detections: a single match
/// votes its own class, several matches vote the class of the single highest
/// confidence across all their confidence vectors.
int frame_class_vote(const std::vector<const Detection*>& matched);

}  // namespace evt
