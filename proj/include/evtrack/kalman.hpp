#pragma once

#include <cstdint>
#include <vector>

#include "evtrack/geometry.hpp"
#include "evtrack/nndc.hpp"
#include "evtrack/tracklog.hpp"

namespace evt {

struct OpCounters;
struct KfBranchStats;

/// Constant-velocity Kalman baseline. State [cx, cy, vx, vy, w, h] (m = 6),
/// measurement [cx, cy, w, h] (n = 4). Unlike the overlap tracker there is no
/// probationary mode: every unassigned detection seeds an emitting track.
struct KFConfig {
    int max_trackers = 8;
    int max_invisible = 5;
    double min_visibility = 0.6;
    double process_noise_pos = 1.0;
    double process_noise_vel = 4.0;
    double process_noise_size = 1.0;
    double measurement_noise = 4.0;
    double initial_covariance = 10.0;
};

inline constexpr int kKfStateDim = 6;
inline constexpr int kKfMeasDim = 4;

struct KalmanTrack {
    int track_id = -1;
    double state[kKfStateDim] = {};
    double cov[kKfStateDim][kKfStateDim] = {};
    int invisible_frames = 0;
    int lifetime_frames = 0;
    int visible_frames = 0;
    std::vector<int> class_votes;

    BoundingBox box(const SensorGeometry& g) const;
};

class KalmanTracker {
public:
    KalmanTracker(SensorGeometry geometry, KFConfig config, int num_classes);

    std::vector<TrackRow> step(std::int64_t frame_idx,
                               std::vector<Detection> detections,
                               OpCounters* counters = nullptr,
                               KfBranchStats* stats = nullptr);

    const std::vector<KalmanTrack>& tracks() const { return tracks_; }

private:
    SensorGeometry geometry_;
    KFConfig config_;
    int num_classes_;
    std::vector<KalmanTrack> tracks_;
    int next_track_id_ = 0;
};

/// Minimum-cost assignment (Jonker-Volgenant style O(n^3)). Returns, for each
/// row, the assigned column or -1. Costs >= forbidden are treated as
/// unassignable.
std::vector<int> hungarian(const std::vector<std::vector<double>>& cost,
                           double forbidden = 1e9);

}  // namespace evt
