#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "evtrack/events.hpp"
#include "evtrack/geometry.hpp"
#include "evtrack/tracklog.hpp"

namespace evt {

struct OpCounters;

/// Event-driven mean-shift cluster tracker baseline. Events are expected to
/// be pre-filtered (refractory 50 ms, then nearest-neighbour 5 ms).
struct EBMSConfig {
    double max_radius = 130.0;   // join distance to a cluster centre
    int min_events = 8;          // events before a cluster becomes visible
    std::int64_t inactivity_us = 100000;
    double blend = 0.02;         // centre update step per event
    int history = 10;            // centre positions kept for the velocity fit
    double box_decay = 0.02;     // per-event shrink of the support extent
    std::int64_t t_f_us = 66000; // TrackLog sampling period
};

struct EbmsCluster {
    double cx = 0, cy = 0;
    int events = 0;
    std::int64_t last_t = 0;
    bool visible = false;
    int track_id = -1;
    double vx = 0, vy = 0;  // pixels/second, least-squares over the history
    double half_w = 2.0, half_h = 2.0;
    std::deque<std::pair<std::int64_t, std::pair<double, double>>> trail;

    BoundingBox box(const SensorGeometry& g) const;
};

class EbmsTracker {
public:
    EbmsTracker(SensorGeometry geometry, EBMSConfig config);

    /// Feeds one event; any boundary crossings emit sampled rows into `out`.
    void step(const Event& e, TrackLog& out, OpCounters* counters = nullptr);
    /// Flushes the final partial window.
    void finish(std::int64_t end_t, TrackLog& out);

    const std::vector<EbmsCluster>& clusters() const { return clusters_; }

private:
    void sample(std::int64_t frame_idx, TrackLog& out) const;
    void expire(std::int64_t now);

    SensorGeometry geometry_;
    EBMSConfig config_;
    std::vector<EbmsCluster> clusters_;
    int next_track_id_ = 0;
    std::int64_t next_boundary_ = -1;
    std::int64_t frame_idx_ = 0;
};

}  // namespace evt
