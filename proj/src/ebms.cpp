#include "evtrack/ebms.hpp"

#include <algorithm>
#include <cmath>

#include "evtrack/cost.hpp"

namespace evt {

BoundingBox EbmsCluster::box(const SensorGeometry& g) const {
    BoundingBox b;
    b.w = std::max(1, int(std::lround(2 * half_w)));
    b.h = std::max(1, int(std::lround(2 * half_h)));
    b.x = int(std::lround(cx - half_w));
    b.y = int(std::lround(cy - half_h));
    return b.clamped(g);
}

EbmsTracker::EbmsTracker(SensorGeometry geometry, EBMSConfig config)
    : geometry_(geometry), config_(config) {}

void EbmsTracker::expire(std::int64_t now) {
    std::erase_if(clusters_, [&](const EbmsCluster& c) {
        return now - c.last_t > config_.inactivity_us;
    });
}

void EbmsTracker::sample(std::int64_t frame_idx, TrackLog& out) const {
    for (const EbmsCluster& c : clusters_) {
        if (!c.visible) continue;
        TrackRow row;
        row.frame_idx = frame_idx;
        row.track_id = c.track_id;
        row.class_id = kUnknownClass;  // cluster tracking carries no classes
        row.box = c.box(geometry_);
        out.push_back(row);
    }
}

void EbmsTracker::step(const Event& e, TrackLog& out, OpCounters* counters) {
    if (next_boundary_ < 0) {
        frame_idx_ = e.t / config_.t_f_us;
        next_boundary_ = (frame_idx_ + 1) * config_.t_f_us;
    }
    while (e.t >= next_boundary_) {
        expire(next_boundary_);
        sample(frame_idx_, out);
        ++frame_idx_;
        next_boundary_ += config_.t_f_us;
    }
    expire(e.t);

    std::uint64_t ops = 0;
    EbmsCluster* nearest = nullptr;
    double nearest_d2 = config_.max_radius * config_.max_radius;
    for (EbmsCluster& c : clusters_) {
        const double dx = e.x - c.cx, dy = e.y - c.cy;
        const double d2 = dx * dx + dy * dy;
        ops += 5;  // two diffs, two squares, compare
        if (d2 <= nearest_d2) {
            nearest_d2 = d2;
            nearest = &c;
        }
    }

    if (nearest) {
        EbmsCluster& c = *nearest;
        c.cx += config_.blend * (e.x - c.cx);
        c.cy += config_.blend * (e.y - c.cy);
        c.events += 1;
        c.last_t = e.t;
        // support extent: grows to the event, relaxes exponentially
        c.half_w = std::max(c.half_w * (1.0 - config_.box_decay), std::abs(e.x - c.cx));
        c.half_h = std::max(c.half_h * (1.0 - config_.box_decay), std::abs(e.y - c.cy));
        c.trail.emplace_back(e.t, std::make_pair(c.cx, c.cy));
        while (int(c.trail.size()) > config_.history) c.trail.pop_front();
        ops += 16;

        // least-squares velocity over the retained centre positions
        if (c.trail.size() >= 2) {
            const double t0 = double(c.trail.front().first);
            double st = 0, sx = 0, sy = 0, stt = 0, stx = 0, sty = 0;
            const double n = double(c.trail.size());
            for (const auto& [t, pos] : c.trail) {
                const double ts = (double(t) - t0) * 1e-6;
                st += ts;
                sx += pos.first;
                sy += pos.second;
                stt += ts * ts;
                stx += ts * pos.first;
                sty += ts * pos.second;
            }
            const double denom = n * stt - st * st;
            if (denom > 1e-12) {
                c.vx = (n * stx - st * sx) / denom;
                c.vy = (n * sty - st * sy) / denom;
            }
            ops += std::uint64_t(10 * c.trail.size());
        }
        if (!c.visible && c.events >= config_.min_events) {
            c.visible = true;
            c.track_id = next_track_id_++;
        }
    } else {
        EbmsCluster c;
        c.cx = e.x;
        c.cy = e.y;
        c.events = 1;
        c.last_t = e.t;
        c.trail.emplace_back(e.t, std::make_pair(c.cx, c.cy));
        clusters_.push_back(std::move(c));
        ops += 6;
    }
    if (counters) counters->ebms_ops += ops;
}

void EbmsTracker::finish(std::int64_t end_t, TrackLog& out) {
    if (next_boundary_ < 0) return;
    while (end_t >= next_boundary_) {
        expire(next_boundary_);
        sample(frame_idx_, out);
        ++frame_idx_;
        next_boundary_ += config_.t_f_us;
    }
    expire(end_t);
    sample(frame_idx_, out);
}

}  // namespace evt
