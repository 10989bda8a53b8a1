#include "evtrack/tracker.hpp"

#include <algorithm>
#include <cmath>

#include "evtrack/cost.hpp"
#include "evtrack/errors.hpp"

namespace evt {

namespace {

BoundingBox to_box(double x, double y, double w, double h) {
    BoundingBox b;
    b.x = int(std::lround(x));
    b.y = int(std::lround(y));
    b.w = std::max(1, int(std::lround(w)));
    b.h = std::max(1, int(std::lround(h)));
    return b;
}

// per-step operation weights mirrored by the analytic model
constexpr std::uint64_t kOpsLockedTest = 19;
constexpr std::uint64_t kOpsTrackingTest = 17;
constexpr std::uint64_t kOpsPairUnmatched = 28;
constexpr std::uint64_t kOpsPairMatched = 37;
constexpr std::uint64_t kOpsSeed = 2;
constexpr std::uint64_t kOpsPerDetection = 2;
constexpr std::uint64_t kOpsMatchedRp = 71;
constexpr std::uint64_t kOpsOcclusion = 6;
constexpr std::uint64_t kOpsMerge = 1;
constexpr std::uint64_t kOpsUnmatchedTracker = 5;
constexpr std::uint64_t kOpsMisc = 4;

}  // namespace

BoundingBox TrackerSlot::box() const { return to_box(x, y, w, h); }

BoundingBox TrackerSlot::predicted_box(int steps) const {
    return to_box(x + vx * steps, y + vy * steps, w, h);
}

OverlapTracker::OverlapTracker(SensorGeometry geometry, OTConfig config, int num_classes)
    : geometry_(geometry), config_(config), num_classes_(num_classes) {
    slots_.resize(std::size_t(std::max(0, config.max_trackers)));
    for (std::size_t i = 0; i < slots_.size(); ++i) slots_[i].id = int(i);
}

int OverlapTracker::vote_mode(const std::vector<int>& votes) {
    if (votes.empty()) return kUnknownClass;
    std::vector<int> tally;
    for (int v : votes) {
        if (v < 0) continue;
        if (int(tally.size()) <= v) tally.resize(std::size_t(v) + 1, 0);
        tally[std::size_t(v)] += 1;
    }
    int best = kUnknownClass, best_count = 0;
    for (std::size_t c = 0; c < tally.size(); ++c)
        if (tally[c] > best_count) {
            best_count = tally[c];
            best = int(c);
        }
    return best;
}

int frame_class_vote(const std::vector<const Detection*>& matched) {
    if (matched.empty()) return kUnknownClass;
    if (matched.size() == 1) return matched.front()->class_id;
    // several proposals: the single highest confidence in the combined list
    int best_class = kUnknownClass;
    double best_conf = -1.0;
    for (const Detection* d : matched)
        for (std::size_t c = 1; c < d->class_conf.size(); ++c)
            if (d->class_conf[c] > best_conf) {
                best_conf = d->class_conf[c];
                best_class = int(c);
            }
    return best_class;
}

std::vector<TrackRow> OverlapTracker::step(std::int64_t frame_idx,
                                           std::vector<Detection> detections,
                                           OpCounters* counters,
                                           OtBranchStats* stats) {
    std::uint64_t ops = kOpsMisc;
    if (stats) stats->frames += 1;

    // capacity: drop the lowest-confidence detections beyond max_trackers
    if (int(detections.size()) > config_.max_trackers) {
        std::stable_sort(detections.begin(), detections.end(),
                         [](const Detection& a, const Detection& b) {
                             return a.bb_conf > b.bb_conf;
                         });
        detections.resize(std::size_t(config_.max_trackers));
    }
    const int n_det = int(detections.size());
    if (stats) stats->detections += std::uint64_t(n_det);

    // 1. predict
    struct Predicted {
        double x, y, w, h;
    };
    std::vector<Predicted> pred(slots_.size());
    for (std::size_t i = 0; i < slots_.size(); ++i) {
        const TrackerSlot& s = slots_[i];
        if (s.mode == SlotMode::Free) continue;
        pred[i] = {s.x + s.vx, s.y + s.vy, s.w, s.h};
    }

    // 2. overlap matching: intersection above T_ov * min(area, area)
    std::vector<std::vector<int>> det_matches;   // det -> slots
    det_matches.resize(std::size_t(n_det));
    std::vector<std::vector<int>> slot_matches;  // slot -> dets
    slot_matches.resize(slots_.size());
    for (int j = 0; j < n_det; ++j) {
        ops += kOpsPerDetection;
        const BoundingBox& db = detections[std::size_t(j)].box;
        for (std::size_t i = 0; i < slots_.size(); ++i) {
            TrackerSlot& s = slots_[i];
            if (s.mode == SlotMode::Free) continue;
            const bool locked = s.mode == SlotMode::Locked;
            ops += locked ? kOpsLockedTest : kOpsTrackingTest;
            if (stats) (locked ? stats->locked_tests : stats->tracking_tests) += 1;

            const BoundingBox pb = to_box(pred[i].x, pred[i].y, pred[i].w, pred[i].h);
            const double inter = double(intersection_area(pb, db));
            const double smaller = double(std::min(pb.area(), db.area()));
            const bool match = smaller > 0 && inter > config_.t_ov * smaller;
            if (match) {
                det_matches[std::size_t(j)].push_back(int(i));
                slot_matches[i].push_back(j);
                ops += kOpsPairMatched;
                if (stats) (locked ? stats->locked_matched : stats->tracking_matched) += 1;
            } else {
                ops += kOpsPairUnmatched;
                if (stats)
                    (locked ? stats->locked_unmatched : stats->tracking_unmatched) += 1;
            }
        }
    }

    // 5. detections claimed by several trackers: occlusion or fragmentation
    std::vector<bool> occluded(slots_.size(), false);
    std::vector<bool> freed(slots_.size(), false);
    for (int j = 0; j < n_det; ++j) {
        auto& claimants = det_matches[std::size_t(j)];
        claimants.erase(std::remove_if(claimants.begin(), claimants.end(),
                                       [&](int i) { return freed[std::size_t(i)]; }),
                        claimants.end());
        if (!claimants.empty()) {
            ops += kOpsMatchedRp;
            if (stats) stats->matched_rps += 1;
        }
        if (claimants.size() < 2) continue;

        bool future_overlap = false;
        for (std::size_t a = 0; a < claimants.size() && !future_overlap; ++a)
            for (std::size_t b = a + 1; b < claimants.size(); ++b) {
                for (int step = 1; step <= config_.n_occl; ++step) {
                    const BoundingBox ba =
                        slots_[std::size_t(claimants[a])].predicted_box(step);
                    const BoundingBox bb =
                        slots_[std::size_t(claimants[b])].predicted_box(step);
                    if (intersection_area(ba, bb) > 0) {
                        future_overlap = true;
                        break;
                    }
                }
                if (future_overlap) break;
            }

        if (future_overlap) {
            // dynamic occlusion: all claimants coast on prediction
            ops += kOpsOcclusion;
            if (stats) stats->occlusion_events += 1;
            for (int i : claimants) occluded[std::size_t(i)] = true;
        } else {
            // stale fragmentation: merge into the eldest claimant
            ops += kOpsMerge;
            if (stats) stats->multimatch_merges += 1;
            int keep = claimants.front();
            for (int i : claimants)
                if (slots_[std::size_t(i)].lifetime_frames >
                        slots_[std::size_t(keep)].lifetime_frames ||
                    (slots_[std::size_t(i)].lifetime_frames ==
                         slots_[std::size_t(keep)].lifetime_frames &&
                     i < keep))
                    keep = i;
            for (int i : claimants) {
                if (i == keep) continue;
                slots_[std::size_t(i)] = TrackerSlot{};
                slots_[std::size_t(i)].id = i;
                freed[std::size_t(i)] = true;
            }
            claimants.assign(1, keep);
        }
    }

    // 3 & 4. per-slot update
    for (std::size_t i = 0; i < slots_.size(); ++i) {
        TrackerSlot& s = slots_[i];
        if (s.mode == SlotMode::Free || freed[i]) continue;
        s.lifetime_frames += 1;
        s.occluded_now = occluded[i];

        std::vector<const Detection*> matched;
        if (!occluded[i])
            for (int j : slot_matches[i]) {
                const auto& claimants = det_matches[std::size_t(j)];
                if (claimants.size() == 1 && claimants.front() == int(i))
                    matched.push_back(&detections[std::size_t(j)]);
            }

        if (occluded[i]) {
            // coast: position from prediction, velocity retained
            s.x = pred[i].x;
            s.y = pred[i].y;
            s.visible_frames += 1;
            s.invisible_frames = 0;
            s.class_votes.push_back(kUnknownClass);  // occluded frames do not vote
        } else if (!matched.empty()) {
            BoundingBox merged = matched.front()->box;
            double conf = matched.front()->bb_conf;
            for (std::size_t m = 1; m < matched.size(); ++m) {
                merged = enclosing(merged, matched[m]->box);
                conf = std::max(conf, matched[m]->bb_conf);
            }
            const double px = s.x, py = s.y;
            const double k = config_.kappa_pos;
            s.x = (1 - k) * pred[i].x + k * merged.x;
            s.y = (1 - k) * pred[i].y + k * merged.y;
            s.w = (1 - k) * pred[i].w + k * merged.w;
            s.h = (1 - k) * pred[i].h + k * merged.h;
            const double kv = config_.kappa_vel;
            s.vx = (1 - kv) * s.vx + kv * (s.x - px);
            s.vy = (1 - kv) * s.vy + kv * (s.y - py);
            s.visible_frames += 1;
            s.invisible_frames = 0;
            s.best_conf = std::max(s.best_conf, conf);
            s.class_votes.push_back(frame_class_vote(matched));

            if (s.mode == SlotMode::Tracking) {
                s.mode = SlotMode::Locked;
                s.track_count = next_track_id_++;
            }
        } else {
            // unmatched: coast and age
            ops += kOpsUnmatchedTracker;
            if (stats) stats->unmatched_tracker_frames += 1;
            s.x = pred[i].x;
            s.y = pred[i].y;
            s.invisible_frames += 1;
        }

        const double visibility =
            s.lifetime_frames > 0 ? double(s.visible_frames) / s.lifetime_frames : 1.0;
        const bool out_of_frame =
            intersection_area(s.box(), {0, 0, geometry_.width, geometry_.height}) == 0;
        if (s.invisible_frames > config_.max_invisible ||
            visibility < config_.min_visibility || out_of_frame) {
            slots_[i] = TrackerSlot{};
            slots_[i].id = int(i);
        }
    }

    // seed free slots from unclaimed detections, in confidence order
    for (int j = 0; j < n_det; ++j) {
        if (!det_matches[std::size_t(j)].empty()) continue;
        auto free_slot = std::find_if(slots_.begin(), slots_.end(), [](const TrackerSlot& s) {
            return s.mode == SlotMode::Free;
        });
        if (free_slot == slots_.end()) break;
        ops += kOpsSeed;
        if (stats) stats->seeds += 1;
        const Detection& d = detections[std::size_t(j)];
        TrackerSlot& s = *free_slot;
        s.mode = SlotMode::Tracking;
        s.x = d.box.x;
        s.y = d.box.y;
        s.w = d.box.w;
        s.h = d.box.h;
        s.vx = s.vy = 0;
        s.lifetime_frames = 1;
        s.visible_frames = 1;
        s.invisible_frames = 0;
        s.best_conf = d.bb_conf;
        s.class_votes.assign(1, d.class_id);
    }

    if (counters) counters->ot_ops += ops;

    // only locked trackers emit rows
    std::vector<TrackRow> rows;
    for (const TrackerSlot& s : slots_) {
        if (s.mode != SlotMode::Locked) continue;
        TrackRow row;
        row.frame_idx = frame_idx;
        row.track_id = s.track_count;
        row.class_id = vote_mode(s.class_votes);
        row.box = s.box().clamped(geometry_);
        row.occluded = s.occluded_now;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace evt
