#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "evtrack/cost.hpp"
#include "evtrack/ebms.hpp"
#include "evtrack/kalman.hpp"
#include "evtrack/tracker.hpp"

using namespace evt;

namespace {

Detection det(BoundingBox box, double conf = 0.9, int class_id = 1) {
    Detection d;
    d.box = box;
    d.bb_conf = conf;
    d.class_id = class_id;
    d.class_conf = {0.1, 0.5, 0.2, 0.1, 0.1};
    d.class_conf[std::size_t(class_id)] = 0.9;
    return d;
}

const SensorGeometry kGeo{240, 180};

}  // namespace

TEST_CASE("ot: constant-velocity object locks and keeps overlapping") {
    OTConfig cfg;
    OverlapTracker ot(kGeo, cfg, 5);
    int locked_frames = 0;
    for (int f = 0; f < 30; ++f) {
        const BoundingBox truth{10 + 5 * f, 60, 16, 42};
        const auto rows = ot.step(f, {det(truth)});
        if (f == 0) {
            CHECK(rows.empty());  // seeded in tracking mode, nothing emitted
        }
        if (!rows.empty()) {
            ++locked_frames;
            CHECK(rows.size() == 1);
            CHECK(rows[0].track_id == 0);
            // prediction and detection must overlap by more than T_ov
            const auto& slot = ot.slots()[std::size_t(0)];
            const BoundingBox pred = slot.predicted_box();
            const double inter = double(intersection_area(pred, truth));
            CHECK(inter > cfg.t_ov * double(std::min(pred.area(), truth.area())));
        }
    }
    CHECK(locked_frames == 29);
}

TEST_CASE("ot: one-frame detection never locks, emits nothing") {
    OverlapTracker ot(kGeo, {}, 5);
    CHECK(ot.step(0, {det({50, 50, 20, 20})}).empty());
    for (int f = 1; f < 10; ++f) CHECK(ot.step(f, {}).empty());
    CHECK(ot.tracks_created() == 0);
}

TEST_CASE("ot: crossing objects coast through occlusion with velocities kept") {
    OTConfig cfg;
    OverlapTracker ot(kGeo, cfg, 5);
    // two objects approach, overlap around frame 12..14, separate after
    auto box_a = [](int f) { return BoundingBox{10 + 8 * f, 60, 20, 40}; };
    auto box_b = [](int f) { return BoundingBox{210 - 8 * f, 70, 20, 40}; };

    std::vector<std::pair<double, double>> pre_occl_vel;
    bool occluded_seen = false;
    for (int f = 0; f < 26; ++f) {
        std::vector<Detection> dets;
        const BoundingBox a = box_a(f), b = box_b(f);
        if (iou(a, b) > 0.0) {
            // merged blob: the proposal stage reports one box
            dets.push_back(det(enclosing(a, b), 0.95, 1));
        } else {
            dets.push_back(det(a, 0.9, 1));
            dets.push_back(det(b, 0.9, 4));
        }
        const auto rows = ot.step(f, dets);
        bool any_occluded = false;
        for (const auto& r : rows) any_occluded |= r.occluded;
        if (any_occluded) {
            occluded_seen = true;
            // velocities retained bit-exactly from before the occlusion
            std::vector<std::pair<double, double>> now;
            for (const auto& s : ot.slots())
                if (s.mode == SlotMode::Locked) now.emplace_back(s.vx, s.vy);
            REQUIRE(now.size() == pre_occl_vel.size());
            for (std::size_t i = 0; i < now.size(); ++i) {
                CHECK(now[i].first == pre_occl_vel[i].first);
                CHECK(now[i].second == pre_occl_vel[i].second);
            }
        } else {
            pre_occl_vel.clear();
            for (const auto& s : ot.slots())
                if (s.mode == SlotMode::Locked) pre_occl_vel.emplace_back(s.vx, s.vy);
        }
    }
    CHECK(occluded_seen);
    CHECK(ot.tracks_created() == 2);  // identities survive the crossing
}

TEST_CASE("ot: position blend limits") {
    // kappa_pos = 0: position follows pure prediction
    OTConfig pure_pred;
    pure_pred.kappa_pos = 0.0;
    OverlapTracker a(kGeo, pure_pred, 5);
    a.step(0, {det({50, 50, 20, 20})});
    a.step(1, {det({55, 50, 20, 20})});
    const auto& slot_a = a.slots()[std::size_t(0)];
    CHECK(slot_a.x == 50.0);  // prediction with v=0 stays at the seed
    CHECK(slot_a.y == 50.0);

    // kappa_pos = 1, single match: position equals the detection box
    OTConfig pure_det;
    pure_det.kappa_pos = 1.0;
    OverlapTracker b(kGeo, pure_det, 5);
    b.step(0, {det({50, 50, 20, 20})});
    b.step(1, {det({57, 52, 22, 24})});
    const auto& slot_b = b.slots()[std::size_t(0)];
    CHECK(slot_b.x == 57.0);
    CHECK(slot_b.y == 52.0);
    CHECK(slot_b.w == 22.0);
    CHECK(slot_b.h == 24.0);
}

TEST_CASE("ot: fragmented detections merge into the enclosing box") {
    OTConfig cfg;
    cfg.kappa_pos = 1.0;
    OverlapTracker ot(kGeo, cfg, 5);
    ot.step(0, {det({50, 50, 40, 40})});
    ot.step(1, {det({50, 50, 40, 40})});  // locked now
    // two fragments of the same object
    ot.step(2, {det({50, 50, 18, 40}), det({75, 50, 15, 40})});
    const auto& slot = ot.slots()[std::size_t(0)];
    CHECK(slot.mode == SlotMode::Locked);
    CHECK(slot.x == 50.0);
    CHECK(slot.w == 40.0);  // enclosing box of both fragments
    CHECK(ot.tracks_created() == 1);
}

TEST_CASE("ot: slot conservation and capacity drop by confidence") {
    OTConfig cfg;
    cfg.max_trackers = 3;
    OverlapTracker ot(kGeo, cfg, 5);
    std::vector<Detection> many;
    for (int i = 0; i < 6; ++i)
        many.push_back(det({i * 40, 10, 20, 20}, 0.5 + 0.08 * i));
    ot.step(0, many);
    int active = 0;
    for (const auto& s : ot.slots()) active += s.mode != SlotMode::Free;
    CHECK(active == 3);
    // the three highest-confidence detections win the slots
    for (const auto& s : ot.slots())
        if (s.mode != SlotMode::Free) CHECK(s.best_conf >= 0.5 + 0.08 * 3 - 1e-12);
}

TEST_CASE("ot: unique track ids are never reused") {
    OverlapTracker ot(kGeo, {}, 5);
    for (int cycle = 0; cycle < 3; ++cycle) {
        const int base = cycle * 30;
        ot.step(base + 0, {det({50, 50, 20, 20})});
        ot.step(base + 1, {det({50, 50, 20, 20})});
        for (int f = 2; f < 12; ++f) ot.step(base + f, {});  // starve until freed
    }
    CHECK(ot.tracks_created() == 3);  // 0, 1, 2: no id reuse
}

TEST_CASE("ot: emitted boxes stay inside the sensor") {
    OverlapTracker ot(kGeo, {}, 5);
    TrackLog all;
    for (int f = 0; f < 40; ++f) {
        const auto rows = ot.step(f, {det({200 + f, 150, 30, 40})});
        all.insert(all.end(), rows.begin(), rows.end());
    }
    for (const auto& r : all) {
        CHECK(r.box.inside(kGeo));
    }
}

TEST_CASE("frame class vote: single and multi-proposal rules") {
    Detection bus = det({0, 0, 10, 10}, 0.9, 2);
    bus.class_conf = {0.0, 0.2, 0.9, 0.1, 0.0};
    Detection car = det({0, 0, 10, 10}, 0.9, 1);
    car.class_conf = {0.0, 0.7, 0.1, 0.0, 0.0};

    CHECK(frame_class_vote({&car}) == 1);
    CHECK(frame_class_vote({&bus, &car}) == 2);  // 0.9 bus beats 0.7 car
    CHECK(frame_class_vote({}) == kUnknownClass);

    CHECK(OverlapTracker::vote_mode({1, 1, 2}) == 1);
    CHECK(OverlapTracker::vote_mode({kUnknownClass, kUnknownClass}) == kUnknownClass);
}

TEST_CASE("hungarian: agrees with brute force on random cost matrices") {
    std::mt19937_64 rng(44);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng() % 4, m = 1 + rng() % 4;
        std::vector<std::vector<double>> cost(n, std::vector<double>(m));
        for (auto& row : cost)
            for (double& c : row) c = double(rng() % 1000) / 1000.0;

        const auto got = hungarian(cost);
        double got_total = 0;
        std::size_t got_assigned = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (got[i] >= 0) {
                got_total += cost[i][std::size_t(got[i])];
                ++got_assigned;
            }
        CHECK(got_assigned == std::min(n, m));

        double best = 1e18;
        if (n <= m) {
            std::vector<std::size_t> idx(m);
            for (std::size_t j = 0; j < m; ++j) idx[j] = j;
            do {
                double total = 0;
                for (std::size_t i = 0; i < n; ++i) total += cost[i][idx[i]];
                best = std::min(best, total);
            } while (std::next_permutation(idx.begin(), idx.end()));
        } else {
            std::vector<std::size_t> ridx(n);
            for (std::size_t i = 0; i < n; ++i) ridx[i] = i;
            do {
                double total = 0;
                for (std::size_t j = 0; j < m; ++j) total += cost[ridx[j]][j];
                best = std::min(best, total);
            } while (std::next_permutation(ridx.begin(), ridx.end()));
        }
        CHECK(got_total == doctest::Approx(best).epsilon(1e-9));
    }
}

TEST_CASE("kf: stationary object converges to the measurement") {
    KalmanTracker kf(kGeo, {}, 5);
    const BoundingBox truth{100, 80, 20, 40};
    TrackRow last;
    for (int f = 0; f < 40; ++f) {
        const auto rows = kf.step(f, {det(truth)});
        REQUIRE(rows.size() == 1);
        last = rows[0];
    }
    CHECK(last.box.x == truth.x);
    CHECK(last.box.y == truth.y);
    CHECK(last.box.w == truth.w);
    CHECK(last.box.h == truth.h);
    const auto& t = kf.tracks().front();
    CHECK(std::abs(t.state[2]) < 0.05);  // velocity decays to zero
    CHECK(std::abs(t.state[3]) < 0.05);
}

TEST_CASE("kf: a one-frame false detection creates a short track") {
    // the documented mode difference: no probation in the Kalman baseline
    KalmanTracker kf(kGeo, {}, 5);
    const auto rows = kf.step(0, {det({30, 30, 10, 10}, 0.2)});
    CHECK(rows.size() == 1);  // emitted from the seed frame

    OverlapTracker ot(kGeo, {}, 5);
    CHECK(ot.step(0, {det({30, 30, 10, 10}, 0.2)}).empty());
}

TEST_CASE("kf: crossed costs resolve to the minimal pairing") {
    KalmanTracker kf(kGeo, {}, 5);
    kf.step(0, {det({10, 10, 20, 20}), det({100, 100, 20, 20})});
    // detections near the opposite tracks: assignment must keep each track
    // with its nearest detection despite the tempting swap
    const auto rows = kf.step(1, {det({14, 10, 20, 20}), det({96, 100, 20, 20})});
    REQUIRE(rows.size() == 2);
    for (const auto& r : rows) {
        if (r.track_id == 0) CHECK(r.box.x < 50);
        if (r.track_id == 1) CHECK(r.box.x > 50);
    }
}

TEST_CASE("ot equals kf on the degenerate single-object scenario") {
    OTConfig ot_cfg;
    ot_cfg.kappa_pos = 1.0;  // position equals the detection, like a settled KF
    OverlapTracker ot(kGeo, ot_cfg, 5);
    KalmanTracker kf(kGeo, {}, 5);
    TrackLog ot_log, kf_log;
    for (int f = 0; f < 25; ++f) {
        const BoundingBox truth{40 + 4 * f, 90, 20, 30};
        for (auto& r : ot.step(f, {det(truth)})) ot_log.push_back(r);
        for (auto& r : kf.step(f, {det(truth)})) kf_log.push_back(r);
    }
    // skip the overlap tracker's lock delay, then compare boxes frame by frame
    OTConfig cfg;
    REQUIRE(!ot_log.empty());
    const std::int64_t first = ot_log.front().frame_idx + cfg.min_locked_frames;
    for (const auto& r : ot_log) {
        if (r.frame_idx < first) continue;
        const BoundingBox truth{40 + 4 * int(r.frame_idx), 90, 20, 30};
        CHECK(r.box == truth);
        for (const auto& k : kf_log)
            if (k.frame_idx == r.frame_idx) {
                CHECK(std::abs(k.box.x - r.box.x) <= 1);
                CHECK(std::abs(k.box.y - r.box.y) <= 1);
            }
    }
}

TEST_CASE("ebms: cluster lifecycle") {
    EBMSConfig cfg;
    EbmsTracker tracker({240, 180}, cfg);
    TrackLog log;

    SUBCASE("visibility begins exactly at the eighth event") {
        for (int i = 0; i < 8; ++i) {
            tracker.step({i * 1000, 50, 50, Polarity::On}, log);
            const auto& c = tracker.clusters().front();
            CHECK(c.visible == (i == 7));
        }
    }

    SUBCASE("inactivity beyond the limit expires the cluster") {
        tracker.step({0, 50, 50, Polarity::On}, log);
        CHECK(tracker.clusters().size() == 1);
        tracker.step({101000, 200, 90, Polarity::On}, log);
        // the old cluster died; only the new seed remains
        REQUIRE(tracker.clusters().size() == 1);
        CHECK(tracker.clusters().front().cx == doctest::Approx(200));
    }

    SUBCASE("far-apart activity forms separate clusters") {
        for (int i = 0; i < 20; ++i) {
            tracker.step({i * 2000, 10, 90, Polarity::On}, log);
            tracker.step({i * 2000 + 1000, 230, 90, Polarity::Off}, log);
        }
        CHECK(tracker.clusters().size() == 2);
    }
}

TEST_CASE("ebms: moving cluster tracks position and samples rows") {
    EBMSConfig cfg;
    cfg.blend = 0.1;
    EbmsTracker tracker({240, 180}, cfg);
    TrackLog log;
    // dense event stream sweeping rightward at ~60 px/s
    for (int ms = 0; ms < 2000; ms += 2) {
        const int x = 20 + ms * 60 / 1000;
        tracker.step({ms * 1000, x, 90, Polarity::On}, log);
        tracker.step({ms * 1000 + 500, x + 1, 91, Polarity::Off}, log);
    }
    tracker.finish(2000000, log);
    REQUIRE(!log.empty());
    CHECK(log.front().class_id == kUnknownClass);
    // sampled centres advance with the object
    CHECK(log.back().box.x > log.front().box.x + 60);
    // the ten-position window spans only ~10 ms of events, so the fitted
    // velocity is noisy; direction and rough magnitude must still hold
    const auto& c = tracker.clusters().front();
    CHECK(c.vx > 20.0);
    CHECK(c.vx < 120.0);
}
