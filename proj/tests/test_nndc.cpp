#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "evtrack/cost.hpp"
#include "evtrack/errors.hpp"
#include "evtrack/nndc.hpp"

using namespace evt;

namespace {

DualFrame random_patch(std::uint64_t seed, int side = 42, int percent = 20) {
    std::mt19937_64 rng(seed);
    DualFrame patch(side, side);
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
            if (int(rng() % 100) < percent) patch.on.set(x, y);
            if (int(rng() % 100) < percent) patch.off.set(x, y);
        }
    return patch;
}

AnchorSet test_anchors() {
    AnchorSet a;
    a.names = {"background", "car_van", "bus", "bike", "truck"};
    a.w = {21.0, 16.0, 31.0, 15.0, 22.0};
    a.h = {51.0, 42.0, 94.0, 21.0, 50.0};
    return a;
}

}  // namespace

TEST_CASE("network shape: parameter count and spatial plan") {
    const NetShape s;
    CHECK(s.conv1_side() == 38);
    CHECK(s.pool1_side() == 19);
    CHECK(s.conv2_side() == 15);
    CHECK(s.pool2_side() == 7);
    CHECK(s.flat() == 784);
    CHECK(s.parameter_count() == 107936);
    CHECK(Network{}.parameter_count() == 107936);
}

TEST_CASE("forward MAC count sits within 2% of 2.16M") {
    const std::int64_t macs = NetShape{}.forward_mac_ops();
    CHECK(std::abs(double(macs) - 2.16e6) / 2.16e6 < 0.02);

    // the instrumented counter reports the same number
    Network net;
    net.init_weights(1);
    OpCounters counters;
    (void)net.forward(random_patch(1), &counters);
    CHECK(counters.nndc_mac_ops == std::uint64_t(macs));
    CHECK(counters.nndc_inferences == 1);
}

TEST_CASE("zero weights: confidences at one half, linear outputs at zero") {
    Network net;  // zero-initialised parameters
    const RawOutput out = net.forward(random_patch(2));
    for (double c : out.class_conf) CHECK(c == doctest::Approx(0.5));
    CHECK(out.bb_conf == 0.0);
    CHECK(out.tx == 0.0);
    CHECK(out.ty == 0.0);
    CHECK(out.tw == 0.0);
    CHECK(out.th == 0.0);
}

TEST_CASE("forward is deterministic for fixed weights and patch") {
    Network net;
    net.init_weights(3);
    const DualFrame patch = random_patch(4);
    const RawOutput a = net.forward(patch);
    const RawOutput b = net.forward(patch);
    CHECK(a.class_conf == b.class_conf);
    CHECK(a.bb_conf == b.bb_conf);
    CHECK(a.tx == b.tx);
}

TEST_CASE("position correction: zero offsets return the anchor at the corner") {
    RawOutput out;
    out.class_conf = {0.1, 0.9, 0.2, 0.2, 0.2};  // class 1 wins
    out.bb_conf = 0.5;
    const auto det = correct_position(out, 10, 20, test_anchors(), {240, 180}, 0.1);
    REQUIRE(det.has_value());
    CHECK(det->box == BoundingBox{10, 20, 16, 42});
    CHECK(det->class_id == 1);
}

TEST_CASE("position correction: low confidence and background rejections") {
    RawOutput out;
    out.class_conf = {0.1, 0.9, 0.2, 0.2, 0.2};
    out.bb_conf = 0.05;
    CHECK_FALSE(correct_position(out, 10, 20, test_anchors(), {240, 180}, 0.1));

    out.bb_conf = 0.9;
    out.class_conf = {0.95, 0.1, 0.2, 0.2, 0.2};  // background wins
    CHECK_FALSE(correct_position(out, 10, 20, test_anchors(), {240, 180}, 0.1));
}

TEST_CASE("position correction: exp/clip width arithmetic") {
    AnchorSet anchors = test_anchors();
    anchors.w[1] = 150.0;
    RawOutput out;
    out.class_conf = {0.0, 1.0, 0.0, 0.0, 0.0};
    out.bb_conf = 1.0;
    out.tw = std::log(2.0);
    const CorrectedBox cb = correct_box(out, 0, 0, anchors, {240, 180}, 1);
    CHECK(cb.w == doctest::Approx(240.0));  // clip(300, 0, 240)
    CHECK(cb.gw == 0.0);                    // saturated: no gradient
}

TEST_CASE("algorithm clipping holds for arbitrary correction values") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> wild(-100.0, 100.0);
    const AnchorSet anchors = test_anchors();
    const SensorGeometry g{240, 180};
    for (int i = 0; i < 2000; ++i) {
        RawOutput out;
        out.class_conf = {0.1, 0.5, 0.5, 0.5, 0.5};
        out.bb_conf = 1.0;
        out.tx = wild(rng);
        out.ty = wild(rng);
        out.tw = wild(rng);
        out.th = wild(rng);
        const int cls = 1 + int(rng() % 4);
        const CorrectedBox cb = correct_box(out, int(rng() % 240), int(rng() % 180),
                                            anchors, g, cls);
        CHECK(cb.x >= 0.0);
        CHECK(cb.x <= 239.0);
        CHECK(cb.y >= 0.0);
        CHECK(cb.y <= 179.0);
        CHECK(cb.w >= 0.0);
        CHECK(cb.w <= 240.0);
        CHECK(cb.h >= 0.0);
        CHECK(cb.h <= 180.0);
    }
}

TEST_CASE("loss: perfect prediction, noise gating, lambda scaling") {
    const AnchorSet anchors = test_anchors();
    const SensorGeometry g{240, 180};

    TrainingSample target;
    target.rp_x = 10;
    target.rp_y = 20;
    target.target_class = 1;
    target.target_bb_conf = 1.0;
    target.target_box = {10, 20, 16, 42};

    RawOutput perfect;
    perfect.class_conf = {0.0, 1.0, 0.0, 0.0, 0.0};
    perfect.bb_conf = 1.0;
    CHECK(loss(perfect, target, anchors, g, 5.0).total == doctest::Approx(0.0));

    // noise sample: box error contributes nothing
    TrainingSample noise = target;
    noise.target_class = 0;
    noise.target_bb_conf = 0.0;
    RawOutput off = perfect;
    off.tx = 3.0;
    off.tw = 2.0;
    const LossBreakdown nb = loss(off, noise, anchors, g, 5.0);
    CHECK(nb.loss3 == 0.0);

    // lambda off: total reduces to loss1 + loss2
    RawOutput wrong;
    wrong.class_conf = {0.2, 0.7, 0.1, 0.0, 0.0};
    wrong.bb_conf = 0.4;
    wrong.tx = 0.5;
    const LossBreakdown l0 = loss(wrong, target, anchors, g, 0.0);
    CHECK(l0.total == doctest::Approx(l0.loss1 + l0.loss2));
    const LossBreakdown l5 = loss(wrong, target, anchors, g, 5.0);
    CHECK(l5.total == doctest::Approx(l5.loss1 + l5.loss2 + 5.0 * l5.loss3));
}

TEST_CASE("target assignment: identity, disjoint and best-IoU matching") {
    std::vector<GtBox> gt = {{{10, 10, 20, 20}, 1}, {{100, 100, 30, 30}, 2}};

    const TrainingSample exact = assign_target({{10, 10, 20, 20}, 5}, gt);
    CHECK(exact.target_bb_conf == doctest::Approx(1.0));
    CHECK(exact.target_class == 1);

    const TrainingSample bg = assign_target({{200, 5, 10, 10}, 5}, gt);
    CHECK(bg.target_bb_conf == 0.0);
    CHECK(bg.target_class == 0);

    // overlaps both; takes the larger IoU (90/110 to the right box beats
    // 70/130 to the left one)
    std::vector<GtBox> pair = {{{0, 0, 10, 10}, 1}, {{4, 0, 10, 10}, 2}};
    const TrainingSample best = assign_target({{3, 0, 10, 10}, 5}, pair);
    CHECK(best.target_class == 2);
    CHECK(best.target_bb_conf == doctest::Approx(90.0 / 110.0));
}

TEST_CASE("anchors: per-class means with the global-mean background") {
    std::vector<GtBox> gt = {{{0, 0, 16, 42}, 1},  {{0, 0, 31, 94}, 2},
                             {{0, 0, 15, 21}, 3},  {{0, 0, 22, 50}, 4},
                             {{0, 0, 10, 10}, 4},  {{0, 0, 30, 30}, 4}};
    const AnchorSet a = compute_anchors(gt, 5, {"bg", "car", "bus", "bike", "truck"});
    CHECK(a.w[1] == doctest::Approx(16));
    CHECK(a.h[1] == doctest::Approx(42));
    CHECK(a.w[4] == doctest::Approx((22 + 10 + 30) / 3.0));
    CHECK(a.h[4] == doctest::Approx((50 + 10 + 30) / 3.0));
    // single box per class: anchor equals that box
    CHECK(a.w[2] == 31);
    CHECK(a.h[2] == 94);

    std::vector<GtBox> missing = {{{0, 0, 5, 5}, 1}};
    CHECK_THROWS_WITH_AS(compute_anchors(missing, 5, {}), doctest::Contains("class"),
                         DataError);
}

TEST_CASE("nms: duplicates, disjoint boxes and the greedy chain") {
    auto det = [](double conf, BoundingBox box) {
        Detection d;
        d.bb_conf = conf;
        d.box = box;
        return d;
    };

    SUBCASE("identical boxes: best survives") {
        auto kept = nms({det(0.9, {0, 0, 10, 10}), det(0.8, {0, 0, 10, 10})}, 0.3);
        REQUIRE(kept.size() == 1);
        CHECK(kept[0].bb_conf == 0.9);
    }
    SUBCASE("disjoint boxes: all survive") {
        auto kept = nms({det(0.9, {0, 0, 10, 10}), det(0.8, {50, 50, 10, 10})}, 0.3);
        CHECK(kept.size() == 2);
    }
    SUBCASE("chain: B suppressed by A, C survives") {
        // A-B IoU 0.5, B-C IoU 0.5, A-C IoU 0
        const BoundingBox a{0, 0, 20, 30};
        const BoundingBox b{10, 0, 20, 30};
        const BoundingBox c{20, 0, 20, 30};
        CHECK(iou(a, b) == doctest::Approx(1.0 / 3));
        auto kept = nms({det(0.9, a), det(0.8, b), det(0.7, c)}, 0.3);
        REQUIRE(kept.size() == 2);
        CHECK(kept[0].box == a);
        CHECK(kept[1].box == c);
    }
}

TEST_CASE("nms postcondition on random detection sets") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<Detection> dets;
        const int n = 2 + int(rng() % 12);
        for (int i = 0; i < n; ++i) {
            Detection d;
            d.bb_conf = double(rng() % 1000) / 1000.0;
            d.box = {int(rng() % 200), int(rng() % 140), 1 + int(rng() % 60),
                     1 + int(rng() % 60)};
            dets.push_back(d);
        }
        const auto kept = nms(dets, 0.3);
        for (std::size_t i = 0; i < kept.size(); ++i)
            for (std::size_t j = i + 1; j < kept.size(); ++j)
                CHECK(iou(kept[i].box, kept[j].box) <= 0.3);
    }
}

TEST_CASE("weights file round trip with checksum validation") {
    Network net;
    net.init_weights(17);
    const std::string path =
        (std::filesystem::temp_directory_path() / "weights_test.nndc").string();
    save_weights(net, {240, 180}, path);

    const LoadedWeights lw = load_weights(path);
    CHECK(lw.geometry == SensorGeometry{240, 180});
    REQUIRE(lw.network.parameter_count() == net.parameter_count());
    // f32 storage: loaded values match to single precision
    for (std::size_t i = 0; i < net.params().size(); i += 997)
        CHECK(lw.network.params()[i] == doctest::Approx(net.params()[i]).epsilon(1e-6));

    // corrupting one payload byte trips the checksum
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(100);
        char byte = 0;
        f.read(&byte, 1);
        f.seekp(100);
        byte = char(byte ^ 0x40);
        f.write(&byte, 1);
    }
    CHECK_THROWS_WITH_AS(load_weights(path), doctest::Contains("checksum"), DataError);
}

TEST_CASE("anchors file round trip") {
    const AnchorSet a = test_anchors();
    const std::string path =
        (std::filesystem::temp_directory_path() / "anchors_test.csv").string();
    save_anchors(a, path);
    const AnchorSet b = load_anchors(path);
    REQUIRE(b.size() == a.size());
    CHECK(b.names == a.names);
    CHECK(b.w == a.w);
    CHECK(b.h == a.h);
}
