#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "doctest.h"
#include "evtrack/errors.hpp"
#include "evtrack/synth.hpp"

using namespace evt;

TEST_CASE("static object emits no edge or interior events") {
    SceneSpec scene;
    scene.duration_s = 2.0;
    scene.noise_rate = 0.0;
    ObjectSpec o;
    o.velocity = 0.0;
    o.entry_x = 100;
    o.lane_y = 60;
    scene.objects = {o};
    const GeneratedScene gen = generate(scene);
    CHECK(gen.stream.empty());
    CHECK_FALSE(gen.annotations.empty());  // the box is still annotated
}

TEST_CASE("generation is deterministic: same seed, same bytes") {
    SceneSpec scene = occlusion_scene(5);
    scene.duration_s = 1.5;
    const GeneratedScene a = generate(scene);
    const GeneratedScene b = generate(scene);
    CHECK(a.stream.events == b.stream.events);
    REQUIRE(a.annotations.size() == b.annotations.size());

    scene.seed = 6;
    const GeneratedScene c = generate(scene);
    CHECK(a.stream.events != c.stream.events);
}

TEST_CASE("single car kinematics: 48 annotated boundaries, ~5 px per frame") {
    SceneSpec scene;
    scene.duration_s = 3.2;
    scene.noise_rate = 0.0;
    ObjectSpec car;
    car.class_id = 1;
    car.w = 16;
    car.h = 42;
    car.entry_x = -4;
    car.velocity = 75.0;
    car.lane_y = 60;
    scene.objects = {car};
    const GeneratedScene gen = generate(scene);

    // independent count of boundaries where at least half the box is in frame
    std::size_t expected = 0;
    for (std::int64_t k = 0;; ++k) {
        const double t = double(k * scene.t_f_us) * 1e-6;
        if (t > scene.duration_s) break;
        const BoundingBox box = object_box_at(car, t);
        if (in_frame_fraction(box, scene.geometry) >= 0.5) ++expected;
    }
    CHECK(gen.annotations.size() == expected);
    CHECK(expected == 48);

    // x advances by roughly 5 px per 66 ms frame once fully in frame
    // (edge-clipped boxes pin their corner to the border)
    for (std::size_t i = 1; i < gen.annotations.size(); ++i) {
        if (gen.annotations[i].box.w != car.w || gen.annotations[i - 1].box.w != car.w)
            continue;
        const int dx = gen.annotations[i].box.x - gen.annotations[i - 1].box.x;
        CHECK(dx >= 4);
        CHECK(dx <= 6);
    }
}

TEST_CASE("all events lie inside dilated object boxes when noise is off") {
    SceneSpec scene = occlusion_scene(9);
    scene.duration_s = 2.0;
    scene.noise_rate = 0.0;
    const GeneratedScene gen = generate(scene);
    REQUIRE(!gen.stream.empty());
    for (const Event& e : gen.stream.events) {
        const double t_s = double(e.t) * 1e-6;
        bool inside = false;
        for (const ObjectSpec& o : scene.objects) {
            if (t_s < o.entry_time_s) continue;
            BoundingBox box = object_box_at(o, t_s);
            box.x -= 1;
            box.y -= 1;
            box.w += 2;
            box.h += 2;
            if (e.x >= box.x && e.x < box.right() && e.y >= box.y && e.y < box.bottom()) {
                inside = true;
                break;
            }
        }
        CHECK(inside);
    }
}

TEST_CASE("streams validate and are time-sorted") {
    SceneSpec scene = occlusion_scene(3);
    scene.duration_s = 1.0;
    const GeneratedScene gen = generate(scene);
    validate_stream(gen.stream);  // throws on violation
    CHECK(gen.stream.size() > 100);
}

TEST_CASE("event volume stays within 3 sigma of the analytic mean") {
    SceneSpec scene;
    scene.duration_s = 2.0;
    scene.noise_rate = 0.5;
    ObjectSpec o;
    o.entry_x = 10;
    o.velocity = 50;
    o.lane_y = 40;
    scene.objects = {o};

    const double mean = expected_event_count(scene);
    const double sigma = std::sqrt(mean);  // Poisson
    double worst = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        scene.seed = seed;
        const double n = double(generate(scene).stream.size());
        worst = std::max(worst, std::abs(n - mean) / sigma);
    }
    CHECK(worst < 3.0);
}

TEST_CASE("occlusion scene: at least three overlapping GT frames") {
    const SceneSpec scene = occlusion_scene(1);
    const GeneratedScene gen = generate(scene);

    std::map<std::int64_t, std::vector<Annotation>> by_frame;
    for (const Annotation& a : gen.annotations) by_frame[a.frame_idx].push_back(a);
    int overlap_frames = 0;
    for (const auto& [f, rows] : by_frame)
        if (rows.size() == 2 && iou(rows[0].box, rows[1].box) > 0.0) ++overlap_frames;
    CHECK(overlap_frames >= 3);

    // identities swap their left-to-right order across the crossing
    const auto& first = by_frame.begin()->second;
    const auto& last = by_frame.rbegin()->second;
    REQUIRE(first.size() == 2);
    const Annotation* a0 = &first[0];
    const Annotation* b0 = &first[1];
    if (a0->track_id != 0) std::swap(a0, b0);
    bool found_late = false;
    for (auto it = by_frame.rbegin(); it != by_frame.rend(); ++it) {
        if (it->second.size() == 2) {
            const Annotation* a1 = &it->second[0];
            const Annotation* b1 = &it->second[1];
            if (a1->track_id != 0) std::swap(a1, b1);
            CHECK(((a0->box.x < b0->box.x) != (a1->box.x < b1->box.x)));
            found_late = true;
            break;
        }
    }
    CHECK(found_late);
    (void)last;

    // zero velocities: the degenerate control has no overlap
    SceneSpec still = occlusion_scene(1);
    still.objects[0].velocity = 0;
    still.objects[1].velocity = 0;
    const GeneratedScene still_gen = generate(still);
    by_frame.clear();
    for (const Annotation& a : still_gen.annotations) by_frame[a.frame_idx].push_back(a);
    for (const auto& [f, rows] : by_frame)
        if (rows.size() == 2) CHECK(iou(rows[0].box, rows[1].box) == 0.0);
}

TEST_CASE("scene config parsing with repeated object blocks") {
    const std::string path =
        (std::filesystem::temp_directory_path() / "scene_test.cfg").string();
    std::ofstream out(path);
    out << "[scene]\n"
           "width = 240\n"
           "height = 180\n"
           "duration_s = 2.5\n"
           "seed = 11\n"
           "noise_rate = 0.0\n"
           "[object]\n"
           "class = 1\n"
           "w = 16\n"
           "h = 42\n"
           "entry_s = 0.1\n"
           "entry_x = -16\n"
           "vx = 75\n"
           "lane_y = 60\n"
           "[object]\n"
           "class = 2\n"
           "w = 31\n"
           "h = 94\n"
           "lane_y = 20\n";
    out.close();
    const SceneSpec scene = read_scene_config(path);
    CHECK(scene.duration_s == 2.5);
    CHECK(scene.seed == 11);
    REQUIRE(scene.objects.size() == 2);
    CHECK(scene.objects[0].velocity == 75);
    CHECK(scene.objects[1].class_id == 2);

    std::ofstream bad(path);
    bad << "[scene]\nwidht = 240\n";
    bad.close();
    CHECK_THROWS_AS(read_scene_config(path), ConfigError);
}
