#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evtrack/eval.hpp"
#include "evtrack/events.hpp"
#include "evtrack/geometry.hpp"

namespace evt {

/// One moving rectangle in a lane. Sizes default to the mean object sizes of
/// the reference recording site (car/van 16x42, bus 31x94, bike 15x21,
/// truck 22x50).
struct ObjectSpec {
    int class_id = 1;
    int w = 16;
    int h = 42;
    double entry_time_s = 0.0;
    double entry_x = 0.0;     // x position at entry time
    double velocity = 75.0;   // pixels/second, horizontal
    int lane_y = 60;          // top edge
};

struct SceneSpec {
    SensorGeometry geometry{240, 180};
    double duration_s = 10.0;
    std::vector<ObjectSpec> objects;
    double edge_event_rate = 3000.0;     // events per boundary pixel per second of motion
    double interior_event_rate = 300.0;  // same units, interior pixels
    double noise_rate = 0.25;            // events per pixel per second
    std::uint64_t seed = 1;
    std::int64_t t_f_us = 66000;         // GT annotation period
    double visibility_threshold = 0.5;   // min in-frame area fraction for a GT row
};

struct GeneratedScene {
    EventStream stream;
    AnnotationList annotations;
};

/// Simulates the scene at 1 ms ticks: Poisson ON events on the leading edge,
/// OFF events on the trailing edge, mixed-polarity interior and background
/// noise. Deterministic for a fixed seed.
GeneratedScene generate(const SceneSpec& scene);

/// Expected number of events produced by `generate` (Poisson means summed).
double expected_event_count(const SceneSpec& scene);

/// Two objects in opposing lanes whose boxes overlap for at least three
/// frames mid-recording.
SceneSpec occlusion_scene(std::uint64_t seed = 1);

/// Exact object box at time t, unclipped; in_frame_fraction reports the
/// visible area share.
BoundingBox object_box_at(const ObjectSpec& o, double t_s);
double in_frame_fraction(const BoundingBox& box, const SensorGeometry& g);

/// Plain-text scene description: `key=value` lines with one [scene] section
/// and repeated [object] sections.
SceneSpec read_scene_config(const std::string& path);

}  // namespace evt
