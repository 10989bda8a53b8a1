#include "evtrack/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "evtrack/config.hpp"
#include "evtrack/errors.hpp"

namespace evt {

namespace {

constexpr double kTickSeconds = 1e-3;

/// Knuth-style Poisson draw from explicit uniforms, so the byte stream is
/// reproducible across standard libraries.
int poisson_draw(std::mt19937_64& rng, double mean) {
    if (mean <= 0) return 0;
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double limit = std::exp(-mean);
    int k = 0;
    double prod = uni(rng);
    while (prod > limit) {
        ++k;
        prod *= uni(rng);
    }
    return k;
}

bool active_at(const ObjectSpec& o, double t_s, double duration_s) {
    return t_s >= o.entry_time_s && t_s <= duration_s;
}

}  // namespace

BoundingBox object_box_at(const ObjectSpec& o, double t_s) {
    const double x = o.entry_x + o.velocity * (t_s - o.entry_time_s);
    return {int(std::lround(x)), o.lane_y, o.w, o.h};
}

double in_frame_fraction(const BoundingBox& box, const SensorGeometry& g) {
    if (box.area() <= 0) return 0.0;
    return double(intersection_area(box, {0, 0, g.width, g.height})) / double(box.area());
}

GeneratedScene generate(const SceneSpec& scene) {
    GeneratedScene out;
    out.stream.geometry = scene.geometry;
    std::mt19937_64 rng(scene.seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    const std::int64_t ticks = std::llround(scene.duration_s / kTickSeconds);
    const SensorGeometry& g = scene.geometry;
    std::vector<Event> tick_events;

    for (std::int64_t tick = 0; tick < ticks; ++tick) {
        const double t_s = double(tick) * kTickSeconds;
        const std::int64_t t0_us = tick * 1000;
        tick_events.clear();

        auto emit = [&](int x, int y, Polarity p) {
            if (!g.contains(x, y)) return;
            const std::int64_t t = t0_us + std::int64_t(uni(rng) * 1000.0);
            tick_events.push_back({t, x, y, p});
        };

        for (const ObjectSpec& o : scene.objects) {
            if (!active_at(o, t_s, scene.duration_s)) continue;
            if (o.velocity == 0.0) continue;  // no contrast change, no events
            const BoundingBox box = object_box_at(o, t_s);
            const bool rightward = o.velocity > 0;
            const int lead_x = rightward ? box.right() - 1 : box.x;
            const int trail_x = rightward ? box.x : box.right() - 1;

            const double edge_mean = scene.edge_event_rate * kTickSeconds;
            for (int y = box.y; y < box.bottom(); ++y) {
                for (int k = poisson_draw(rng, edge_mean); k > 0; --k)
                    emit(lead_x, y, Polarity::On);
                for (int k = poisson_draw(rng, edge_mean); k > 0; --k)
                    emit(trail_x, y, Polarity::Off);
            }
            const double interior_mean = scene.interior_event_rate * kTickSeconds;
            if (interior_mean > 0) {
                for (int y = box.y; y < box.bottom(); ++y)
                    for (int x = box.x + 1; x < box.right() - 1; ++x)
                        for (int k = poisson_draw(rng, interior_mean); k > 0; --k)
                            emit(x, y, uni(rng) < 0.5 ? Polarity::On : Polarity::Off);
            }
        }

        if (scene.noise_rate > 0) {
            const double noise_mean =
                scene.noise_rate * kTickSeconds * double(g.area());
            for (int k = poisson_draw(rng, noise_mean); k > 0; --k) {
                const int x = int(uni(rng) * g.width);
                const int y = int(uni(rng) * g.height);
                emit(std::min(x, g.width - 1), std::min(y, g.height - 1),
                     uni(rng) < 0.5 ? Polarity::On : Polarity::Off);
            }
        }

        std::stable_sort(tick_events.begin(), tick_events.end(),
                         [](const Event& a, const Event& b) { return a.t < b.t; });
        out.stream.events.insert(out.stream.events.end(), tick_events.begin(),
                                 tick_events.end());
    }

    // ground truth at every frame boundary while sufficiently in frame
    const std::int64_t frames = std::llround(scene.duration_s * 1e6) / scene.t_f_us + 1;
    for (std::int64_t k = 0; k < frames; ++k) {
        const double t_s = double(k * scene.t_f_us) * 1e-6;
        if (t_s > scene.duration_s) break;
        for (std::size_t oi = 0; oi < scene.objects.size(); ++oi) {
            const ObjectSpec& o = scene.objects[oi];
            if (!active_at(o, t_s, scene.duration_s)) continue;
            const BoundingBox box = object_box_at(o, t_s);
            if (in_frame_fraction(box, g) < scene.visibility_threshold) continue;
            Annotation a;
            a.frame_idx = k;
            a.track_id = int(oi);
            a.class_id = o.class_id;
            a.box = box.clipped(g);  // annotators label the visible part
            out.annotations.push_back(a);
        }
    }
    return out;
}

double expected_event_count(const SceneSpec& scene) {
    const std::int64_t ticks = std::llround(scene.duration_s / kTickSeconds);
    double mean = 0.0;
    for (std::int64_t tick = 0; tick < ticks; ++tick) {
        const double t_s = double(tick) * kTickSeconds;
        for (const ObjectSpec& o : scene.objects) {
            if (!active_at(o, t_s, scene.duration_s) || o.velocity == 0.0) continue;
            const BoundingBox box = object_box_at(o, t_s);
            // count only the in-frame share emit() would keep
            const BoundingBox sensor{0, 0, scene.geometry.width, scene.geometry.height};
            const bool rightward = o.velocity > 0;
            const int lead_x = rightward ? box.right() - 1 : box.x;
            const int trail_x = rightward ? box.x : box.right() - 1;
            const int rows = std::max(
                0, std::min(box.bottom(), sensor.bottom()) - std::max(box.y, sensor.y));
            const auto col_in = [&](int x) { return x >= 0 && x < sensor.w; };
            mean += scene.edge_event_rate * kTickSeconds * rows *
                    (col_in(lead_x) + col_in(trail_x));
            const BoundingBox interior{box.x + 1, box.y, std::max(0, box.w - 2), box.h};
            mean += scene.interior_event_rate * kTickSeconds *
                    double(intersection_area(interior, sensor));
        }
        mean += scene.noise_rate * kTickSeconds * double(scene.geometry.area());
    }
    return mean;
}

SceneSpec occlusion_scene(std::uint64_t seed) {
    SceneSpec s;
    s.duration_s = 6.0;
    s.seed = seed;
    s.noise_rate = 0.1;

    ObjectSpec a;  // car moving right, half visible at the start
    a.class_id = 1;
    a.w = 16;
    a.h = 42;
    a.entry_time_s = 0.0;
    a.entry_x = -8;
    a.velocity = 60.0;
    a.lane_y = 56;

    ObjectSpec b;  // truck moving left in the opposing lane
    b.class_id = 4;
    b.w = 22;
    b.h = 50;
    b.entry_time_s = 0.0;
    b.entry_x = 229;
    b.velocity = -60.0;
    b.lane_y = 72;

    s.objects = {a, b};
    return s;
}

SceneSpec read_scene_config(const std::string& path) {
    const ConfigFile file = read_config(path);
    SceneSpec scene;
    bool saw_scene = false;

    for (const ConfigSection& sec : file.sections) {
        if (sec.name == "scene") {
            if (saw_scene) throw ConfigError(path + ": duplicate [scene] section");
            saw_scene = true;
            for (const auto& key : sec.order) {
                const std::string& v = sec.values.at(key);
                if (key == "width")
                    scene.geometry.width = std::stoi(v);
                else if (key == "height")
                    scene.geometry.height = std::stoi(v);
                else if (key == "duration_s")
                    scene.duration_s = std::stod(v);
                else if (key == "edge_rate")
                    scene.edge_event_rate = std::stod(v);
                else if (key == "interior_rate")
                    scene.interior_event_rate = std::stod(v);
                else if (key == "noise_rate")
                    scene.noise_rate = std::stod(v);
                else if (key == "seed")
                    scene.seed = std::stoull(v);
                else if (key == "t_f_us")
                    scene.t_f_us = std::stoll(v);
                else if (key == "visibility_threshold")
                    scene.visibility_threshold = std::stod(v);
                else
                    throw ConfigError(path + ": unknown [scene] key '" + key + "'");
            }
        } else if (sec.name == "object") {
            ObjectSpec o;
            for (const auto& key : sec.order) {
                const std::string& v = sec.values.at(key);
                if (key == "class")
                    o.class_id = std::stoi(v);
                else if (key == "w")
                    o.w = std::stoi(v);
                else if (key == "h")
                    o.h = std::stoi(v);
                else if (key == "entry_s")
                    o.entry_time_s = std::stod(v);
                else if (key == "entry_x")
                    o.entry_x = std::stod(v);
                else if (key == "vx")
                    o.velocity = std::stod(v);
                else if (key == "lane_y")
                    o.lane_y = std::stoi(v);
                else
                    throw ConfigError(path + ": unknown [object] key '" + key + "'");
            }
            scene.objects.push_back(o);
        } else {
            throw ConfigError(path + ": unknown section [" + sec.name + "]");
        }
    }
    if (!saw_scene) throw ConfigError(path + ": missing [scene] section");
    return scene;
}

}  // namespace evt
