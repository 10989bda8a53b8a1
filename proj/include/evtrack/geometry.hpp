#pragma once

#include <algorithm>
#include <cstdint>

namespace evt {

struct SensorGeometry {
    int width = 240;
    int height = 180;

    bool contains(int x, int y) const {
        return x >= 0 && y >= 0 && x < width && y < height;
    }
    std::int64_t area() const { return std::int64_t(width) * height; }
    bool operator==(const SensorGeometry&) const = default;
};

/// Axis-aligned box: upper-left corner (x, y), size (w, h), in pixels.
struct BoundingBox {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;

    int right() const { return x + w; }
    int bottom() const { return y + h; }
    std::int64_t area() const { return std::int64_t(w) * h; }
    bool valid() const { return w >= 1 && h >= 1; }
    bool operator==(const BoundingBox&) const = default;

    bool inside(const SensorGeometry& g) const {
        return x >= 0 && y >= 0 && right() <= g.width && bottom() <= g.height;
    }

    /// Clamps the box to the sensor rectangle, keeping at least 1x1.
    BoundingBox clamped(const SensorGeometry& g) const {
        BoundingBox b = *this;
        b.w = std::clamp(b.w, 1, g.width);
        b.h = std::clamp(b.h, 1, g.height);
        b.x = std::clamp(b.x, 0, g.width - b.w);
        b.y = std::clamp(b.y, 0, g.height - b.h);
        return b;
    }

    /// Intersection with the sensor rectangle; zero-sized when disjoint.
    BoundingBox clipped(const SensorGeometry& g) const {
        const int x0 = std::max(x, 0);
        const int y0 = std::max(y, 0);
        const int x1 = std::min(right(), g.width);
        const int y1 = std::min(bottom(), g.height);
        return {x0, y0, std::max(0, x1 - x0), std::max(0, y1 - y0)};
    }
};

inline std::int64_t intersection_area(const BoundingBox& a, const BoundingBox& b) {
    const int ix = std::min(a.right(), b.right()) - std::max(a.x, b.x);
    const int iy = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
    if (ix <= 0 || iy <= 0) return 0;
    return std::int64_t(ix) * iy;
}

inline BoundingBox enclosing(const BoundingBox& a, const BoundingBox& b) {
    const int x0 = std::min(a.x, b.x);
    const int y0 = std::min(a.y, b.y);
    const int x1 = std::max(a.right(), b.right());
    const int y1 = std::max(a.bottom(), b.bottom());
    return {x0, y0, x1 - x0, y1 - y0};
}

/// Intersection-over-union of two boxes; 0 for disjoint or degenerate input.
inline double iou(const BoundingBox& a, const BoundingBox& b) {
    const std::int64_t inter = intersection_area(a, b);
    const std::int64_t uni = a.area() + b.area() - inter;
    if (uni <= 0) return 0.0;
    return double(inter) / double(uni);
}

}  // namespace evt
