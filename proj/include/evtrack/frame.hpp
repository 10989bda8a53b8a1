#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "evtrack/events.hpp"
#include "evtrack/geometry.hpp"

namespace evt {

struct OpCounters;  // cost.hpp

/// Bit-packed binary image, row-major, 64-bit words per row run.
class BinaryFrame {
public:
    BinaryFrame() = default;
    BinaryFrame(int width, int height);

    int width() const { return width_; }
    int height() const { return height_; }
    SensorGeometry geometry() const { return {width_, height_}; }

    bool get(int x, int y) const {
        const std::size_t i = index(x, y);
        return (words_[i >> 6] >> (i & 63)) & 1u;
    }
    void set(int x, int y, bool v = true) {
        const std::size_t i = index(x, y);
        if (v)
            words_[i >> 6] |= std::uint64_t(1) << (i & 63);
        else
            words_[i >> 6] &= ~(std::uint64_t(1) << (i & 63));
    }

    /// Number of set bits.
    std::int64_t count() const;
    void clear();
    bool any() const;

    /// In-place logical OR; geometries must match.
    BinaryFrame& operator|=(const BinaryFrame& other);
    bool operator==(const BinaryFrame&) const = default;

private:
    std::size_t index(int x, int y) const {
        return std::size_t(y) * width_ + x;
    }
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint64_t> words_;
};

/// ON/OFF polarity channels of the same geometry.
struct DualFrame {
    BinaryFrame on;
    BinaryFrame off;

    DualFrame() = default;
    DualFrame(int width, int height) : on(width, height), off(width, height) {}
    int width() const { return on.width(); }
    int height() const { return on.height(); }

    BinaryFrame merged() const {
        BinaryFrame m = on;
        m |= off;
        return m;
    }
};

struct FramePlan {
    std::int64_t t_f_us = 66000;
    /// Timestamp of frame 0. Negative means: derive from the first event,
    /// rounded down to a multiple of t_f_us.
    std::int64_t start_us = -1;
    bool emit_empty = false;
};

struct FrameRecord {
    std::int64_t frame_index = 0;
    BinaryFrame single;  // 1B1C
    DualFrame dual;      // 1B2C
    std::size_t event_count = 0;
};

/// Collapses the stream into per-window binary frames. Frame k covers
/// [start + k*t_f, start + (k+1)*t_f). Empty windows are skipped unless
/// plan.emit_empty is set; skipped windows still advance frame_index.
std::vector<FrameRecord> accumulate(const EventStream& stream, const FramePlan& plan);

/// Streaming variant: frames are handed to the sink in index order, one at a
/// time, so peak memory stays independent of recording length.
void accumulate(const EventStream& stream, const FramePlan& plan,
                const std::function<void(FrameRecord&&)>& sink);

/// Binary median filter: output pixel is 1 iff the p x p window sum strictly
/// exceeds floor(p^2/2). Out-of-bounds neighbours count as 0.
BinaryFrame median_filter(const BinaryFrame& frame, int p = 3,
                          OpCounters* counters = nullptr);

/// Logical-OR downscaling by integer factors; trailing partial rows/columns
/// are discarded.
BinaryFrame downsize(const BinaryFrame& frame, int s1, int s2,
                     OpCounters* counters = nullptr);

/// Fixed-size detector input: per axis, content larger than `side` is cropped
/// around the box centroid (clamped to the frame); smaller content is centred
/// with symmetric zero padding, odd leftover going to the bottom/right.
DualFrame extract_patch(const DualFrame& frame, const BoundingBox& box,
                        int side = 42);

void write_pgm(const BinaryFrame& frame, const std::string& path);
/// Writes <base>.on.pgm and <base>.off.pgm.
void write_pgm_pair(const DualFrame& frame, const std::string& base_path);
BinaryFrame read_pgm(const std::string& path);

}  // namespace evt
