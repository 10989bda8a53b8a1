#include "evtrack/frame.hpp"

#include <bit>
#include <fstream>

#include "evtrack/cost.hpp"
#include "evtrack/errors.hpp"

namespace evt {

BinaryFrame::BinaryFrame(int width, int height) : width_(width), height_(height) {
    if (width < 1 || height < 1) throw DataError("frame geometry must be at least 1x1");
    words_.assign((std::size_t(width) * height + 63) / 64, 0);
}

std::int64_t BinaryFrame::count() const {
    std::int64_t n = 0;
    for (std::uint64_t w : words_) n += std::popcount(w);
    return n;
}

void BinaryFrame::clear() {
    std::fill(words_.begin(), words_.end(), 0);
}

bool BinaryFrame::any() const {
    for (std::uint64_t w : words_)
        if (w) return true;
    return false;
}

BinaryFrame& BinaryFrame::operator|=(const BinaryFrame& other) {
    if (width_ != other.width_ || height_ != other.height_)
        throw InternalError("frame OR with mismatched geometry");
    for (std::size_t i = 0; i < words_.size(); ++i) words_[i] |= other.words_[i];
    return *this;
}

void accumulate(const EventStream& stream, const FramePlan& plan,
                const std::function<void(FrameRecord&&)>& sink) {
    if (plan.t_f_us <= 0) throw DataError("frame duration must be positive");
    if (stream.events.empty()) return;

    const std::int64_t t_f = plan.t_f_us;
    const std::int64_t start =
        plan.start_us >= 0 ? plan.start_us : (stream.events.front().t / t_f) * t_f;

    const int w = stream.geometry.width, h = stream.geometry.height;
    FrameRecord rec;
    std::int64_t current = -1;

    auto open_frame = [&](std::int64_t k) {
        rec.frame_index = k;
        rec.single = BinaryFrame(w, h);
        rec.dual = DualFrame(w, h);
        rec.event_count = 0;
    };
    auto flush = [&]() {
        if (current >= 0 && (rec.event_count > 0 || plan.emit_empty)) sink(std::move(rec));
    };

    for (const Event& e : stream.events) {
        if (e.t < start) continue;
        const std::int64_t k = (e.t - start) / t_f;
        if (k != current) {
            flush();
            if (plan.emit_empty && current >= 0) {
                for (std::int64_t gap = current + 1; gap < k; ++gap) {
                    open_frame(gap);
                    sink(std::move(rec));
                }
            }
            open_frame(k);
            current = k;
        }
        rec.single.set(e.x, e.y);
        if (e.p == Polarity::On)
            rec.dual.on.set(e.x, e.y);
        else
            rec.dual.off.set(e.x, e.y);
        ++rec.event_count;
    }
    flush();
}

std::vector<FrameRecord> accumulate(const EventStream& stream, const FramePlan& plan) {
    std::vector<FrameRecord> out;
    accumulate(stream, plan, [&](FrameRecord&& rec) { out.push_back(std::move(rec)); });
    return out;
}

BinaryFrame median_filter(const BinaryFrame& frame, int p, OpCounters* counters) {
    if (p < 3 || p % 2 == 0) throw DataError("median window must be odd and >= 3");
    const int w = frame.width(), h = frame.height();
    const int r = p / 2;
    const int threshold = (p * p) / 2;
    BinaryFrame out(w, h);
    std::uint64_t active = 0;

#pragma omp parallel for schedule(static) reduction(+ : active)
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            int sum = 0;
            const int y0 = std::max(0, y - r), y1 = std::min(h - 1, y + r);
            const int x0 = std::max(0, x - r), x1 = std::min(w - 1, x + r);
            for (int yy = y0; yy <= y1; ++yy)
                for (int xx = x0; xx <= x1; ++xx) sum += frame.get(xx, yy);
            if (sum > threshold) {
                out.set(x, y);
                active += 1;
            }
        }
    }
    if (counters) {
        // one scan op per pixel plus window reads, sum and compare on
        // pixels whose window holds any activity
        counters->median_ops +=
            std::uint64_t(w) * h + std::uint64_t(p) * p * 2 * frame.count() + active;
    }
    return out;
}

BinaryFrame downsize(const BinaryFrame& frame, int s1, int s2, OpCounters* counters) {
    if (s1 < 1 || s2 < 1) throw DataError("scale factors must be at least 1");
    const int ow = frame.width() / s1;
    const int oh = frame.height() / s2;
    if (ow < 1 || oh < 1) throw DataError("downsize factors exceed the frame");
    BinaryFrame out(ow, oh);

#pragma omp parallel for schedule(static)
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            bool any = false;
            for (int dy = 0; dy < s2 && !any; ++dy)
                for (int dx = 0; dx < s1; ++dx)
                    if (frame.get(ox * s1 + dx, oy * s2 + dy)) {
                        any = true;
                        break;
                    }
            if (any) out.set(ox, oy);
        }
    }
    if (counters)
        counters->downsize_ops += std::uint64_t(frame.width()) * frame.height();
    return out;
}

namespace {

/// Per-axis patch window: source start, destination start, copy length.
struct AxisPlan {
    int src = 0;
    int dst = 0;
    int len = 0;
};

AxisPlan plan_axis(int box_pos, int box_len, int frame_len, int side) {
    AxisPlan plan;
    if (box_len > side) {
        // centroid crop clamped to the frame
        int start = box_pos + (box_len - side) / 2;
        start = std::clamp(start, 0, std::max(0, frame_len - side));
        plan.src = start;
        plan.dst = 0;
        plan.len = std::min(side, frame_len - start);
    } else {
        // centred copy with symmetric padding, odd leftover to the high side
        plan.dst = (side - box_len) / 2;
        plan.src = box_pos;
        plan.len = box_len;
        if (plan.src < 0) {  // clip content that sticks out of the frame
            plan.dst -= plan.src;
            plan.len += plan.src;
            plan.src = 0;
        }
        plan.len = std::min(plan.len, frame_len - plan.src);
    }
    return plan;
}

void copy_channel(const BinaryFrame& src, BinaryFrame& dst, const AxisPlan& px,
                  const AxisPlan& py) {
    for (int y = 0; y < py.len; ++y)
        for (int x = 0; x < px.len; ++x)
            if (src.get(px.src + x, py.src + y)) dst.set(px.dst + x, py.dst + y);
}

}  // namespace

DualFrame extract_patch(const DualFrame& frame, const BoundingBox& box, int side) {
    if (!box.valid()) throw DataError("degenerate box for patch extraction");
    if (intersection_area(box, {0, 0, frame.width(), frame.height()}) == 0)
        throw DataError("patch box does not intersect the frame");
    const AxisPlan px = plan_axis(box.x, box.w, frame.width(), side);
    const AxisPlan py = plan_axis(box.y, box.h, frame.height(), side);
    DualFrame patch(side, side);
    if (px.len > 0 && py.len > 0) {
        copy_channel(frame.on, patch.on, px, py);
        copy_channel(frame.off, patch.off, px, py);
    }
    return patch;
}

void write_pgm(const BinaryFrame& frame, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << "P5\n" << frame.width() << ' ' << frame.height() << "\n255\n";
    std::vector<unsigned char> row(frame.width());
    for (int y = 0; y < frame.height(); ++y) {
        for (int x = 0; x < frame.width(); ++x) row[x] = frame.get(x, y) ? 255 : 0;
        out.write(reinterpret_cast<const char*>(row.data()), row.size());
    }
    if (!out) throw DataError("write failure on " + path);
}

void write_pgm_pair(const DualFrame& frame, const std::string& base_path) {
    write_pgm(frame.on, base_path + ".on.pgm");
    write_pgm(frame.off, base_path + ".off.pgm");
}

BinaryFrame read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    in >> magic >> w >> h >> maxval;
    if (magic != "P5" || w < 1 || h < 1) throw DataError(path + ": not a P5 PGM");
    in.get();  // single whitespace after maxval
    BinaryFrame frame(w, h);
    std::vector<unsigned char> row(w);
    for (int y = 0; y < h; ++y) {
        in.read(reinterpret_cast<char*>(row.data()), row.size());
        if (!in) throw DataError(path + ": truncated pixel data");
        for (int x = 0; x < w; ++x)
            if (row[x] >= 128) frame.set(x, y);
    }
    return frame;
}

}  // namespace evt
