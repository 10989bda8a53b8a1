#include "evtrack/regionprop.hpp"

#include <algorithm>
#include <numeric>

#include "evtrack/cost.hpp"
#include "evtrack/errors.hpp"

namespace evt {

namespace {

struct UnionFind {
    std::vector<int> parent;

    explicit UnionFind(std::size_t capacity) { parent.reserve(capacity); }
    int make() {
        parent.push_back(int(parent.size()));
        return parent.back();
    }
    int find(int a) {
        while (parent[a] != a) {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        return a;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

struct Corners {
    int min_x, min_y, max_x, max_y;
    std::int64_t pixels = 0;
};

void sort_and_cap(std::vector<RegionProposal>& rps, int max_rp,
                  bool by_box_area) {
    std::sort(rps.begin(), rps.end(), [&](const RegionProposal& a, const RegionProposal& b) {
        const std::int64_t ka = by_box_area ? a.box.area() : a.pixel_count;
        const std::int64_t kb = by_box_area ? b.box.area() : b.pixel_count;
        if (ka != kb) return ka > kb;
        if (a.box.y != b.box.y) return a.box.y < b.box.y;
        return a.box.x < b.box.x;
    });
    if (max_rp >= 0 && int(rps.size()) > max_rp) rps.resize(std::size_t(max_rp));
}

}  // namespace

std::vector<RegionProposal> ccl_rp(const BinaryFrame& downsized, int s1, int s2,
                                   int max_rp, OpCounters* counters) {
    const int w = downsized.width(), h = downsized.height();
    // worst case: an inactive pixel between every two active ones
    UnionFind uf((std::size_t(w) * h + 1) / 2);
    std::vector<int> labels(std::size_t(w) * h, -1);
    std::uint64_t ops = 0;

    // first pass: provisional labels from the four already-visited
    // 8-neighbours (W, NW, N, NE), merging equivalences as they appear
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            ops += 1;  // activity test
            if (!downsized.get(x, y)) continue;
            int label = -1;
            const int nbr_x[4] = {x - 1, x - 1, x, x + 1};
            const int nbr_y[4] = {y, y - 1, y - 1, y - 1};
            for (int n = 0; n < 4; ++n) {
                ops += 1;
                if (nbr_x[n] < 0 || nbr_x[n] >= w || nbr_y[n] < 0) continue;
                const int nl = labels[std::size_t(nbr_y[n]) * w + nbr_x[n]];
                if (nl < 0) continue;
                if (label < 0)
                    label = nl;
                else if (uf.find(label) != uf.find(nl)) {
                    uf.unite(label, nl);
                    ops += 1;
                }
            }
            if (label < 0) label = uf.make();
            labels[std::size_t(y) * w + x] = label;
            ops += 1;  // label/corner table update
        }
    }

    // second pass: resolve equivalences, fold corners and pixel counts
    std::vector<Corners> corners(uf.parent.size(),
                                 Corners{w, h, -1, -1, 0});
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int l = labels[std::size_t(y) * w + x];
            if (l < 0) continue;
            ops += 1;
            Corners& c = corners[std::size_t(uf.find(l))];
            c.min_x = std::min(c.min_x, x);
            c.min_y = std::min(c.min_y, y);
            c.max_x = std::max(c.max_x, x);
            c.max_y = std::max(c.max_y, y);
            c.pixels += 1;
        }
    }
    if (counters) counters->ccl_ops += ops;

    std::vector<RegionProposal> rps;
    for (const Corners& c : corners) {
        if (c.pixels == 0) continue;
        RegionProposal rp;
        rp.box = {c.min_x * s1, c.min_y * s2, (c.max_x - c.min_x + 1) * s1,
                  (c.max_y - c.min_y + 1) * s2};
        rp.pixel_count = c.pixels;
        rps.push_back(rp);
    }
    sort_and_cap(rps, max_rp, /*by_box_area=*/false);
    return rps;
}

namespace {

std::vector<std::pair<int, int>> segments(const std::vector<int>& hist, int threshold) {
    std::vector<std::pair<int, int>> segs;
    int start = -1;
    for (int i = 0; i <= int(hist.size()); ++i) {
        const bool on = i < int(hist.size()) && hist[std::size_t(i)] >= threshold;
        if (on && start < 0) start = i;
        if (!on && start >= 0) {
            segs.emplace_back(start, i - start);
            start = -1;
        }
    }
    return segs;
}

}  // namespace

std::vector<RegionProposal> hist_rp(const BinaryFrame& downsized, int s1, int s2,
                                    int threshold, int max_rp, OpCounters* counters) {
    const int w = downsized.width(), h = downsized.height();
    std::vector<int> hist_x(std::size_t(w), 0), hist_y(std::size_t(h), 0);
    std::uint64_t ops = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            ops += 1;
            if (downsized.get(x, y)) {
                hist_x[std::size_t(x)] += 1;
                hist_y[std::size_t(y)] += 1;
                ops += 2;
            }
        }
    const auto segs_x = segments(hist_x, threshold);
    const auto segs_y = segments(hist_y, threshold);

    std::vector<RegionProposal> rps;
    for (const auto& [sy, hy] : segs_y) {
        for (const auto& [sx, wx] : segs_x) {
            std::int64_t active = 0;
            for (int y = sy; y < sy + hy; ++y)
                for (int x = sx; x < sx + wx; ++x) {
                    ops += 1;
                    if (downsized.get(x, y)) ++active;
                }
            if (active == 0) continue;
            RegionProposal rp;
            rp.box = {sx * s1, sy * s2, wx * s1, hy * s2};
            rp.pixel_count = active;
            rps.push_back(rp);
        }
    }
    if (counters) counters->hist_ops += ops;
    sort_and_cap(rps, max_rp, /*by_box_area=*/true);
    return rps;
}

ActivePixelFactor active_pixel_factor(const BinaryFrame& downsized, double weight) {
    ActivePixelFactor f;
    const double area = double(downsized.width()) * downsized.height();
    if (area <= 0) return f;
    f.active_ratio = double(downsized.count()) / area;
    f.alpha = weight * f.active_ratio;
    return f;
}

void append_proposal_csv(std::string& out, std::int64_t frame_idx,
                         const std::vector<RegionProposal>& rps) {
    for (const RegionProposal& rp : rps) {
        out += std::to_string(frame_idx);
        out += ',';
        out += std::to_string(rp.box.x);
        out += ',';
        out += std::to_string(rp.box.y);
        out += ',';
        out += std::to_string(rp.box.w);
        out += ',';
        out += std::to_string(rp.box.h);
        out += ',';
        out += std::to_string(rp.pixel_count);
        out += '\n';
    }
}

}  // namespace evt
