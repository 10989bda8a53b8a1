#include "evtrack/reference.hpp"

#include <algorithm>
#include <queue>

namespace evt {
namespace reference {

BinaryFrame median_filter(const BinaryFrame& frame, int p) {
    const int w = frame.width(), h = frame.height();
    const int r = p / 2;
    BinaryFrame out(w, h);
    std::vector<int> window;
    window.reserve(std::size_t(p) * p);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            window.clear();
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    const int xx = x + dx, yy = y + dy;
                    const bool v = xx >= 0 && yy >= 0 && xx < w && yy < h &&
                                   frame.get(xx, yy);
                    window.push_back(v ? 1 : 0);
                }
            std::sort(window.begin(), window.end());
            if (window[window.size() / 2]) out.set(x, y);
        }
    }
    return out;
}

std::vector<RegionProposal> flood_fill_components(const BinaryFrame& frame) {
    const int w = frame.width(), h = frame.height();
    std::vector<bool> seen(std::size_t(w) * h, false);
    std::vector<RegionProposal> out;
    for (int sy = 0; sy < h; ++sy) {
        for (int sx = 0; sx < w; ++sx) {
            if (!frame.get(sx, sy) || seen[std::size_t(sy) * w + sx]) continue;
            RegionProposal rp;
            int min_x = sx, max_x = sx, min_y = sy, max_y = sy;
            std::queue<std::pair<int, int>> q;
            q.emplace(sx, sy);
            seen[std::size_t(sy) * w + sx] = true;
            while (!q.empty()) {
                auto [x, y] = q.front();
                q.pop();
                ++rp.pixel_count;
                min_x = std::min(min_x, x);
                max_x = std::max(max_x, x);
                min_y = std::min(min_y, y);
                max_y = std::max(max_y, y);
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = x + dx, ny = y + dy;
                        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                        if (!frame.get(nx, ny) || seen[std::size_t(ny) * w + nx]) continue;
                        seen[std::size_t(ny) * w + nx] = true;
                        q.emplace(nx, ny);
                    }
            }
            rp.box = {min_x, min_y, max_x - min_x + 1, max_y - min_y + 1};
            out.push_back(rp);
        }
    }
    std::sort(out.begin(), out.end(), [](const RegionProposal& a, const RegionProposal& b) {
        if (a.pixel_count != b.pixel_count) return a.pixel_count > b.pixel_count;
        if (a.box.y != b.box.y) return a.box.y < b.box.y;
        return a.box.x < b.box.x;
    });
    return out;
}

BinaryFrame downsize(const BinaryFrame& frame, int s1, int s2) {
    const int ow = frame.width() / s1, oh = frame.height() / s2;
    BinaryFrame out(ow, oh);
    for (int y = 0; y < oh * s2; ++y)
        for (int x = 0; x < ow * s1; ++x)
            if (frame.get(x, y)) out.set(x / s1, y / s2);
    return out;
}

void conv2d_valid(const std::vector<double>& in, int in_ch, int in_side,
                  const std::vector<double>& weights, const std::vector<double>& bias,
                  int out_ch, int kernel, std::vector<double>& out) {
    const int out_side = in_side - kernel + 1;
    out.assign(std::size_t(out_ch) * out_side * out_side, 0.0);
    for (int oc = 0; oc < out_ch; ++oc)
        for (int oy = 0; oy < out_side; ++oy)
            for (int ox = 0; ox < out_side; ++ox) {
                double acc = bias[std::size_t(oc)];
                for (int ic = 0; ic < in_ch; ++ic)
                    for (int ky = 0; ky < kernel; ++ky)
                        for (int kx = 0; kx < kernel; ++kx)
                            acc += in[(std::size_t(ic) * in_side + oy + ky) * in_side +
                                      ox + kx] *
                                   weights[((std::size_t(oc) * in_ch + ic) * kernel + ky) *
                                               kernel +
                                           kx];
                out[(std::size_t(oc) * out_side + oy) * out_side + ox] = acc;
            }
}

}  // namespace reference
}  // namespace evt
