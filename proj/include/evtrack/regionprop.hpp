#pragma once

#include <string>
#include <vector>

#include "evtrack/frame.hpp"
#include "evtrack/geometry.hpp"

namespace evt {

struct RegionProposal {
    BoundingBox box;          // full-resolution coordinates
    std::int64_t pixel_count = 0;  // active downsized pixels in the component
};

/// Two-pass 8-connectivity connected-component labelling over the downsized
/// frame. Boxes are scaled back to full resolution (x*s1, y*s2, w*s1, h*s2).
/// At most max_rp proposals survive, largest pixel_count first, ties broken
/// topmost-leftmost.
std::vector<RegionProposal> ccl_rp(const BinaryFrame& downsized, int s1, int s2,
                                   int max_rp = 8, OpCounters* counters = nullptr);

/// 1-D histogram baseline: maximal runs of columns/rows with activity count
/// >= threshold form segments; each segment pair containing at least one
/// active pixel becomes a proposal. Capped by box area.
std::vector<RegionProposal> hist_rp(const BinaryFrame& downsized, int s1, int s2,
                                    int threshold = 1, int max_rp = 8,
                                    OpCounters* counters = nullptr);

struct ActivePixelFactor {
    double alpha = 0.0;         // comparison weight * active ratio
    double active_ratio = 0.0;  // active pixels / area
};

/// Per-active-pixel comparison weight of the labelling pass: four prior
/// neighbours plus one equivalence/box update.
inline constexpr double kCclComparisonWeight = 5.0;

ActivePixelFactor active_pixel_factor(const BinaryFrame& downsized,
                                      double weight = kCclComparisonWeight);

/// Debug dump: `frame_idx,x,y,w,h,pixel_count` rows.
void append_proposal_csv(std::string& out, std::int64_t frame_idx,
                         const std::vector<RegionProposal>& rps);

}  // namespace evt
