#pragma once

#include <vector>

#include "evtrack/frame.hpp"
#include "evtrack/regionprop.hpp"

namespace evt {
// Serial reference implementations of the parallel kernels. They trade speed
// for obviousness and are kept as oracles for the test suite and the
// kernel benchmark.
namespace reference {

/// Sort-based binary median: collect the p*p window, sort, take the middle.
BinaryFrame median_filter(const BinaryFrame& frame, int p = 3);

/// BFS flood fill under 8-connectivity; returns unscaled per-component boxes
/// and pixel counts, ordered like ccl_rp (size, then top-left).
std::vector<RegionProposal> flood_fill_components(const BinaryFrame& frame);

/// Per-pixel loop downsize without word tricks.
BinaryFrame downsize(const BinaryFrame& frame, int s1, int s2);

/// Naive valid 2-D convolution used to cross-check the detector layers:
/// out[oc][oy][ox] = bias[oc] + sum_ic sum_k w * in.
void conv2d_valid(const std::vector<double>& in, int in_ch, int in_side,
                  const std::vector<double>& weights, const std::vector<double>& bias,
                  int out_ch, int kernel, std::vector<double>& out);

}  // namespace reference
}  // namespace evt
