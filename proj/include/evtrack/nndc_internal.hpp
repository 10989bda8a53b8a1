#pragma once

#include <cstdint>
#include <vector>

#include "evtrack/nndc.hpp"

namespace evt {

/// Offsets of each layer's tensors inside the flat parameter vector.
struct ParamLayout {
    explicit ParamLayout(const NetShape& s);
    std::int64_t conv1_w, conv1_b;
    std::int64_t conv2_w, conv2_b;
    std::int64_t fc1_w, fc1_b;
    std::int64_t fc2_w, fc2_b;
    std::int64_t out_w, out_b;
    std::int64_t total;
};

/// Forward-pass intermediates, kept for backpropagation.
struct Activations {
    std::vector<double> input;
    std::vector<double> a1;   // conv1 post-tanh
    std::vector<double> p1;   // pool1
    std::vector<int> arg1;    // pool1 argmax (plane-local index)
    std::vector<double> a2;   // conv2 post-tanh
    std::vector<double> p2;   // pool2 == flattened features
    std::vector<int> arg2;
    std::vector<double> f1;   // fc1 post-tanh
    std::vector<double> f2;   // fc2 post-tanh
    std::vector<double> out;  // raw output layer

    void resize(const NetShape& s);
};

void patch_to_input(const DualFrame& patch, const NetShape& s, std::vector<double>& out);

}  // namespace evt
