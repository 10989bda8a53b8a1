#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "evtrack/frame.hpp"
#include "evtrack/geometry.hpp"
#include "evtrack/regionprop.hpp"

namespace evt {

struct OpCounters;

/// Layer plan of the detector/classifier. The default instantiation has
/// exactly 107,936 parameters; tests also use reduced variants.
struct NetShape {
    int in_side = 42;
    int in_ch = 2;
    int kernel = 5;
    int conv1_ch = 6;
    int conv2_ch = 16;
    int fc1 = 120;
    int fc2 = 84;
    int classes = 5;  // class 0 is background

    int conv1_side() const { return in_side - kernel + 1; }        // 38
    int pool1_side() const { return conv1_side() / 2; }            // 19
    int conv2_side() const { return pool1_side() - kernel + 1; }   // 15
    int pool2_side() const { return conv2_side() / 2; }            // 7
    int flat() const { return pool2_side() * pool2_side() * conv2_ch; }
    int outputs() const { return classes + 5; }

    std::int64_t parameter_count() const;
    /// Multiply+add operations of one forward pass (each MAC counts as two).
    std::int64_t forward_mac_ops() const;
};

/// Raw network outputs for one patch: sigmoid class confidences, linear
/// objectness and box-correction parameters.
struct RawOutput {
    std::vector<double> class_conf;  // size C
    double bb_conf = 0.0;
    double tx = 0.0, ty = 0.0, tw = 0.0, th = 0.0;

    int argmax_class() const;
};

struct AnchorSet {
    std::vector<std::string> names;     // per class id
    std::vector<double> w;
    std::vector<double> h;

    std::size_t size() const { return w.size(); }
};

struct Detection {
    std::vector<double> class_conf;
    double bb_conf = 0.0;
    double tx = 0.0, ty = 0.0, tw = 0.0, th = 0.0;
    int class_id = 0;
    BoundingBox box;                       // rounded, clipped to the frame
    double fx = 0.0, fy = 0.0, fw = 0.0, fh = 0.0;  // pre-rounding values
};

struct TrainingSample {
    DualFrame patch;      // in_side x in_side
    int rp_x = 0, rp_y = 0;
    int rp_w = 0, rp_h = 0;
    int target_class = 0;          // 0 = background
    double target_bb_conf = 0.0;   // IoU with matched GT, or 0
    BoundingBox target_box;        // meaningful iff target_bb_conf > 0
};

struct TrainConfig {
    int batch_size = 128;
    int epochs = 20;
    double learning_rate = 0.01;
    double lambda = 5.0;
    int patience = 3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double thr = 0.1;      // bb_conf accept threshold
    double thr_ns = 0.3;   // NMS suppression threshold
    double val_split = 0.2;
    std::uint64_t seed = 1;
};

/// Scratch space reused across forward passes in training.
struct Activations;

class Network {
public:
    explicit Network(NetShape shape = {});

    const NetShape& shape() const { return shape_; }
    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }
    std::int64_t parameter_count() const { return std::int64_t(params_.size()); }

    void init_weights(std::uint64_t seed);

    RawOutput forward(const DualFrame& patch, OpCounters* counters = nullptr) const;
    RawOutput forward(const DualFrame& patch, Activations& cache,
                      OpCounters* counters = nullptr) const;

    /// Gradient of the mean total loss over the batch, in parameter layout
    /// order. Per-sample gradients are evaluated in parallel and reduced in
    /// sample-index order, so the result is independent of thread count.
    std::vector<double> backward(const std::vector<TrainingSample>& batch,
                                 const AnchorSet& anchors,
                                 const SensorGeometry& geometry,
                                 double lambda) const;

    /// Single-sample gradient accumulation; returns the sample's total loss.
    double sample_gradient(const TrainingSample& sample, const AnchorSet& anchors,
                           const SensorGeometry& geometry, double lambda,
                           std::vector<double>& grad_out) const;

private:
    NetShape shape_;
    std::vector<double> params_;
};

struct CorrectedBox {
    double x = 0.0, y = 0.0, w = 0.0, h = 0.0;
    // Straight-through flags: 1 while the corresponding clip is inactive.
    double gx = 1.0, gy = 1.0, gw = 1.0, gh = 1.0;
};

/// Algorithm step shared by inference and the training loss: offsets the RP
/// corner by tanh(t)*(dim-1) and scales the winning class anchor by exp(t),
/// clipping to the sensor.
CorrectedBox correct_box(const RawOutput& out, int rp_x, int rp_y,
                         const AnchorSet& anchors, const SensorGeometry& g,
                         int winning_class);

/// Thresholded inference path: returns nothing when bb_conf < thr or the
/// winning class is background.
std::optional<Detection> correct_position(const RawOutput& out, int rp_x, int rp_y,
                                          const AnchorSet& anchors,
                                          const SensorGeometry& g, double thr);

struct LossBreakdown {
    double total = 0.0;
    double loss1 = 0.0;  // classification
    double loss2 = 0.0;  // objectness
    double loss3 = 0.0;  // box regression (gated on target bb_conf > 0.1)
};

LossBreakdown loss(const RawOutput& out, const TrainingSample& target,
                   const AnchorSet& anchors, const SensorGeometry& g,
                   double lambda);

struct EpochStats {
    double train_loss = 0.0;
    double val_accuracy = 0.0;  // unbalanced, argmax class vs target
};

struct TrainResult {
    Network network;
    std::vector<EpochStats> history;
    int best_epoch = 0;
};

TrainResult train(std::vector<TrainingSample> dataset, const AnchorSet& anchors,
                  const SensorGeometry& geometry, const TrainConfig& config,
                  NetShape shape = {});

/// Max-IoU assignment of region proposals to ground-truth boxes. Proposals
/// with best IoU > iou_th become positive samples (bb_conf = IoU); the rest
/// become background.
struct GtBox {
    BoundingBox box;
    int class_id = 0;
};

TrainingSample assign_target(const RegionProposal& rp, const std::vector<GtBox>& gt,
                             double iou_th = 0.1);

/// Per-class arithmetic mean of ground-truth sizes. Class 0 (background)
/// receives the global mean. Throws DataError when an object class has no
/// boxes.
AnchorSet compute_anchors(const std::vector<GtBox>& gt, int classes,
                          const std::vector<std::string>& names);

/// Greedy non-maximal suppression: keep the highest bb_conf box, drop any
/// remaining box whose IoU with a kept box exceeds thr_ns.
std::vector<Detection> nms(std::vector<Detection> dets, double thr_ns = 0.3);

/// Weights file: magic "NNDC", version, named f32 tensors, CRC32 trailer.
/// A "geometry" tensor records the sensor size the net was trained for.
void save_weights(const Network& net, const SensorGeometry& geometry,
                  const std::string& path);
struct LoadedWeights {
    Network network;
    SensorGeometry geometry;
};
LoadedWeights load_weights(const std::string& path);

void save_anchors(const AnchorSet& anchors, const std::string& path);
AnchorSet load_anchors(const std::string& path);

}  // namespace evt
