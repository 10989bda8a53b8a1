#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "evtrack/errors.hpp"
#include "evtrack/nndc.hpp"
#include "evtrack/nndc_internal.hpp"

namespace evt {

namespace {

void conv_backward(const double* in, int in_ch, int in_side, const double* w,
                   int out_ch, int k, const double* g_pre, double* g_w, double* g_b,
                   double* g_in) {
    const int out_side = in_side - k + 1;
    for (int oc = 0; oc < out_ch; ++oc) {
        for (int oy = 0; oy < out_side; ++oy) {
            for (int ox = 0; ox < out_side; ++ox) {
                const double g = g_pre[(std::size_t(oc) * out_side + oy) * out_side + ox];
                if (g == 0.0) continue;
                g_b[oc] += g;
                for (int ic = 0; ic < in_ch; ++ic) {
                    const double* plane = in + std::size_t(ic) * in_side * in_side;
                    double* gplane =
                        g_in ? g_in + std::size_t(ic) * in_side * in_side : nullptr;
                    const std::size_t wbase = ((std::size_t(oc) * in_ch + ic) * k) * k;
                    for (int ky = 0; ky < k; ++ky) {
                        const std::size_t row = std::size_t(oy + ky) * in_side + ox;
                        for (int kx = 0; kx < k; ++kx) {
                            g_w[wbase + std::size_t(ky) * k + kx] += g * plane[row + kx];
                            if (gplane)
                                gplane[row + kx] += g * w[wbase + std::size_t(ky) * k + kx];
                        }
                    }
                }
            }
        }
    }
}

void unpool2(const double* g_out, const int* argmax, int ch, int in_side, double* g_in) {
    const int out_side = in_side / 2;
    for (int c = 0; c < ch; ++c) {
        double* gplane = g_in + std::size_t(c) * in_side * in_side;
        for (int o = 0; o < out_side * out_side; ++o) {
            const std::size_t idx = std::size_t(c) * out_side * out_side + o;
            gplane[argmax[idx]] += g_out[idx];
        }
    }
}

}  // namespace

double Network::sample_gradient(const TrainingSample& sample, const AnchorSet& anchors,
                                const SensorGeometry& geometry, double lambda,
                                std::vector<double>& grad_out) const {
    const NetShape& s = shape_;
    const ParamLayout L(s);
    if (std::int64_t(grad_out.size()) != L.total)
        throw InternalError("gradient buffer has wrong size");

    Activations act;
    const RawOutput out = forward(sample.patch, act);
    const LossBreakdown lb = loss(out, sample, anchors, geometry, lambda);

    const int C = s.classes;
    std::vector<double> g_z(std::size_t(s.outputs()), 0.0);
    for (int i = 0; i < C; ++i) {
        const double o = (i == sample.target_class) ? 1.0 : 0.0;
        const double y = out.class_conf[std::size_t(i)];
        g_z[std::size_t(i)] = 2.0 * (y - o) * y * (1.0 - y);
    }
    g_z[std::size_t(C)] = 2.0 * (out.bb_conf - sample.target_bb_conf);

    if (sample.target_bb_conf > 0.1) {
        const double A = geometry.width, B = geometry.height;
        const CorrectedBox cb = correct_box(out, sample.rp_x, sample.rp_y, anchors,
                                            geometry, out.argmax_class());
        const double anchor_w = anchors.w[std::size_t(out.argmax_class())];
        const double anchor_h = anchors.h[std::size_t(out.argmax_class())];
        const double tx2 = std::tanh(out.tx), ty2 = std::tanh(out.ty);
        // clip is straight-through: unit gradient inside, zero at saturation
        g_z[std::size_t(C) + 1] = lambda * 2.0 * (cb.x - sample.target_box.x) /
                                  ((A - 1) * (A - 1)) * cb.gx * (A - 1) *
                                  (1.0 - tx2 * tx2);
        g_z[std::size_t(C) + 2] = lambda * 2.0 * (cb.y - sample.target_box.y) /
                                  ((B - 1) * (B - 1)) * cb.gy * (B - 1) *
                                  (1.0 - ty2 * ty2);
        g_z[std::size_t(C) + 3] = lambda * 2.0 * (cb.w - sample.target_box.w) / (A * A) *
                                  cb.gw * anchor_w * std::exp(out.tw);
        g_z[std::size_t(C) + 4] = lambda * 2.0 * (cb.h - sample.target_box.h) / (B * B) *
                                  cb.gh * anchor_h * std::exp(out.th);
    }

    const double* P = params_.data();
    double* G = grad_out.data();

    // output layer
    std::vector<double> g_f2(std::size_t(s.fc2), 0.0);
    for (int o = 0; o < s.outputs(); ++o) {
        const double g = g_z[std::size_t(o)];
        if (g == 0.0) continue;
        G[L.out_b + o] += g;
        const double* wr = P + L.out_w + std::size_t(o) * s.fc2;
        double* gw = G + L.out_w + std::size_t(o) * s.fc2;
        for (int j = 0; j < s.fc2; ++j) {
            gw[j] += g * act.f2[std::size_t(j)];
            g_f2[std::size_t(j)] += g * wr[j];
        }
    }

    // fc2 (tanh)
    std::vector<double> g_f1(std::size_t(s.fc1), 0.0);
    for (int j = 0; j < s.fc2; ++j) {
        const double a = act.f2[std::size_t(j)];
        const double g = g_f2[std::size_t(j)] * (1.0 - a * a);
        if (g == 0.0) continue;
        G[L.fc2_b + j] += g;
        const double* wr = P + L.fc2_w + std::size_t(j) * s.fc1;
        double* gw = G + L.fc2_w + std::size_t(j) * s.fc1;
        for (int i = 0; i < s.fc1; ++i) {
            gw[i] += g * act.f1[std::size_t(i)];
            g_f1[std::size_t(i)] += g * wr[i];
        }
    }

    // fc1 (tanh)
    std::vector<double> g_p2(std::size_t(s.flat()), 0.0);
    for (int j = 0; j < s.fc1; ++j) {
        const double a = act.f1[std::size_t(j)];
        const double g = g_f1[std::size_t(j)] * (1.0 - a * a);
        if (g == 0.0) continue;
        G[L.fc1_b + j] += g;
        const double* wr = P + L.fc1_w + std::size_t(j) * s.flat();
        double* gw = G + L.fc1_w + std::size_t(j) * s.flat();
        for (int i = 0; i < s.flat(); ++i) {
            gw[i] += g * act.p2[std::size_t(i)];
            g_p2[std::size_t(i)] += g * wr[i];
        }
    }

    // pool2 -> conv2 (tanh)
    std::vector<double> g_a2(act.a2.size(), 0.0);
    unpool2(g_p2.data(), act.arg2.data(), s.conv2_ch, s.conv2_side(), g_a2.data());
    for (std::size_t i = 0; i < g_a2.size(); ++i) {
        const double a = act.a2[i];
        g_a2[i] *= (1.0 - a * a);
    }
    std::vector<double> g_p1(act.p1.size(), 0.0);
    conv_backward(act.p1.data(), s.conv1_ch, s.pool1_side(), P + L.conv2_w, s.conv2_ch,
                  s.kernel, g_a2.data(), G + L.conv2_w, G + L.conv2_b, g_p1.data());

    // pool1 -> conv1 (tanh)
    std::vector<double> g_a1(act.a1.size(), 0.0);
    unpool2(g_p1.data(), act.arg1.data(), s.conv1_ch, s.conv1_side(), g_a1.data());
    for (std::size_t i = 0; i < g_a1.size(); ++i) {
        const double a = act.a1[i];
        g_a1[i] *= (1.0 - a * a);
    }
    conv_backward(act.input.data(), s.in_ch, s.in_side, P + L.conv1_w, s.conv1_ch,
                  s.kernel, g_a1.data(), G + L.conv1_w, G + L.conv1_b, nullptr);

    return lb.total;
}

namespace {

/// Mean-loss gradient over the batch. Samples are evaluated in parallel in
/// fixed blocks and reduced in sample-index order, so results do not depend
/// on the thread count.
std::vector<double> batch_gradient(const Network& net,
                                   const std::vector<TrainingSample>& batch,
                                   const AnchorSet& anchors,
                                   const SensorGeometry& geometry, double lambda,
                                   double* mean_loss_out) {
    const ParamLayout L(net.shape());
    std::vector<double> grad(std::size_t(L.total), 0.0);
    if (mean_loss_out) *mean_loss_out = 0.0;
    if (batch.empty()) return grad;

    constexpr std::size_t kBlock = 16;
    std::vector<std::vector<double>> sample_grads(
        std::min(kBlock, batch.size()), std::vector<double>(std::size_t(L.total), 0.0));
    std::vector<double> sample_loss(std::min(kBlock, batch.size()), 0.0);
    double loss_sum = 0.0;

    for (std::size_t base = 0; base < batch.size(); base += kBlock) {
        const std::size_t n = std::min(kBlock, batch.size() - base);
#pragma omp parallel for schedule(static)
        for (int i = 0; i < int(n); ++i) {
            auto& g = sample_grads[std::size_t(i)];
            std::fill(g.begin(), g.end(), 0.0);
            sample_loss[std::size_t(i)] = net.sample_gradient(
                batch[base + std::size_t(i)], anchors, geometry, lambda, g);
        }
        for (std::size_t i = 0; i < n; ++i) {
            loss_sum += sample_loss[i];
            for (std::size_t p = 0; p < grad.size(); ++p) grad[p] += sample_grads[i][p];
        }
    }
    const double inv = 1.0 / double(batch.size());
    for (double& g : grad) g *= inv;
    if (mean_loss_out) *mean_loss_out = loss_sum * inv;
    return grad;
}

}  // namespace

std::vector<double> Network::backward(const std::vector<TrainingSample>& batch,
                                      const AnchorSet& anchors,
                                      const SensorGeometry& geometry,
                                      double lambda) const {
    return batch_gradient(*this, batch, anchors, geometry, lambda, nullptr);
}

namespace {

struct Adam {
    std::vector<double> m, v;
    std::int64_t step = 0;

    explicit Adam(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

    void update(std::vector<double>& params, const std::vector<double>& grad,
                const TrainConfig& cfg) {
        ++step;
        const double b1t = 1.0 - std::pow(cfg.beta1, double(step));
        const double b2t = 1.0 - std::pow(cfg.beta2, double(step));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            const double mh = m[i] / b1t;
            const double vh = v[i] / b2t;
            params[i] -= cfg.learning_rate * mh / (std::sqrt(vh) + cfg.epsilon);
        }
    }
};

double validation_accuracy(const Network& net, const std::vector<TrainingSample>& samples,
                           const std::vector<std::size_t>& indices) {
    if (indices.empty()) return 0.0;
    std::vector<int> correct(indices.size(), 0);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < int(indices.size()); ++i) {
        const TrainingSample& s = samples[indices[std::size_t(i)]];
        const RawOutput out = net.forward(s.patch);
        correct[std::size_t(i)] = out.argmax_class() == s.target_class ? 1 : 0;
    }
    const int sum = std::accumulate(correct.begin(), correct.end(), 0);
    return double(sum) / double(indices.size());
}

}  // namespace

TrainResult train(std::vector<TrainingSample> dataset, const AnchorSet& anchors,
                  const SensorGeometry& geometry, const TrainConfig& config,
                  NetShape shape) {
    if (dataset.empty()) throw DataError("training dataset is empty");
    const bool any_positive =
        std::any_of(dataset.begin(), dataset.end(),
                    [](const TrainingSample& s) { return s.target_bb_conf > 0.0; });
    if (!any_positive) throw DataError("training dataset has no positive sample");
    if (std::size_t(anchors.size()) != std::size_t(shape.classes))
        throw DataError("anchor count does not match the class count");

    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    const std::size_t val_count =
        std::min(dataset.size() - 1,
                 std::size_t(std::llround(config.val_split * double(dataset.size()))));
    std::vector<std::size_t> val_idx(order.end() - std::ptrdiff_t(val_count), order.end());
    std::vector<std::size_t> train_idx(order.begin(),
                                       order.end() - std::ptrdiff_t(val_count));

    TrainResult result;
    result.network = Network(shape);
    result.network.init_weights(config.seed);
    Network& net = result.network;

    Adam adam(net.params().size());
    std::vector<double> best_params = net.params();
    double best_val = -std::numeric_limits<double>::infinity();
    int best_epoch = -1;
    int since_best = 0;

    std::vector<TrainingSample> batch;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(train_idx.begin(), train_idx.end(), rng);
        double loss_sum = 0.0;
        std::size_t loss_batches = 0;
        for (std::size_t base = 0; base < train_idx.size();
             base += std::size_t(config.batch_size)) {
            const std::size_t n =
                std::min(std::size_t(config.batch_size), train_idx.size() - base);
            batch.clear();
            for (std::size_t i = 0; i < n; ++i)
                batch.push_back(dataset[train_idx[base + i]]);
            double batch_loss = 0.0;
            const std::vector<double> grad = batch_gradient(
                net, batch, anchors, geometry, config.lambda, &batch_loss);
            loss_sum += batch_loss;
            ++loss_batches;
            adam.update(net.params(), grad, config);
        }

        EpochStats stats;
        stats.train_loss = loss_batches ? loss_sum / double(loss_batches) : 0.0;
        stats.val_accuracy = validation_accuracy(net, dataset, val_idx);
        result.history.push_back(stats);

        // without a validation split the training loss drives the stopping rule
        const double metric =
            val_idx.empty() ? -stats.train_loss : stats.val_accuracy;
        if (metric > best_val) {
            best_val = metric;
            best_params = net.params();
            best_epoch = epoch;
            since_best = 0;
        } else {
            ++since_best;
            if (since_best >= config.patience) break;
        }
    }
    net.params() = best_params;
    result.best_epoch = std::max(best_epoch, 0);
    return result;
}

}  // namespace evt
