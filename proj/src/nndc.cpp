#include "evtrack/nndc.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "evtrack/cost.hpp"
#include "evtrack/errors.hpp"
#include "evtrack/nndc_internal.hpp"

namespace evt {

std::int64_t NetShape::parameter_count() const {
    const std::int64_t k2 = std::int64_t(kernel) * kernel;
    std::int64_t n = 0;
    n += k2 * in_ch * conv1_ch + conv1_ch;
    n += k2 * conv1_ch * conv2_ch + conv2_ch;
    n += std::int64_t(flat()) * fc1 + fc1;
    n += std::int64_t(fc1) * fc2 + fc2;
    n += std::int64_t(fc2) * outputs() + outputs();
    return n;
}

std::int64_t NetShape::forward_mac_ops() const {
    const std::int64_t k2 = std::int64_t(kernel) * kernel;
    std::int64_t mults = 0;
    mults += std::int64_t(conv1_side()) * conv1_side() * conv1_ch * k2 * in_ch;
    mults += std::int64_t(conv2_side()) * conv2_side() * conv2_ch * k2 * conv1_ch;
    mults += std::int64_t(flat()) * fc1;
    mults += std::int64_t(fc1) * fc2;
    mults += std::int64_t(fc2) * outputs();
    return 2 * mults;  // one multiply and one accumulate each
}

int RawOutput::argmax_class() const {
    return int(std::max_element(class_conf.begin(), class_conf.end()) -
               class_conf.begin());
}

ParamLayout::ParamLayout(const NetShape& s) {
    const std::int64_t k2 = std::int64_t(s.kernel) * s.kernel;
    conv1_w = 0;
    conv1_b = conv1_w + k2 * s.in_ch * s.conv1_ch;
    conv2_w = conv1_b + s.conv1_ch;
    conv2_b = conv2_w + k2 * s.conv1_ch * s.conv2_ch;
    fc1_w = conv2_b + s.conv2_ch;
    fc1_b = fc1_w + std::int64_t(s.flat()) * s.fc1;
    fc2_w = fc1_b + s.fc1;
    fc2_b = fc2_w + std::int64_t(s.fc1) * s.fc2;
    out_w = fc2_b + s.fc2;
    out_b = out_w + std::int64_t(s.fc2) * s.outputs();
    total = out_b + s.outputs();
}

Network::Network(NetShape shape) : shape_(shape) {
    params_.assign(std::size_t(ParamLayout(shape_).total), 0.0);
}

void Network::init_weights(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const ParamLayout L(shape_);
    const std::int64_t k2 = std::int64_t(shape_.kernel) * shape_.kernel;

    auto uniform_init = [&](std::int64_t offset, std::int64_t count, double fan_in,
                            double fan_out) {
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (std::int64_t i = 0; i < count; ++i)
            params_[std::size_t(offset + i)] = dist(rng);
    };
    uniform_init(L.conv1_w, L.conv1_b - L.conv1_w, double(k2 * shape_.in_ch),
                 double(k2 * shape_.conv1_ch));
    uniform_init(L.conv2_w, L.conv2_b - L.conv2_w, double(k2 * shape_.conv1_ch),
                 double(k2 * shape_.conv2_ch));
    uniform_init(L.fc1_w, L.fc1_b - L.fc1_w, double(shape_.flat()), double(shape_.fc1));
    uniform_init(L.fc2_w, L.fc2_b - L.fc2_w, double(shape_.fc1), double(shape_.fc2));
    uniform_init(L.out_w, L.out_b - L.out_w, double(shape_.fc2),
                 double(shape_.outputs()));
    // biases stay zero
}

void patch_to_input(const DualFrame& patch, const NetShape& s, std::vector<double>& out) {
    if (patch.width() != s.in_side || patch.height() != s.in_side)
        throw DataError("patch size does not match the network input");
    out.assign(std::size_t(s.in_ch) * s.in_side * s.in_side, 0.0);
    const int side = s.in_side;
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
            if (patch.on.get(x, y)) out[std::size_t(y) * side + x] = 1.0;
            if (patch.off.get(x, y))
                out[std::size_t(side) * side + std::size_t(y) * side + x] = 1.0;
        }
}

namespace {

void conv_valid_tanh(const double* in, int in_ch, int in_side, const double* w,
                     const double* b, int out_ch, int k, double* out) {
    const int out_side = in_side - k + 1;
#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < out_ch; ++oc) {
        for (int oy = 0; oy < out_side; ++oy) {
            for (int ox = 0; ox < out_side; ++ox) {
                double acc = b[oc];
                for (int ic = 0; ic < in_ch; ++ic) {
                    const double* plane = in + std::size_t(ic) * in_side * in_side;
                    const double* kw =
                        w + ((std::size_t(oc) * in_ch + ic) * k) * k;
                    for (int ky = 0; ky < k; ++ky) {
                        const double* row = plane + std::size_t(oy + ky) * in_side + ox;
                        const double* wr = kw + std::size_t(ky) * k;
                        for (int kx = 0; kx < k; ++kx) acc += row[kx] * wr[kx];
                    }
                }
                out[(std::size_t(oc) * out_side + oy) * out_side + ox] = std::tanh(acc);
            }
        }
    }
}

/// 2x2 stride-2 max pool; ties go to the first element in scan order.
void maxpool2(const double* in, int ch, int in_side, double* out, int* argmax) {
    const int out_side = in_side / 2;
    for (int c = 0; c < ch; ++c) {
        const double* plane = in + std::size_t(c) * in_side * in_side;
        for (int oy = 0; oy < out_side; ++oy) {
            for (int ox = 0; ox < out_side; ++ox) {
                double best = -2.0;
                int best_idx = 0;
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx) {
                        const int iy = oy * 2 + dy, ix = ox * 2 + dx;
                        const double v = plane[std::size_t(iy) * in_side + ix];
                        if (v > best) {
                            best = v;
                            best_idx = iy * in_side + ix;
                        }
                    }
                const std::size_t o = (std::size_t(c) * out_side + oy) * out_side + ox;
                out[o] = best;
                if (argmax) argmax[o] = best_idx;
            }
        }
    }
}

void dense(const double* in, int n_in, const double* w, const double* b, int n_out,
           double* out) {
#pragma omp parallel for schedule(static)
    for (int o = 0; o < n_out; ++o) {
        double acc = b[o];
        const double* wr = w + std::size_t(o) * n_in;
        for (int i = 0; i < n_in; ++i) acc += wr[i] * in[i];
        out[o] = acc;
    }
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

void Activations::resize(const NetShape& s) {
    input.assign(std::size_t(s.in_ch) * s.in_side * s.in_side, 0.0);
    a1.assign(std::size_t(s.conv1_ch) * s.conv1_side() * s.conv1_side(), 0.0);
    p1.assign(std::size_t(s.conv1_ch) * s.pool1_side() * s.pool1_side(), 0.0);
    arg1.assign(p1.size(), 0);
    a2.assign(std::size_t(s.conv2_ch) * s.conv2_side() * s.conv2_side(), 0.0);
    p2.assign(std::size_t(s.flat()), 0.0);
    arg2.assign(p2.size(), 0);
    f1.assign(std::size_t(s.fc1), 0.0);
    f2.assign(std::size_t(s.fc2), 0.0);
    out.assign(std::size_t(s.outputs()), 0.0);
}

RawOutput Network::forward(const DualFrame& patch, Activations& cache,
                           OpCounters* counters) const {
    const NetShape& s = shape_;
    const ParamLayout L(s);
    cache.resize(s);
    patch_to_input(patch, s, cache.input);
    const double* P = params_.data();

    conv_valid_tanh(cache.input.data(), s.in_ch, s.in_side, P + L.conv1_w,
                    P + L.conv1_b, s.conv1_ch, s.kernel, cache.a1.data());
    maxpool2(cache.a1.data(), s.conv1_ch, s.conv1_side(), cache.p1.data(),
             cache.arg1.data());
    conv_valid_tanh(cache.p1.data(), s.conv1_ch, s.pool1_side(), P + L.conv2_w,
                    P + L.conv2_b, s.conv2_ch, s.kernel, cache.a2.data());
    maxpool2(cache.a2.data(), s.conv2_ch, s.conv2_side(), cache.p2.data(),
             cache.arg2.data());

    std::vector<double> z1(std::size_t(s.fc1)), z2(std::size_t(s.fc2));
    dense(cache.p2.data(), s.flat(), P + L.fc1_w, P + L.fc1_b, s.fc1, z1.data());
    for (int i = 0; i < s.fc1; ++i) cache.f1[std::size_t(i)] = std::tanh(z1[std::size_t(i)]);
    dense(cache.f1.data(), s.fc1, P + L.fc2_w, P + L.fc2_b, s.fc2, z2.data());
    for (int i = 0; i < s.fc2; ++i) cache.f2[std::size_t(i)] = std::tanh(z2[std::size_t(i)]);
    dense(cache.f2.data(), s.fc2, P + L.out_w, P + L.out_b, s.outputs(),
          cache.out.data());

    RawOutput out;
    out.class_conf.resize(std::size_t(s.classes));
    for (int c = 0; c < s.classes; ++c)
        out.class_conf[std::size_t(c)] = sigmoid(cache.out[std::size_t(c)]);
    out.bb_conf = cache.out[std::size_t(s.classes)];
    out.tx = cache.out[std::size_t(s.classes) + 1];
    out.ty = cache.out[std::size_t(s.classes) + 2];
    out.tw = cache.out[std::size_t(s.classes) + 3];
    out.th = cache.out[std::size_t(s.classes) + 4];

    if (counters) {
        counters->nndc_mac_ops += std::uint64_t(s.forward_mac_ops());
        counters->nndc_inferences += 1;
    }
    return out;
}

RawOutput Network::forward(const DualFrame& patch, OpCounters* counters) const {
    Activations cache;
    return forward(patch, cache, counters);
}

CorrectedBox correct_box(const RawOutput& out, int rp_x, int rp_y,
                         const AnchorSet& anchors, const SensorGeometry& g,
                         int winning_class) {
    if (winning_class < 0 || std::size_t(winning_class) >= anchors.size())
        throw InternalError("winning class has no anchor");
    CorrectedBox b;
    const double A = g.width, B = g.height;

    const double xr = std::tanh(out.tx) * (A - 1) + rp_x;
    b.x = std::clamp(xr, 0.0, A - 1);
    b.gx = (xr > 0.0 && xr < A - 1) ? 1.0 : 0.0;

    const double yr = std::tanh(out.ty) * (B - 1) + rp_y;
    b.y = std::clamp(yr, 0.0, B - 1);
    b.gy = (yr > 0.0 && yr < B - 1) ? 1.0 : 0.0;

    const double wr = anchors.w[std::size_t(winning_class)] * std::exp(out.tw);
    b.w = std::clamp(wr, 0.0, A);
    b.gw = (wr > 0.0 && wr < A) ? 1.0 : 0.0;

    const double hr = anchors.h[std::size_t(winning_class)] * std::exp(out.th);
    b.h = std::clamp(hr, 0.0, B);
    b.gh = (hr > 0.0 && hr < B) ? 1.0 : 0.0;
    return b;
}

std::optional<Detection> correct_position(const RawOutput& out, int rp_x, int rp_y,
                                          const AnchorSet& anchors,
                                          const SensorGeometry& g, double thr) {
    if (out.bb_conf < thr) return std::nullopt;  // box is rejected
    const int j = out.argmax_class();
    if (j == 0) return std::nullopt;  // background wins: nothing to track
    const CorrectedBox cb = correct_box(out, rp_x, rp_y, anchors, g, j);

    Detection det;
    det.class_conf = out.class_conf;
    det.bb_conf = out.bb_conf;
    det.tx = out.tx;
    det.ty = out.ty;
    det.tw = out.tw;
    det.th = out.th;
    det.class_id = j;
    det.fx = cb.x;
    det.fy = cb.y;
    det.fw = cb.w;
    det.fh = cb.h;

    BoundingBox box;
    box.x = int(std::lround(cb.x));
    box.y = int(std::lround(cb.y));
    box.w = std::max(1, int(std::lround(cb.w)));
    box.h = std::max(1, int(std::lround(cb.h)));
    det.box = box.clamped(g);
    return det;
}

LossBreakdown loss(const RawOutput& out, const TrainingSample& target,
                   const AnchorSet& anchors, const SensorGeometry& g,
                   double lambda) {
    LossBreakdown l;
    for (std::size_t i = 0; i < out.class_conf.size(); ++i) {
        const double o = (int(i) == target.target_class) ? 1.0 : 0.0;
        const double d = o - out.class_conf[i];
        l.loss1 += d * d;
    }
    const double d2 = target.target_bb_conf - out.bb_conf;
    l.loss2 = d2 * d2;

    if (target.target_bb_conf > 0.1) {
        const CorrectedBox cb =
            correct_box(out, target.rp_x, target.rp_y, anchors, g, out.argmax_class());
        const double A = g.width, B = g.height;
        const double dx = (target.target_box.x - cb.x) / (A - 1);
        const double dy = (target.target_box.y - cb.y) / (B - 1);
        const double dw = (target.target_box.w - cb.w) / A;
        const double dh = (target.target_box.h - cb.h) / B;
        l.loss3 = dx * dx + dy * dy + dw * dw + dh * dh;
    }
    l.total = l.loss1 + l.loss2 + lambda * l.loss3;
    return l;
}

TrainingSample assign_target(const RegionProposal& rp, const std::vector<GtBox>& gt,
                             double iou_th) {
    TrainingSample s;
    s.rp_x = rp.box.x;
    s.rp_y = rp.box.y;
    s.rp_w = rp.box.w;
    s.rp_h = rp.box.h;
    double best = 0.0;
    const GtBox* best_gt = nullptr;
    for (const GtBox& g : gt) {
        const double v = iou(rp.box, g.box);
        if (v > best) {
            best = v;
            best_gt = &g;
        }
    }
    if (best_gt && best > iou_th) {
        s.target_class = best_gt->class_id;
        s.target_bb_conf = best;
        s.target_box = best_gt->box;
    }
    return s;
}

AnchorSet compute_anchors(const std::vector<GtBox>& gt, int classes,
                          const std::vector<std::string>& names) {
    AnchorSet a;
    a.w.assign(std::size_t(classes), 0.0);
    a.h.assign(std::size_t(classes), 0.0);
    a.names.assign(std::size_t(classes), "");
    for (int c = 0; c < classes; ++c)
        a.names[std::size_t(c)] =
            std::size_t(c) < names.size() ? names[std::size_t(c)] : "class" + std::to_string(c);

    std::vector<std::int64_t> count(std::size_t(classes), 0);
    double sum_w = 0, sum_h = 0;
    for (const GtBox& g : gt) {
        if (g.class_id < 1 || g.class_id >= classes)
            throw DataError("ground-truth class id " + std::to_string(g.class_id) +
                            " outside 1.." + std::to_string(classes - 1));
        a.w[std::size_t(g.class_id)] += g.box.w;
        a.h[std::size_t(g.class_id)] += g.box.h;
        count[std::size_t(g.class_id)] += 1;
        sum_w += g.box.w;
        sum_h += g.box.h;
    }
    for (int c = 1; c < classes; ++c) {
        if (count[std::size_t(c)] == 0)
            throw DataError("no ground-truth boxes for class " + a.names[std::size_t(c)]);
        a.w[std::size_t(c)] /= double(count[std::size_t(c)]);
        a.h[std::size_t(c)] /= double(count[std::size_t(c)]);
    }
    // background anchor: global mean size
    if (gt.empty()) throw DataError("cannot compute anchors from empty ground truth");
    a.w[0] = sum_w / double(gt.size());
    a.h[0] = sum_h / double(gt.size());
    return a;
}

std::vector<Detection> nms(std::vector<Detection> dets, double thr_ns) {
    std::stable_sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
        return a.bb_conf > b.bb_conf;
    });
    std::vector<Detection> kept;
    std::vector<bool> suppressed(dets.size(), false);
    for (std::size_t i = 0; i < dets.size(); ++i) {
        if (suppressed[i]) continue;
        kept.push_back(dets[i]);
        for (std::size_t j = i + 1; j < dets.size(); ++j) {
            if (suppressed[j]) continue;
            if (iou(dets[i].box, dets[j].box) > thr_ns) suppressed[j] = true;
        }
    }
    return kept;
}

// ---------------------------------------------------------------------------
// weights / anchors files

namespace {

std::uint32_t crc32_update(std::uint32_t crc, const unsigned char* data, std::size_t n) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int b = 0; b < 8; ++b) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    crc = ~crc;
    for (std::size_t i = 0; i < n; ++i) crc = table[(crc ^ data[i]) & 0xff] ^ (crc >> 8);
    return ~crc;
}

void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(char((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& buf, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(buf, bits);
}

struct Reader {
    const unsigned char* p;
    const unsigned char* end;
    std::string path;

    void need(std::size_t n) const {
        if (std::size_t(end - p) < n) throw DataError(path + ": truncated weights file");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(p[i]) << (8 * i);
        p += 4;
        return v;
    }
    float f32() {
        const std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(p), n);
        p += n;
        return s;
    }
};

constexpr std::uint32_t kWeightsVersion = 1;

void put_tensor(std::string& buf, const std::string& name,
                const std::vector<std::uint32_t>& dims, const double* values,
                std::size_t count) {
    put_u32(buf, std::uint32_t(name.size()));
    buf += name;
    put_u32(buf, std::uint32_t(dims.size()));
    for (std::uint32_t d : dims) put_u32(buf, d);
    for (std::size_t i = 0; i < count; ++i) put_f32(buf, float(values[i]));
}

}  // namespace

void save_weights(const Network& net, const SensorGeometry& geometry,
                  const std::string& path) {
    const NetShape& s = net.shape();
    const ParamLayout L(s);
    const double* P = net.params().data();
    const auto u = [](std::int64_t v) { return std::uint32_t(v); };

    std::string payload;
    const double geo[2] = {double(geometry.width), double(geometry.height)};
    put_tensor(payload, "geometry", {2}, geo, 2);
    put_tensor(payload, "conv1.w", {u(s.conv1_ch), u(s.in_ch), u(s.kernel), u(s.kernel)},
               P + L.conv1_w, std::size_t(L.conv1_b - L.conv1_w));
    put_tensor(payload, "conv1.b", {u(s.conv1_ch)}, P + L.conv1_b,
               std::size_t(L.conv2_w - L.conv1_b));
    put_tensor(payload, "conv2.w", {u(s.conv2_ch), u(s.conv1_ch), u(s.kernel), u(s.kernel)},
               P + L.conv2_w, std::size_t(L.conv2_b - L.conv2_w));
    put_tensor(payload, "conv2.b", {u(s.conv2_ch)}, P + L.conv2_b,
               std::size_t(L.fc1_w - L.conv2_b));
    put_tensor(payload, "fc1.w", {u(s.fc1), u(s.flat())}, P + L.fc1_w,
               std::size_t(L.fc1_b - L.fc1_w));
    put_tensor(payload, "fc1.b", {u(s.fc1)}, P + L.fc1_b, std::size_t(L.fc2_w - L.fc1_b));
    put_tensor(payload, "fc2.w", {u(s.fc2), u(s.fc1)}, P + L.fc2_w,
               std::size_t(L.fc2_b - L.fc2_w));
    put_tensor(payload, "fc2.b", {u(s.fc2)}, P + L.fc2_b, std::size_t(L.out_w - L.fc2_b));
    put_tensor(payload, "out.w", {u(s.outputs()), u(s.fc2)}, P + L.out_w,
               std::size_t(L.out_b - L.out_w));
    put_tensor(payload, "out.b", {u(s.outputs())}, P + L.out_b,
               std::size_t(L.total - L.out_b));

    std::string file = "NNDC";
    put_u32(file, kWeightsVersion);
    file += payload;
    put_u32(file, crc32_update(0, reinterpret_cast<const unsigned char*>(payload.data()),
                               payload.size()));

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out.write(file.data(), std::streamsize(file.size()));
    if (!out) throw DataError("write failure on " + path);
}

LoadedWeights load_weights(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::string file((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (file.size() < 12 || file.compare(0, 4, "NNDC") != 0)
        throw DataError(path + ": bad magic, expected NNDC");

    Reader r{reinterpret_cast<const unsigned char*>(file.data()) + 4,
             reinterpret_cast<const unsigned char*>(file.data()) + file.size(), path};
    const std::uint32_t version = r.u32();
    if (version != kWeightsVersion)
        throw DataError(path + ": unsupported weights version " + std::to_string(version));

    const unsigned char* payload_begin = r.p;
    const unsigned char* payload_end = r.end - 4;
    std::uint32_t stored_crc = 0;
    for (int i = 0; i < 4; ++i) stored_crc |= std::uint32_t(payload_end[i]) << (8 * i);
    if (crc32_update(0, payload_begin, std::size_t(payload_end - payload_begin)) != stored_crc)
        throw DataError(path + ": checksum mismatch");
    r.end = payload_end;

    struct Tensor {
        std::vector<std::uint32_t> dims;
        std::vector<double> values;
    };
    std::map<std::string, Tensor> tensors;
    while (r.p < r.end) {
        const std::uint32_t name_len = r.u32();
        const std::string name = r.str(name_len);
        const std::uint32_t rank = r.u32();
        Tensor t;
        std::size_t count = 1;
        for (std::uint32_t i = 0; i < rank; ++i) {
            t.dims.push_back(r.u32());
            count *= t.dims.back();
        }
        t.values.resize(count);
        for (std::size_t i = 0; i < count; ++i) t.values[i] = double(r.f32());
        tensors.emplace(name, std::move(t));
    }

    auto need = [&](const std::string& name) -> Tensor& {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw DataError(path + ": missing tensor " + name);
        return it->second;
    };

    NetShape s;
    const Tensor& c1 = need("conv1.w");
    if (c1.dims.size() != 4) throw DataError(path + ": conv1.w must have rank 4");
    s.conv1_ch = int(c1.dims[0]);
    s.in_ch = int(c1.dims[1]);
    s.kernel = int(c1.dims[2]);
    const Tensor& c2 = need("conv2.w");
    if (c2.dims.size() != 4) throw DataError(path + ": conv2.w must have rank 4");
    s.conv2_ch = int(c2.dims[0]);
    const Tensor& f1 = need("fc1.w");
    if (f1.dims.size() != 2) throw DataError(path + ": fc1.w must have rank 2");
    s.fc1 = int(f1.dims[0]);
    const Tensor& f2 = need("fc2.w");
    s.fc2 = int(f2.dims[0]);
    const Tensor& ow = need("out.w");
    s.classes = int(ow.dims[0]) - 5;
    if (s.classes < 1) throw DataError(path + ": fewer than six outputs");
    if (std::int64_t(f1.dims[1]) != s.flat())
        throw DataError(path + ": fc1.w width does not match the conv stack");

    LoadedWeights lw{Network(s), SensorGeometry{}};
    const Tensor& geo = need("geometry");
    if (geo.values.size() != 2) throw DataError(path + ": geometry tensor must hold 2 values");
    lw.geometry = {int(geo.values[0]), int(geo.values[1])};

    const ParamLayout L(s);
    auto copy = [&](const std::string& name, std::int64_t offset, std::int64_t count) {
        Tensor& t = need(name);
        if (std::int64_t(t.values.size()) != count)
            throw DataError(path + ": tensor " + name + " has wrong element count");
        std::copy(t.values.begin(), t.values.end(),
                  lw.network.params().begin() + offset);
    };
    copy("conv1.w", L.conv1_w, L.conv1_b - L.conv1_w);
    copy("conv1.b", L.conv1_b, L.conv2_w - L.conv1_b);
    copy("conv2.w", L.conv2_w, L.conv2_b - L.conv2_w);
    copy("conv2.b", L.conv2_b, L.fc1_w - L.conv2_b);
    copy("fc1.w", L.fc1_w, L.fc1_b - L.fc1_w);
    copy("fc1.b", L.fc1_b, L.fc2_w - L.fc1_b);
    copy("fc2.w", L.fc2_w, L.fc2_b - L.fc2_w);
    copy("fc2.b", L.fc2_b, L.out_w - L.fc2_b);
    copy("out.w", L.out_w, L.out_b - L.out_w);
    copy("out.b", L.out_b, L.total - L.out_b);
    return lw;
}

void save_anchors(const AnchorSet& anchors, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << "class_id,class_name,w,h\n";
    for (std::size_t c = 0; c < anchors.size(); ++c)
        out << c << ',' << anchors.names[c] << ',' << anchors.w[c] << ',' << anchors.h[c]
            << '\n';
    if (!out) throw DataError("write failure on " + path);
}

AnchorSet load_anchors(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    AnchorSet a;
    std::string line;
    bool header = true;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (header) {
            header = false;
            continue;
        }
        std::stringstream ss(line);
        std::string id_s, name, w_s, h_s;
        if (!std::getline(ss, id_s, ',') || !std::getline(ss, name, ',') ||
            !std::getline(ss, w_s, ',') || !std::getline(ss, h_s))
            throw DataError(path + ":" + std::to_string(line_no) + ": bad anchor row");
        const std::size_t id = std::stoul(id_s);
        if (id != a.size())
            throw DataError(path + ": anchor class ids must be consecutive from 0");
        a.names.push_back(name);
        a.w.push_back(std::stod(w_s));
        a.h.push_back(std::stod(h_s));
        if (a.w.back() <= 0 || a.h.back() <= 0)
            throw DataError(path + ": anchor sizes must be positive");
    }
    if (a.size() == 0) throw DataError(path + ": no anchors");
    return a;
}

}  // namespace evt
