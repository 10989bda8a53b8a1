#include "evtrack/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "evtrack/ebms.hpp"
#include "evtrack/errors.hpp"
#include "evtrack/kalman.hpp"
#include "evtrack/regionprop.hpp"
#include "evtrack/tracker.hpp"

namespace evt {

namespace {

struct FrameSpan {
    std::int64_t start = 0;
    std::int64_t count = 0;  // windows spanned by the recording
};

FrameSpan frame_span(const EventStream& stream, const FramePlan& plan) {
    FrameSpan span;
    if (stream.events.empty()) return span;
    span.start = plan.start_us >= 0 ? plan.start_us
                                    : (stream.events.front().t / plan.t_f_us) * plan.t_f_us;
    const std::int64_t last = stream.events.back().t;
    if (last < span.start) return span;
    span.count = (last - span.start) / plan.t_f_us + 1;
    return span;
}

EventStream prefiltered(const EventStream& stream, const PipelineConfig& config,
                        OpCounters* counters) {
    EventStream current = stream;
    if (config.refractory_us > 0)
        current = refractory_filter(current, config.refractory_us, counters);
    if (config.nn_filter_us > 0)
        current = nn_filter(current, config.nn_filter_us, config.nn_filter_radius,
                            counters);
    return current;
}

std::string frame_name(std::int64_t idx) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%06lld", static_cast<long long>(idx));
    return buf;
}

/// Shared frame loop: filter, downsize, propose; hands the frame, its
/// proposals and the accumulating result to the sink.
template <typename Sink>
RunResult frame_loop(const EventStream& stream, const PipelineConfig& config,
                     const std::optional<std::string>& dump_dir, Sink&& sink) {
    RunResult result;
    EventStream filtered_stream = prefiltered(stream, config, &result.counters);
    validate_stream(filtered_stream);

    const FrameSpan span = frame_span(filtered_stream, config.frame);
    result.frames_total = std::uint64_t(span.count);

    FramePlan plan = config.frame;
    plan.start_us = span.start;

    std::string proposals_csv = "frame_idx,x,y,w,h,pixel_count\n";
    double alpha_sum = 0.0;

    accumulate(filtered_stream, plan, [&](FrameRecord&& rec) {
        if (rec.event_count == 0) return;  // skipped windows stay counted in the span
        result.frames_active += 1;
        result.counters.framegen_ops += std::uint64_t(rec.event_count);

        const BinaryFrame denoised =
            median_filter(rec.single, config.median_window, &result.counters);
        const BinaryFrame small =
            downsize(denoised, config.s1, config.s2, &result.counters);
        std::vector<RegionProposal> rps =
            config.use_hist_rp
                ? hist_rp(small, config.s1, config.s2, config.hist_threshold,
                          config.max_rp, &result.counters)
                : ccl_rp(small, config.s1, config.s2, config.max_rp, &result.counters);
        result.proposals_total += rps.size();
        alpha_sum += active_pixel_factor(small).alpha;

        if (dump_dir) {
            const std::string base = *dump_dir + "/" + frame_name(rec.frame_index);
            write_pgm(rec.single, base + ".pgm");
            append_proposal_csv(proposals_csv, rec.frame_index, rps);
        }
        sink(rec, rps, result);
    });

    if (dump_dir) {
        std::ofstream out(*dump_dir + "/proposals.csv");
        out << proposals_csv;
    }
    result.alpha_measured =
        result.frames_active ? alpha_sum / double(result.frames_active) : 0.0;
    return result;
}

std::vector<Detection> detect(const FrameRecord& rec,
                              const std::vector<RegionProposal>& rps,
                              const PipelineConfig& config, const Network& net,
                              const AnchorSet& anchors, OpCounters& counters) {
    const SensorGeometry g{rec.single.width(), rec.single.height()};
    std::vector<Detection> dets;
    for (const RegionProposal& rp : rps) {
        const DualFrame patch = extract_patch(rec.dual, rp.box, config.patch_side);
        const RawOutput out = net.forward(patch, &counters);
        if (auto det = correct_position(out, rp.box.x, rp.box.y, anchors, g, config.thr))
            dets.push_back(std::move(*det));
    }
    return nms(std::move(dets), config.thr_ns);
}

}  // namespace

RunResult run_pipeline(const EventStream& stream, const PipelineConfig& config,
                       const Network& net, const AnchorSet& anchors,
                       const std::optional<std::string>& dump_dir) {
    if (net.shape().in_side != config.patch_side)
        throw ConfigError("patch side does not match the network input");
    if (std::size_t(net.shape().classes) != anchors.size())
        throw DataError("anchor count does not match the network classes");

    OverlapTracker ot(stream.geometry, config.ot, net.shape().classes);
    KalmanTracker kf(stream.geometry, config.kf, net.shape().classes);
    const bool use_kf = config.tracker == TrackerKind::KF;

    return frame_loop(
        stream, config, dump_dir,
        [&](const FrameRecord& rec, const std::vector<RegionProposal>& rps,
            RunResult& result) {
            std::vector<Detection> dets =
                detect(rec, rps, config, net, anchors, result.counters);
            const auto rows =
                use_kf ? kf.step(rec.frame_index, std::move(dets), &result.counters,
                                 &result.kf_stats)
                       : ot.step(rec.frame_index, std::move(dets), &result.counters,
                                 &result.ot_stats);
            result.log.insert(result.log.end(), rows.begin(), rows.end());
        });
}

RunResult run_pipeline_rp_only(const EventStream& stream, const PipelineConfig& config,
                               const std::optional<std::string>& dump_dir) {
    OverlapTracker ot(stream.geometry, config.ot, 5);
    return frame_loop(stream, config, dump_dir,
                      [&](const FrameRecord& rec, const std::vector<RegionProposal>& rps,
                          RunResult& result) {
                          std::vector<Detection> dets;
                          for (const RegionProposal& rp : rps) {
                              Detection d;
                              d.bb_conf = 1.0;
                              d.class_id = kUnknownClass;
                              d.class_conf.assign(5, 0.0);
                              d.box = rp.box.clamped(stream.geometry);
                              dets.push_back(d);
                          }
                          auto rows = ot.step(rec.frame_index, std::move(dets),
                                              &result.counters, &result.ot_stats);
                          result.log.insert(result.log.end(), rows.begin(), rows.end());
                      });
}

RunResult run_ebms(const EventStream& stream, const PipelineConfig& config) {
    RunResult result;
    EventStream filtered = stream;
    // published baseline setting: refractory 50 ms, then NN filter 5 ms
    const std::int64_t refr = config.refractory_us > 0 ? config.refractory_us : 50000;
    const std::int64_t corr = config.nn_filter_us > 0 ? config.nn_filter_us : 5000;
    filtered = refractory_filter(filtered, refr, &result.counters);
    filtered = nn_filter(filtered, corr, config.nn_filter_radius, &result.counters);

    EBMSConfig ebms_cfg = config.ebms;
    ebms_cfg.t_f_us = config.frame.t_f_us;
    EbmsTracker tracker(stream.geometry, ebms_cfg);
    for (const Event& e : filtered.events)
        tracker.step(e, result.log, &result.counters);
    if (!filtered.events.empty())
        tracker.finish(filtered.events.back().t, result.log);

    const FrameSpan span = frame_span(filtered, config.frame);
    result.frames_total = std::uint64_t(span.count);
    result.frames_active = result.frames_total;
    return result;
}

std::vector<TrainingSample> build_training_samples(const EventStream& stream,
                                                   const AnnotationList& gt,
                                                   const PipelineConfig& config) {
    std::map<std::int64_t, std::vector<GtBox>> gt_by_frame;
    for (const Annotation& a : gt)
        gt_by_frame[a.frame_idx].push_back({a.box, a.class_id});

    std::vector<TrainingSample> samples;
    frame_loop(stream, config, std::nullopt,
               [&](const FrameRecord& rec, const std::vector<RegionProposal>& rps,
                   RunResult&) {
                   const auto it = gt_by_frame.find(rec.frame_index);
                   static const std::vector<GtBox> kNone;
                   const std::vector<GtBox>& boxes =
                       it != gt_by_frame.end() ? it->second : kNone;
                   for (const RegionProposal& rp : rps) {
                       TrainingSample s = assign_target(rp, boxes, 0.1);
                       s.patch = extract_patch(rec.dual, rp.box, config.patch_side);
                       samples.push_back(std::move(s));
                   }
               });
    return samples;
}

namespace {

constexpr std::uint16_t kDigitFont[10] = {
    // 3x5 glyphs, row-major bits (msb = top-left)
    0b111101101101111, 0b010110010010111, 0b111001111100111, 0b111001111001111,
    0b101101111001001, 0b111100111001111, 0b111100111101111, 0b111001010010010,
    0b111101111101111, 0b111101111001111,
};

}  // namespace

void render_overlays(const EventStream& stream, const TrackLog& log,
                     const PipelineConfig& config, const std::string& out_dir) {
    std::map<std::int64_t, std::vector<const TrackRow*>> rows_by_frame;
    for (const TrackRow& r : log) rows_by_frame[r.frame_idx].push_back(&r);

    std::filesystem::create_directories(out_dir);
    accumulate(stream, config.frame, [&](FrameRecord&& rec) {
        if (rec.event_count == 0) return;
        // grayscale canvas: frame at 0/255, overlays at 128
        const int w = rec.single.width(), h = rec.single.height();
        std::vector<unsigned char> img(std::size_t(w) * h, 0);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                if (rec.single.get(x, y)) img[std::size_t(y) * w + x] = 255;

        auto put = [&](int x, int y) {
            if (x >= 0 && y >= 0 && x < w && y < h) img[std::size_t(y) * w + x] = 128;
        };
        const auto it = rows_by_frame.find(rec.frame_index);
        if (it != rows_by_frame.end()) {
            for (const TrackRow* r : it->second) {
                const BoundingBox& b = r->box;
                for (int x = b.x; x < b.right(); ++x) {
                    put(x, b.y);
                    put(x, b.bottom() - 1);
                }
                for (int y = b.y; y < b.bottom(); ++y) {
                    put(b.x, y);
                    put(b.right() - 1, y);
                }
                // track id digits above the box
                std::string id = std::to_string(r->track_id);
                int cx = b.x;
                for (char ch : id) {
                    if (ch < '0' || ch > '9') continue;
                    const std::uint16_t glyph = kDigitFont[ch - '0'];
                    for (int gy = 0; gy < 5; ++gy)
                        for (int gx = 0; gx < 3; ++gx)
                            if (glyph >> (14 - (gy * 3 + gx)) & 1)
                                put(cx + gx, b.y - 7 + gy);
                    cx += 4;
                }
            }
        }
        std::ofstream out(out_dir + "/" + frame_name(rec.frame_index) + ".pgm",
                          std::ios::binary);
        out << "P5\n" << w << ' ' << h << "\n255\n";
        out.write(reinterpret_cast<const char*>(img.data()), std::streamsize(img.size()));
    });
}

}  // namespace evt
