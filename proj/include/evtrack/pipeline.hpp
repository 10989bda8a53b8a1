#pragma once

#include <optional>
#include <string>

#include "evtrack/config.hpp"
#include "evtrack/cost.hpp"
#include "evtrack/eval.hpp"
#include "evtrack/events.hpp"
#include "evtrack/nndc.hpp"
#include "evtrack/tracklog.hpp"

namespace evt {

struct RunResult {
    TrackLog log;
    OpCounters counters;
    OtBranchStats ot_stats;
    KfBranchStats kf_stats;
    std::uint64_t frames_total = 0;   // windows spanned by the recording
    std::uint64_t frames_active = 0;  // windows with at least one event
    std::uint64_t proposals_total = 0;
    double alpha_measured = 0.0;      // mean active-pixel factor over active frames

    double alpha_t() const {
        return frames_total ? double(frames_active) / double(frames_total) : 0.0;
    }
    double mean_rp() const {
        return frames_active ? double(proposals_total) / double(frames_active) : 0.0;
    }
};

/// Full detector pipeline over one recording: frames -> median filter ->
/// downsize -> proposals -> detector -> NMS -> tracker. Streams frames one
/// at a time. `dump_dir`, when set, receives frame PGMs and proposal CSVs.
RunResult run_pipeline(const EventStream& stream, const PipelineConfig& config,
                       const Network& net, const AnchorSet& anchors,
                       const std::optional<std::string>& dump_dir = {});

/// Proposal-only variant (no detector): raw CCL or HIST boxes go straight to
/// the tracker with unit confidence.
RunResult run_pipeline_rp_only(const EventStream& stream, const PipelineConfig& config,
                               const std::optional<std::string>& dump_dir = {});

/// EBMS baseline over the raw (pre-filtered) event stream.
RunResult run_ebms(const EventStream& stream, const PipelineConfig& config);

/// Builds detector training data from a recording plus its annotations:
/// proposals are target-assigned per frame and cut into patches.
std::vector<TrainingSample> build_training_samples(const EventStream& stream,
                                                   const AnnotationList& gt,
                                                   const PipelineConfig& config);

/// Draws value-128 box outlines and track ids into the 0/255 frame dumps.
void render_overlays(const EventStream& stream, const TrackLog& log,
                     const PipelineConfig& config, const std::string& out_dir);

}  // namespace evt
