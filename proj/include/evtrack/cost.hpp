#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evtrack/geometry.hpp"

namespace evt {

/// Runtime operation counters, one accumulator per pipeline stage. Merging
/// across recordings is additive.
struct OpCounters {
    std::uint64_t framegen_ops = 0;
    std::uint64_t median_ops = 0;
    std::uint64_t downsize_ops = 0;
    std::uint64_t ccl_ops = 0;
    std::uint64_t hist_ops = 0;
    std::uint64_t nndc_mac_ops = 0;
    std::uint64_t nndc_inferences = 0;
    std::uint64_t ot_ops = 0;
    std::uint64_t kf_ops = 0;
    std::uint64_t ebms_ops = 0;
    std::uint64_t refractory_ops = 0;
    std::uint64_t nn_filter_ops = 0;

    OpCounters& operator+=(const OpCounters& other);
};

/// Branch tallies of the overlap tracker, taken at the same code sites the
/// weighted ot_ops counter uses.
struct OtBranchStats {
    std::uint64_t frames = 0;
    std::uint64_t detections = 0;
    std::uint64_t locked_tests = 0;      // (detection x locked slot) overlap tests
    std::uint64_t tracking_tests = 0;
    std::uint64_t locked_unmatched = 0;  // per-pair outcomes
    std::uint64_t locked_matched = 0;
    std::uint64_t tracking_unmatched = 0;
    std::uint64_t tracking_matched = 0;
    std::uint64_t seeds = 0;
    std::uint64_t matched_rps = 0;       // detections matched to >= 1 slot
    std::uint64_t occlusion_events = 0;
    std::uint64_t multimatch_merges = 0;
    std::uint64_t unmatched_tracker_frames = 0;

    OtBranchStats& operator+=(const OtBranchStats& other);
};

struct KfBranchStats {
    std::uint64_t frames = 0;
    std::uint64_t detections = 0;
    std::uint64_t track_predictions = 0;
    std::uint64_t track_corrections = 0;
    std::uint64_t track_updates_unassigned = 0;
    std::uint64_t detections_unassigned = 0;
    double hungarian_ops = 0.0;  // sum of C_ha(n_detections) over frames

    KfBranchStats& operator+=(const KfBranchStats& other);
};

/// Scalar parameters of the analytic per-frame cost models.
struct CostModel {
    // geometry and scales
    int A = 240, B = 180;
    int s1 = 6, s2 = 3;
    // CCL active-pixel factor
    double alpha = 4.5;
    // NNDC
    double alpha_t = 1.0;    // temporal occupancy of non-empty frames
    double n_rp = 8.0;       // mean proposals per active frame
    int classes = 5;
    double pixel_activation = 0.1;  // filter-model activation ratio
    // EBMS
    double ebms_events_per_frame = 650.0;  // N bar
    double ebms_clusters = 2.0;            // CL bar
    double ebms_gamma_merge = 0.1;
    int ebms_cl_max = 8;
    // KF
    double kf_tracks = 0.0;   // N_T
    double kf_p_assign = 0.0;
    double kf_p_unassigned_det = 0.0;    // P_ua
    double kf_p_unassigned_track = 0.0;  // P_uat
    int kf_m = 6;
    int kf_n = 4;
    // OT
    double ot_n_obj = 0.0;
    double ot_t_locked = 0.0;
    double ot_t_tracking = 0.0;
    double ot_t_unmatched = 0.0;
    double ot_n_matched = 0.0;
    double ot_p[8] = {0, 0, 0, 0, 0, 0, 0, 0};  // p[1]..p[7] used

    /// Reference branch statistics reproducing the published per-frame
    /// averages (overlap tracker ~235 ops, Kalman ~1585 ops). The Kalman
    /// entry uses the planar constant-velocity filter (m=4, n=2) those
    /// averages were derived for.
    static CostModel reference_traffic();
};

struct CostValue {
    double ops = 0.0;
    double memory = 0.0;  // paper-units: the formula value, unit-ambiguous
};

/// C_CCL = A*B + alpha*A*B/(s1*s2); memory adds per-label corner storage for
/// the worst-case label count (half the downsized area).
CostValue c_ccl(const CostModel& m);

struct NndcCost {
    double single_inference = 0.0;  // one 42x42x2 pass
    double average = 0.0;           // alpha_T * n_rp * single
    double average_with_overhead = 0.0;  // + median filter + CCL terms
    double bound = 0.0;             // 8 proposals + CCL overhead
};

NndcCost c_nndc(const CostModel& m);

/// C = N * (9*CL^2 + (169 + 16*gamma)*CL + 11); M = 408*CL_max + 56.
CostValue c_ebms(const CostModel& m);

double c_kf(const CostModel& m);
double c_ot(const CostModel& m);

/// Kalman sub-terms for a given state/measurement size.
struct KfTerms {
    double c_p = 0.0, c_c = 0.0, c_u = 2.0, c_new = 1.0, c_cost = 0.0;
};
KfTerms kf_terms(int m, int n);
double kf_hungarian_ops(double n_obj);

struct FilterCosts {
    double median = 0.0;     // per frame
    double nn_filter = 0.0;  // per frame
};

/// Window-scan and per-active-pixel models at the configured activation;
/// the defaults reproduce the published 125.2K / 276.4K per-frame estimates.
FilterCosts filter_costs(const CostModel& m);

/// Number of multiply/add ops of one default-shape detector pass; fixed by
/// the architecture, used as the analytic single-inference constant.
std::int64_t nndc_single_inference_ops();

/// Evaluates the tracker models directly on measured branch counts; agrees
/// with the weighted runtime counters by construction.
double c_ot_from_counts(const OtBranchStats& s);
double c_kf_from_counts(const KfBranchStats& s, int m, int n);

/// Converts branch tallies into the scalar model parameters (ratio
/// statistics with matching denominators).
CostModel ot_stats_to_model(const OtBranchStats& s, CostModel base);
CostModel kf_stats_to_model(const KfBranchStats& s, CostModel base);

struct CostReportRow {
    std::string module;
    double analytic_ops = 0.0;
    double measured_ops = 0.0;
    double rel_error = 0.0;  // (measured - analytic) / analytic
};

struct CostReport {
    std::vector<CostReportRow> rows;
    std::uint64_t frames = 0;

    std::string to_csv() const;
    std::string to_text() const;
};
CostReport parse_cost_csv(const std::string& csv);

/// Per-frame analytic-vs-measured comparison for a completed run.
CostReport cost_report(const OpCounters& counters, const CostModel& model,
                       std::uint64_t frames);

}  // namespace evt
