#include "evtrack/cost.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "evtrack/errors.hpp"
#include "evtrack/nndc.hpp"

namespace evt {

OpCounters& OpCounters::operator+=(const OpCounters& o) {
    framegen_ops += o.framegen_ops;
    median_ops += o.median_ops;
    downsize_ops += o.downsize_ops;
    ccl_ops += o.ccl_ops;
    hist_ops += o.hist_ops;
    nndc_mac_ops += o.nndc_mac_ops;
    nndc_inferences += o.nndc_inferences;
    ot_ops += o.ot_ops;
    kf_ops += o.kf_ops;
    ebms_ops += o.ebms_ops;
    refractory_ops += o.refractory_ops;
    nn_filter_ops += o.nn_filter_ops;
    return *this;
}

OtBranchStats& OtBranchStats::operator+=(const OtBranchStats& o) {
    frames += o.frames;
    detections += o.detections;
    locked_tests += o.locked_tests;
    tracking_tests += o.tracking_tests;
    locked_unmatched += o.locked_unmatched;
    locked_matched += o.locked_matched;
    tracking_unmatched += o.tracking_unmatched;
    tracking_matched += o.tracking_matched;
    seeds += o.seeds;
    matched_rps += o.matched_rps;
    occlusion_events += o.occlusion_events;
    multimatch_merges += o.multimatch_merges;
    unmatched_tracker_frames += o.unmatched_tracker_frames;
    return *this;
}

KfBranchStats& KfBranchStats::operator+=(const KfBranchStats& o) {
    frames += o.frames;
    detections += o.detections;
    track_predictions += o.track_predictions;
    track_corrections += o.track_corrections;
    track_updates_unassigned += o.track_updates_unassigned;
    detections_unassigned += o.detections_unassigned;
    hungarian_ops += o.hungarian_ops;
    return *this;
}

CostModel CostModel::reference_traffic() {
    CostModel m;
    m.alpha = 4.5;
    m.alpha_t = 0.57;
    m.n_rp = 2.38;
    // overlap tracker branch statistics
    m.ot_n_obj = 1.6;
    m.ot_t_locked = 1.5;
    m.ot_t_tracking = 0.2;
    m.ot_t_unmatched = 0.25;
    m.ot_n_matched = 1.21;
    m.ot_p[1] = 0.65;
    m.ot_p[2] = 0.85;
    m.ot_p[3] = 0.15;
    m.ot_p[4] = 0.05;
    m.ot_p[5] = 0.05;
    m.ot_p[6] = 0.04;
    m.ot_p[7] = 0.03;
    // Kalman statistics for the planar filter the published averages used
    m.kf_m = 4;
    m.kf_n = 2;
    m.kf_tracks = 1.535;
    m.kf_p_assign = 0.76;
    m.kf_p_unassigned_track = 0.24;
    m.kf_p_unassigned_det = 0.08;
    return m;
}

CostValue c_ccl(const CostModel& m) {
    CostValue v;
    const double area = double(m.A) * m.B;
    const double ds_area = area / (double(m.s1) * m.s2);
    v.ops = area + m.alpha * ds_area;
    const double ds_w = double(m.A) / m.s1;
    const double ds_h = double(m.B) / m.s2;
    v.memory = ds_area + (ds_area / 2.0) * std::ceil(std::log2(ds_w)) +
               (ds_area / 2.0) * std::ceil(std::log2(ds_h));
    return v;
}

std::int64_t nndc_single_inference_ops() { return NetShape{}.forward_mac_ops(); }

NndcCost c_nndc(const CostModel& m) {
    NndcCost c;
    c.single_inference = double(nndc_single_inference_ops());
    c.average = m.alpha_t * m.n_rp * c.single_inference;
    const FilterCosts f = filter_costs(m);
    c.average_with_overhead = c.average + f.median;
    CostModel worst = m;
    worst.alpha = 4.5;
    c.bound = 8.0 * c.single_inference + c_ccl(worst).ops;
    return c;
}

CostValue c_ebms(const CostModel& m) {
    CostValue v;
    const double cl = m.ebms_clusters;
    v.ops = m.ebms_events_per_frame *
            (9.0 * cl * cl + (169.0 + 16.0 * m.ebms_gamma_merge) * cl + 11.0);
    v.memory = 408.0 * m.ebms_cl_max + 56.0;
    return v;
}

KfTerms kf_terms(int m, int n) {
    KfTerms t;
    const double md = m, nd = n;
    t.c_p = 4 * md * md * md + 3 * md * md + 2 * md * nd;
    t.c_c = 6 * md * md * md + 6 * md * md * nd + 2 * md * nd * nd + 3 * md * md +
            7 * md * nd + md + nd;
    t.c_u = 2;
    t.c_new = 1;
    t.c_cost = 4 * nd * nd * nd + 2 * md * md * nd + 2 * md * nd * nd + 5 * nd * nd + 5;
    return t;
}

double kf_hungarian_ops(double n_obj) {
    return (11 * n_obj * n_obj * n_obj + 12 * n_obj * n_obj + 31 * n_obj) / 6.0;
}

double c_kf(const CostModel& m) {
    const KfTerms t = kf_terms(m.kf_m, m.kf_n);
    return m.kf_tracks * (t.c_p + m.kf_p_assign * t.c_c +
                          m.kf_p_unassigned_track * t.c_u + t.c_cost) +
           m.ot_n_obj * m.kf_p_unassigned_det * t.c_new + kf_hungarian_ops(m.ot_n_obj);
}

double c_ot(const CostModel& m) {
    const double c_a = m.ot_n_obj * (19 * m.ot_t_locked + 17 * m.ot_t_tracking +
                                     28 * m.ot_p[1] + 37 * m.ot_p[2] + 28 * m.ot_p[3] +
                                     37 * m.ot_p[4] + 2 * m.ot_p[5] + 2);
    const double c_oh = m.ot_n_matched * (71 + 6 * m.ot_p[6] + m.ot_p[7]);
    const double c_u = 5 * m.ot_t_unmatched;
    return c_a + c_oh + c_u + 4;
}

FilterCosts filter_costs(const CostModel& m) {
    FilterCosts f;
    const double area = double(m.A) * m.B;
    const double active = m.pixel_activation * area;
    // one scan op per pixel; 9 window reads, 8 adds, compare and write on
    // each active pixel
    f.median = area + 19.0 * active;
    // per event: neighbourhood timestamp reads, compares and map upkeep
    f.nn_filter = 64.0 * active;
    return f;
}

double c_ot_from_counts(const OtBranchStats& s) {
    const double total = 19.0 * s.locked_tests + 17.0 * s.tracking_tests +
                         28.0 * s.locked_unmatched + 37.0 * s.locked_matched +
                         28.0 * s.tracking_unmatched + 37.0 * s.tracking_matched +
                         2.0 * s.seeds + 2.0 * s.detections + 71.0 * s.matched_rps +
                         6.0 * s.occlusion_events + 1.0 * s.multimatch_merges +
                         5.0 * s.unmatched_tracker_frames + 4.0 * s.frames;
    return s.frames ? total / double(s.frames) : 0.0;
}

double c_kf_from_counts(const KfBranchStats& s, int m, int n) {
    const KfTerms t = kf_terms(m, n);
    const double total = (t.c_p + t.c_cost) * double(s.track_predictions) +
                         t.c_c * double(s.track_corrections) +
                         t.c_u * double(s.track_updates_unassigned) +
                         t.c_new * double(s.detections_unassigned) + s.hungarian_ops;
    return s.frames ? total / double(s.frames) : 0.0;
}

CostModel ot_stats_to_model(const OtBranchStats& s, CostModel base) {
    const double frames = double(std::max<std::uint64_t>(s.frames, 1));
    const double dets = double(s.detections);
    base.ot_n_obj = dets / frames;
    if (dets > 0) {
        base.ot_t_locked = double(s.locked_tests) / dets;
        base.ot_t_tracking = double(s.tracking_tests) / dets;
        base.ot_p[1] = double(s.locked_unmatched) / dets;
        base.ot_p[2] = double(s.locked_matched) / dets;
        base.ot_p[3] = double(s.tracking_unmatched) / dets;
        base.ot_p[4] = double(s.tracking_matched) / dets;
        base.ot_p[5] = double(s.seeds) / dets;
    } else {
        base.ot_t_locked = base.ot_t_tracking = 0;
        base.ot_p[1] = base.ot_p[2] = base.ot_p[3] = base.ot_p[4] = base.ot_p[5] = 0;
    }
    base.ot_n_matched = double(s.matched_rps) / frames;
    if (s.matched_rps > 0) {
        base.ot_p[6] = double(s.occlusion_events) / double(s.matched_rps);
        base.ot_p[7] = double(s.multimatch_merges) / double(s.matched_rps);
    } else {
        base.ot_p[6] = base.ot_p[7] = 0;
    }
    base.ot_t_unmatched = double(s.unmatched_tracker_frames) / frames;
    return base;
}

CostModel kf_stats_to_model(const KfBranchStats& s, CostModel base) {
    const double frames = double(std::max<std::uint64_t>(s.frames, 1));
    const double preds = double(s.track_predictions);
    base.kf_tracks = preds / frames;
    base.ot_n_obj = double(s.detections) / frames;
    if (preds > 0) {
        base.kf_p_assign = double(s.track_corrections) / preds;
        base.kf_p_unassigned_track = double(s.track_updates_unassigned) / preds;
    } else {
        base.kf_p_assign = base.kf_p_unassigned_track = 0;
    }
    base.kf_p_unassigned_det =
        s.detections ? double(s.detections_unassigned) / double(s.detections) : 0;
    return base;
}

namespace {

CostReportRow make_row(const std::string& module, double analytic, double measured) {
    CostReportRow row;
    row.module = module;
    row.analytic_ops = analytic;
    row.measured_ops = measured;
    row.rel_error = analytic != 0.0 ? (measured - analytic) / analytic : 0.0;
    return row;
}

}  // namespace

CostReport cost_report(const OpCounters& counters, const CostModel& model,
                       std::uint64_t frames) {
    CostReport rep;
    rep.frames = frames;
    const double f = frames ? double(frames) : 1.0;

    rep.rows.push_back(make_row("framegen", double(model.A) * model.B,
                                double(counters.framegen_ops) / f));
    const FilterCosts fc = filter_costs(model);
    rep.rows.push_back(make_row("median_filter", fc.median,
                                double(counters.median_ops) / f));
    if (counters.nn_filter_ops)
        rep.rows.push_back(make_row("nn_filter", fc.nn_filter,
                                    double(counters.nn_filter_ops) / f));
    rep.rows.push_back(make_row("ccl", c_ccl(model).ops,
                                double(counters.downsize_ops + counters.ccl_ops) / f));
    const NndcCost nc = c_nndc(model);
    rep.rows.push_back(make_row("nndc", nc.average,
                                double(counters.nndc_mac_ops) / f));
    if (counters.ot_ops)
        rep.rows.push_back(make_row("tracker_ot", c_ot(model),
                                    double(counters.ot_ops) / f));
    if (counters.kf_ops)
        rep.rows.push_back(make_row("tracker_kf", c_kf(model),
                                    double(counters.kf_ops) / f));
    if (counters.ebms_ops)
        rep.rows.push_back(make_row("tracker_ebms", c_ebms(model).ops,
                                    double(counters.ebms_ops) / f));
    return rep;
}

std::string CostReport::to_csv() const {
    std::string out = "module,analytic_ops,measured_ops,rel_error\n";
    char buf[200];
    for (const CostReportRow& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.8f\n", r.module.c_str(),
                      r.analytic_ops, r.measured_ops, r.rel_error);
        out += buf;
    }
    return out;
}

std::string CostReport::to_text() const {
    std::string out;
    char buf[220];
    std::snprintf(buf, sizeof buf, "%-14s %16s %16s %12s\n", "module", "analytic/frame",
                  "measured/frame", "rel_error");
    out += buf;
    double total_measured = 0;
    for (const CostReportRow& r : rows) total_measured += r.measured_ops;
    for (const CostReportRow& r : rows) {
        const double share = total_measured > 0 ? r.measured_ops / total_measured : 0.0;
        std::snprintf(buf, sizeof buf, "%-14s %16.1f %16.1f %11.4f%%  (%.1f%% of total)\n",
                      r.module.c_str(), r.analytic_ops, r.measured_ops,
                      100.0 * r.rel_error, 100.0 * share);
        out += buf;
    }
    return out;
}

CostReport parse_cost_csv(const std::string& csv) {
    CostReport rep;
    std::istringstream in(csv);
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (header) {
            header = false;
            continue;
        }
        CostReportRow row;
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        const auto c3 = line.find(',', c2 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos || c3 == std::string::npos)
            throw DataError("bad cost report row: " + line);
        row.module = line.substr(0, c1);
        row.analytic_ops = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
        row.measured_ops = std::stod(line.substr(c2 + 1, c3 - c2 - 1));
        row.rel_error = std::stod(line.substr(c3 + 1));
        rep.rows.push_back(row);
    }
    return rep;
}

}  // namespace evt
