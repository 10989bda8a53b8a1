#include <cmath>

#include "doctest.h"
#include "evtrack/cost.hpp"

using namespace evt;

TEST_CASE("ccl cost formula reproduces the published constants") {
    CostModel m;
    m.A = 240;
    m.B = 180;
    m.s1 = 6;
    m.s2 = 3;
    m.alpha = 4.5;
    const CostValue v = c_ccl(m);
    CHECK(v.ops == 54000.0);      // 43200 + 4.5 * 2400
    CHECK(v.memory == 16800.0);   // 2400 + 1200*6 + 1200*6

    m.alpha = 0.0;
    CHECK(c_ccl(m).ops == 43200.0);  // pure downsizing term
}

TEST_CASE("nndc cost: single inference, bound and zero-occupancy limit") {
    CostModel m;
    const NndcCost c = c_nndc(m);
    CHECK(c.single_inference == double(nndc_single_inference_ops()));
    CHECK(std::abs(c.single_inference - 2.16e6) / 2.16e6 < 0.02);
    CHECK(std::abs(c.bound - 17.302e6) / 17.302e6 < 1e-3);

    m.alpha_t = 0.0;
    CHECK(c_nndc(m).average == 0.0);
    // with zero occupancy only the frame-level overhead remains
    CHECK(c_nndc(m).average_with_overhead == filter_costs(m).median);
}

TEST_CASE("nndc cost: published pipeline average is reconstructed") {
    CostModel m;
    m.alpha_t = 0.57;
    m.n_rp = 2.38;
    const NndcCost c = c_nndc(m);
    CHECK(std::abs(c.average - 0.57 * 2.38 * 2.16e6) / (0.57 * 2.38 * 2.16e6) < 0.002);
    CHECK(std::abs(c.average_with_overhead - 3.057e6) / 3.057e6 < 0.005);
}

TEST_CASE("ebms cost formula") {
    CostModel m;
    m.ebms_events_per_frame = 650;
    m.ebms_clusters = 2;
    m.ebms_gamma_merge = 0.1;
    m.ebms_cl_max = 8;
    const CostValue v = c_ebms(m);
    CHECK(v.ops == doctest::Approx(252330.0));  // 650 * 388.2
    CHECK(v.memory == 3320.0);                  // 408*8 + 56

    m.ebms_events_per_frame = 0;
    CHECK(c_ebms(m).ops == 0.0);
}

TEST_CASE("filter cost constants at ten percent activation") {
    CostModel m;
    const FilterCosts f = filter_costs(m);
    CHECK(f.median == 125280.0);     // printed as 125.2K
    CHECK(f.nn_filter == 276480.0);  // printed as 276.4K
    CHECK(std::abs(f.median - 125.2e3) / 125.2e3 < 1e-3);
    CHECK(std::abs(f.nn_filter - 276.4e3) / 276.4e3 < 1e-3);
}

TEST_CASE("kf terms for the implemented filter sizes") {
    const KfTerms t6 = kf_terms(6, 4);
    CHECK(t6.c_p == 1020.0);
    CHECK(t6.c_c == 2638.0);
    CHECK(t6.c_cost == 821.0);
    CHECK(t6.c_u == 2.0);
    CHECK(t6.c_new == 1.0);

    const KfTerms t4 = kf_terms(4, 2);
    CHECK(t4.c_p == 320.0);
    CHECK(t4.c_c == 718.0);
    CHECK(t4.c_cost == 153.0);

    CHECK(kf_hungarian_ops(1.0) == doctest::Approx(9.0));
    CHECK(kf_hungarian_ops(2.0) == doctest::Approx(33.0));
}

TEST_CASE("tracker averages under the reference statistics") {
    const CostModel m = CostModel::reference_traffic();
    const double ot = c_ot(m);
    const double kf = c_kf(m);
    CHECK(std::abs(ot - 235.0) / 235.0 < 0.005);
    CHECK(std::abs(kf - 1585.0) / 1585.0 < 0.005);
    const double ratio = kf / ot;
    CHECK(ratio > 6.0);
    CHECK(ratio < 7.0);
}

TEST_CASE("ot formula limits") {
    CostModel zero;
    // zero objects, zero tracks: only the per-frame miscellaneous term
    CHECK(c_ot(zero) == 4.0);
}

TEST_CASE("counts-based evaluation equals the weighted tally by construction") {
    OtBranchStats s;
    s.frames = 100;
    s.detections = 160;
    s.locked_tests = 240;
    s.tracking_tests = 32;
    s.locked_unmatched = 104;
    s.locked_matched = 136;
    s.tracking_unmatched = 24;
    s.tracking_matched = 8;
    s.seeds = 8;
    s.matched_rps = 121;
    s.occlusion_events = 5;
    s.multimatch_merges = 4;
    s.unmatched_tracker_frames = 25;

    const double direct = c_ot_from_counts(s);
    const CostModel model = ot_stats_to_model(s, CostModel{});
    CHECK(c_ot(model) == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("kf counts-based evaluation matches the scalar form up to hungarian") {
    KfBranchStats s;
    s.frames = 50;
    s.detections = 75;
    s.track_predictions = 80;
    s.track_corrections = 60;
    s.track_updates_unassigned = 20;
    s.detections_unassigned = 15;
    s.hungarian_ops = 0.0;
    for (int f = 0; f < 50; ++f) s.hungarian_ops += kf_hungarian_ops(1.5);

    const CostModel model = kf_stats_to_model(s, CostModel{});
    const double counts = c_kf_from_counts(s, model.kf_m, model.kf_n);
    const double scalar = c_kf(model);
    // identical except the hungarian term, which the scalar form evaluates at
    // the average object count
    const double ha_counts = s.hungarian_ops / double(s.frames);
    const double ha_scalar = kf_hungarian_ops(model.ot_n_obj);
    CHECK(counts - ha_counts == doctest::Approx(scalar - ha_scalar).epsilon(1e-12));
}

TEST_CASE("cost report: rows, csv round trip and counter merge") {
    OpCounters counters;
    counters.framegen_ops = 4320000;
    counters.median_ops = 12000000;
    counters.ccl_ops = 1000000;
    counters.downsize_ops = 4320000;
    counters.nndc_mac_ops = 216000000;
    counters.ot_ops = 23500;

    CostModel model;
    model.alpha_t = 1.0;
    model.n_rp = 2.0;
    const CostReport rep = cost_report(counters, model, 100);
    CHECK(rep.rows.size() >= 4);
    const std::string csv = rep.to_csv();
    const CostReport back = parse_cost_csv(csv);
    REQUIRE(back.rows.size() == rep.rows.size());
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        CHECK(back.rows[i].module == rep.rows[i].module);
        CHECK(back.rows[i].analytic_ops ==
              doctest::Approx(rep.rows[i].analytic_ops).epsilon(1e-9));
        CHECK(back.rows[i].measured_ops ==
              doctest::Approx(rep.rows[i].measured_ops).epsilon(1e-9));
    }

    OpCounters merged;
    merged += counters;
    merged += counters;
    CHECK(merged.nndc_mac_ops == 2 * counters.nndc_mac_ops);
    CHECK(merged.ot_ops == 2 * counters.ot_ops);
}
