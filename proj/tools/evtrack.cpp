#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "evtrack/config.hpp"
#include "evtrack/cost.hpp"
#include "evtrack/errors.hpp"
#include "evtrack/eval.hpp"
#include "evtrack/events.hpp"
#include "evtrack/pipeline.hpp"
#include "evtrack/synth.hpp"

namespace {

namespace fs = std::filesystem;
using namespace evt;

struct GlobalOptions {
    std::string config_path;
    std::uint64_t seed = 1;
    int jobs = 1;
    std::string dump_dir;
};

PipelineConfig load_pipeline_config(const GlobalOptions& g) {
    PipelineConfig cfg;
    if (!g.config_path.empty()) cfg = pipeline_config_from(read_config(g.config_path));
    cfg.seed = g.seed;
    cfg.train.seed = g.seed;
    return cfg;
}

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << text;
}

int cmd_synth(const GlobalOptions& g, const std::string& scene_path,
              const std::string& out_events, const std::string& out_gt) {
    SceneSpec scene = scene_path.empty() ? occlusion_scene(g.seed)
                                         : read_scene_config(scene_path);
    if (scene_path.empty()) scene.seed = g.seed;
    const GeneratedScene gen = generate(scene);
    write_events(gen.stream, out_events, format_from_path(out_events));
    write_tracklog_csv(gen.annotations, out_gt);
    std::cout << "synth: " << gen.stream.size() << " events, "
              << gen.annotations.size() << " annotation rows\n";
    return 0;
}

int cmd_train(const GlobalOptions& g, const std::vector<std::string>& event_paths,
              const std::vector<std::string>& gt_paths, const std::string& weights_out,
              const std::string& anchors_out) {
    if (event_paths.size() != gt_paths.size())
        throw ConfigError("train needs one --gt per --events");
    if (event_paths.empty()) throw ConfigError("train needs at least one recording");
    PipelineConfig cfg = load_pipeline_config(g);

    std::vector<TrainingSample> dataset;
    std::vector<GtBox> all_gt;
    SensorGeometry geometry;
    for (std::size_t i = 0; i < event_paths.size(); ++i) {
        const EventStream stream =
            read_events(event_paths[i], format_from_path(event_paths[i]),
                        {cfg.sort_on_decreasing});
        geometry = stream.geometry;
        const AnnotationList gt = read_tracklog_csv(gt_paths[i]);
        for (const Annotation& a : gt) all_gt.push_back({a.box, a.class_id});
        auto samples = build_training_samples(stream, gt, cfg);
        dataset.insert(dataset.end(), samples.begin(), samples.end());
    }
    std::cout << "train: " << dataset.size() << " samples\n";

    const std::vector<std::string> names = {"background", "car_van", "bus", "bike",
                                            "truck"};
    const AnchorSet anchors = compute_anchors(all_gt, 5, names);
    const TrainResult result = train(std::move(dataset), anchors, geometry, cfg.train);
    for (std::size_t e = 0; e < result.history.size(); ++e)
        std::cout << "  epoch " << e << ": loss " << result.history[e].train_loss
                  << ", val acc " << result.history[e].val_accuracy << "\n";
    save_weights(result.network, geometry, weights_out);
    save_anchors(anchors, anchors_out);
    std::cout << "train: best epoch " << result.best_epoch << ", wrote " << weights_out
              << " and " << anchors_out << "\n";
    return 0;
}

struct RecordingOutput {
    std::string name;
    RunResult run;
    CostModel model;
};

RecordingOutput run_one(const std::string& events_path, const PipelineConfig& cfg,
                        const GlobalOptions& g) {
    RecordingOutput out;
    out.name = stem_of(events_path);
    const EventStream stream = read_events(events_path, format_from_path(events_path),
                                           {cfg.sort_on_decreasing});

    std::optional<std::string> dump;
    if (!g.dump_dir.empty()) {
        dump = g.dump_dir + "/" + out.name;
        fs::create_directories(*dump);
    }

    if (cfg.tracker == TrackerKind::EBMS) {
        out.run = run_ebms(stream, cfg);
    } else {
        if (cfg.weights_path.empty())
            throw ConfigError("no weights configured; run `evtrack train` first and set "
                              "[nndc] weights=...");
        const LoadedWeights lw = load_weights(cfg.weights_path);
        if (!(lw.geometry == stream.geometry))
            throw DataError("weights were trained for " +
                            std::to_string(lw.geometry.width) + "x" +
                            std::to_string(lw.geometry.height) + " but the recording is " +
                            std::to_string(stream.geometry.width) + "x" +
                            std::to_string(stream.geometry.height));
        const AnchorSet anchors = cfg.anchors_path.empty()
                                      ? AnchorSet{}
                                      : load_anchors(cfg.anchors_path);
        if (anchors.size() == 0) throw ConfigError("no anchors configured");
        out.run = run_pipeline(stream, cfg, lw.network, anchors, dump);
    }

    out.model = CostModel::reference_traffic();
    out.model.A = stream.geometry.width;
    out.model.B = stream.geometry.height;
    out.model.s1 = cfg.s1;
    out.model.s2 = cfg.s2;
    out.model.alpha = out.run.alpha_measured;
    out.model.alpha_t = out.run.alpha_t();
    out.model.n_rp = out.run.mean_rp();
    out.model = ot_stats_to_model(out.run.ot_stats, out.model);
    out.model = kf_stats_to_model(out.run.kf_stats, out.model);
    out.model.kf_m = kKfStateDim;
    out.model.kf_n = kKfMeasDim;
    return out;
}

int cmd_run(const GlobalOptions& g, const std::vector<std::string>& event_paths,
            const std::vector<std::string>& gt_paths, const std::string& out_dir) {
    if (!gt_paths.empty() && gt_paths.size() != event_paths.size())
        throw ConfigError("run needs one --gt per --events (or none at all)");
    const PipelineConfig cfg = load_pipeline_config(g);
    fs::create_directories(out_dir);

    std::vector<RecordingOutput> outputs(event_paths.size());
    const int jobs = std::max(1, g.jobs);
    std::vector<std::thread> workers;
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(event_paths.size());
    for (int t = 0; t < jobs; ++t)
        workers.emplace_back([&] {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= event_paths.size()) return;
                try {
                    outputs[i] = run_one(event_paths[i], cfg, g);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    for (auto& w : workers) w.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    OpCounters merged_counters;
    std::uint64_t merged_frames = 0;
    std::vector<RecordingMetrics> metrics;
    std::vector<std::pair<double, std::int64_t>> f1_01;
    for (std::size_t i = 0; i < outputs.size(); ++i) {
        RecordingOutput& o = outputs[i];
        write_tracklog_csv(o.run.log, out_dir + "/" + o.name + ".tracks.csv");
        merged_counters += o.run.counters;
        merged_frames += o.run.frames_active;
        if (!gt_paths.empty()) {
            const AnnotationList gt = read_tracklog_csv(gt_paths[i]);
            metrics.push_back(evaluate_recording(o.name, o.run.log, gt));
            f1_01.emplace_back(metrics.back().detection.front().f1,
                               metrics.back().gt_tracks);
        }
        if (o.run.log.empty())
            std::cout << "warning: " << o.name << " produced an empty track log\n";
    }

    if (!metrics.empty()) {
        const double wf1 = weighted_f1(f1_01);
        write_text(out_dir + "/metrics.json", metrics_to_json(metrics, wf1));
        write_text(out_dir + "/metrics.csv", metrics_to_csv(metrics));
        std::cout << "weighted F1 @ IoU 0.1: " << wf1 << "\n";
    }

    CostModel model = outputs.empty() ? CostModel::reference_traffic() : outputs.front().model;
    const CostReport report = cost_report(merged_counters, model, merged_frames);
    write_text(out_dir + "/cost_report.csv", report.to_csv());
    std::cout << report.to_text();
    return 0;
}

int cmd_eval(const std::string& tracks_path, const std::string& gt_path,
             const std::string& out_json) {
    const TrackLog tracks = read_tracklog_csv(tracks_path);
    const AnnotationList gt = read_tracklog_csv(gt_path);
    const RecordingMetrics m = evaluate_recording(stem_of(tracks_path), tracks, gt);
    const double wf1 = m.detection.front().f1;
    const std::string json = metrics_to_json({m}, wf1);
    if (!out_json.empty()) write_text(out_json, json);
    std::cout << json << "\n";
    return 0;
}

int cmd_cost(const GlobalOptions&, const std::string& report_path) {
    // analytic reference table; when a run report is given, echo it alongside
    CostModel m = CostModel::reference_traffic();
    const CostValue ccl = c_ccl(m);
    const NndcCost nndc = c_nndc(m);
    const CostValue ebms = c_ebms(m);
    const FilterCosts filters = filter_costs(m);
    std::cout << "analytic per-frame costs (reference parameters)\n";
    std::cout << "  ccl: " << ccl.ops << " ops, memory " << ccl.memory
              << " paper-units (bits or bytes; the source is ambiguous)\n";
    std::cout << "  nndc: single inference " << nndc.single_inference << ", bound "
              << nndc.bound << ", average " << nndc.average_with_overhead << "\n";
    std::cout << "  ebms: " << ebms.ops << " ops, memory " << ebms.memory
              << " paper-units\n";
    std::cout << "  median filter: " << filters.median
              << " ops, nn filter: " << filters.nn_filter << " ops\n";
    std::cout << "  tracker averages: ot " << c_ot(m) << ", kf " << c_kf(m)
              << ", ratio " << c_kf(m) / c_ot(m) << "\n";
    if (!report_path.empty()) {
        std::ifstream in(report_path);
        if (!in) throw DataError("cannot open " + report_path);
        std::stringstream ss;
        ss << in.rdbuf();
        const CostReport rep = parse_cost_csv(ss.str());
        std::cout << "measured report (" << report_path << ")\n" << rep.to_text();
    }
    return 0;
}

int cmd_render(const GlobalOptions& g, const std::string& events_path,
               const std::string& tracks_path, const std::string& out_dir) {
    const PipelineConfig cfg = load_pipeline_config(g);
    const EventStream stream = read_events(events_path, format_from_path(events_path),
                                           {cfg.sort_on_decreasing});
    const TrackLog log = read_tracklog_csv(tracks_path);
    render_overlays(stream, log, cfg, out_dir);
    std::cout << "render: wrote overlays to " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"event-frame detection and tracking pipeline"};
    app.require_subcommand(1);

    GlobalOptions g;
    app.add_option("--config", g.config_path, "pipeline config file");
    app.add_option("--seed", g.seed, "global RNG seed");
    app.add_option("--jobs", g.jobs, "parallel recordings");
    app.add_option("--dump-dir", g.dump_dir, "directory for intermediate dumps");

    auto* synth = app.add_subcommand("synth", "generate a synthetic scene");
    std::string scene_path, out_events = "scene.csv", out_gt = "scene.gt.csv";
    synth->add_option("--scene", scene_path, "scene config (default: occlusion scene)");
    synth->add_option("--out-events", out_events, "event file to write");
    synth->add_option("--out-gt", out_gt, "annotation file to write");

    auto* train = app.add_subcommand("train", "train the detector");
    std::vector<std::string> train_events, train_gt;
    std::string weights_out = "weights.nndc", anchors_out = "anchors.csv";
    train->add_option("--events", train_events, "event recordings")->required();
    train->add_option("--gt", train_gt, "matching annotation files")->required();
    train->add_option("--weights-out", weights_out, "weights file to write");
    train->add_option("--anchors-out", anchors_out, "anchors file to write");

    auto* run = app.add_subcommand("run", "run the full pipeline");
    std::vector<std::string> run_events, run_gt;
    std::string run_out = "out";
    run->add_option("--events", run_events, "event recordings")->required();
    run->add_option("--gt", run_gt, "annotation files for evaluation");
    run->add_option("--out", run_out, "output directory");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a track log against GT");
    std::string eval_tracks, eval_gt, eval_out;
    eval_cmd->add_option("--tracks", eval_tracks, "track log CSV")->required();
    eval_cmd->add_option("--gt", eval_gt, "annotation CSV")->required();
    eval_cmd->add_option("--out", eval_out, "metrics JSON to write");

    auto* cost_cmd = app.add_subcommand("cost", "print analytic cost tables");
    std::string cost_report_path;
    cost_cmd->add_option("--report", cost_report_path, "measured cost_report.csv");

    auto* render = app.add_subcommand("render", "draw track overlays into PGM frames");
    std::string render_events, render_tracks, render_out = "overlays";
    render->add_option("--events", render_events, "event recording")->required();
    render->add_option("--tracks", render_tracks, "track log CSV")->required();
    render->add_option("--out", render_out, "output directory");

    try {
        app.parse(argc, argv);
        if (synth->parsed()) return cmd_synth(g, scene_path, out_events, out_gt);
        if (train->parsed())
            return cmd_train(g, train_events, train_gt, weights_out, anchors_out);
        if (run->parsed()) return cmd_run(g, run_events, run_gt, run_out);
        if (eval_cmd->parsed()) return cmd_eval(eval_tracks, eval_gt, eval_out);
        if (cost_cmd->parsed()) return cmd_cost(g, cost_report_path);
        if (render->parsed()) return cmd_render(g, render_events, render_tracks, render_out);
        return 2;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const InternalError& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
}
