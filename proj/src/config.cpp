#include "evtrack/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "evtrack/errors.hpp"

namespace evt {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("key '" + key + "': expected a boolean, got '" + v + "'");
}

}  // namespace

const ConfigSection* ConfigFile::find(const std::string& name) const {
    for (const ConfigSection& s : sections)
        if (s.name == name) return &s;
    return nullptr;
}

std::vector<const ConfigSection*> ConfigFile::find_all(const std::string& name) const {
    std::vector<const ConfigSection*> out;
    for (const ConfigSection& s : sections)
        if (s.name == name) out.push_back(&s);
    return out;
}

ConfigFile parse_config(const std::string& text) {
    ConfigFile file;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("line " + std::to_string(line_no) + ": unterminated section");
            file.sections.push_back({trim(line.substr(1, line.size() - 2)), {}, {}});
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key=value");
        if (file.sections.empty())
            throw ConfigError("line " + std::to_string(line_no) + ": key before any section");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        ConfigSection& sec = file.sections.back();
        if (sec.values.count(key))
            throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" +
                              key + "'");
        sec.values[key] = value;
        sec.order.push_back(key);
    }
    return file;
}

ConfigFile read_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

PipelineConfig pipeline_config_from(const ConfigFile& file) {
    PipelineConfig cfg;
    for (const ConfigSection& sec : file.sections) {
        auto intv = [&](const std::string& v) { return std::stoi(v); };
        auto i64v = [&](const std::string& v) { return std::stoll(v); };
        auto dblv = [&](const std::string& v) { return std::stod(v); };

        if (sec.name == "frame") {
            for (const auto& key : sec.order) {
                const std::string& v = sec.values.at(key);
                if (key == "t_f_us")
                    cfg.frame.t_f_us = i64v(v);
                else if (key == "start_us")
                    cfg.frame.start_us = i64v(v);
                else if (key == "emit_empty")
                    cfg.frame.emit_empty = parse_bool(v, key);
                else
                    throw ConfigError("unknown [frame] key '" + key + "'");
            }
        } else if (sec.name == "filter") {
            for (const auto& key : sec.order) {
                const std::string& v = sec.values.at(key);
                if (key == "median_window")
                    cfg.median_window = intv(v);
                else if (key == "refractory_us")
                    cfg.refractory_us = i64v(v);
                else if (key == "nn_filter_us")
                    cfg.nn_filter_us = i64v(v);
                else if (key == "nn_filter_radius")
                    cfg.nn_filter_radius = intv(v);
                else
                    throw ConfigError("unknown [filter] key '" + key + "'");
            }
        } else if (sec.name == "rp") {
            for (const auto& key : sec.order) {
                const std::string& v = sec.values.at(key);
                if (key == "s1")
                    cfg.s1 = intv(v);
                else if (key == "s2")
                    cfg.s2 = intv(v);
                else if (key == "max_rp")
                    cfg.max_rp = intv(v);
                else if (key == "hist_threshold")
                    cfg.hist_threshold = intv(v);
                else if (key == "method") {
                    if (v == "ccl")
                        cfg.use_hist_rp = false;
                    else if (v == "hist")
                        cfg.use_hist_rp = true;
                    else
                        throw ConfigError("rp method must be 'ccl' or 'hist'");
                } else
                    throw ConfigError("unknown [rp] key '" + key + "'");
            }
        } else if (sec.name == "nndc") {
            for (const auto& key : sec.order) {
                const std::string& v = sec.values.at(key);
                if (key == "thr")
                    cfg.thr = dblv(v);
                else if (key == "thr_ns")
                    cfg.thr_ns = dblv(v);
                else if (key == "patch_side")
                    cfg.patch_side = intv(v);
                else if (key == "weights")
                    cfg.weights_path = v;
                else if (key == "anchors")
                    cfg.anchors_path = v;
                else
                    throw ConfigError("unknown [nndc] key '" + key + "'");
            }
        } else if (sec.name == "train") {
            for (const auto& key : sec.order) {
                const std::string& v = sec.values.at(key);
                if (key == "batch_size")
                    cfg.train.batch_size = intv(v);
                else if (key == "epochs")
                    cfg.train.epochs = intv(v);
                else if (key == "learning_rate")
                    cfg.train.learning_rate = dblv(v);
                else if (key == "lambda")
                    cfg.train.lambda = dblv(v);
                else if (key == "patience")
                    cfg.train.patience = intv(v);
                else if (key == "val_split")
                    cfg.train.val_split = dblv(v);
                else
                    throw ConfigError("unknown [train] key '" + key + "'");
            }
        } else if (sec.name == "tracker") {
            for (const auto& key : sec.order) {
                const std::string& v = sec.values.at(key);
                if (key == "kind") {
                    if (v == "ot")
                        cfg.tracker = TrackerKind::OT;
                    else if (v == "kf")
                        cfg.tracker = TrackerKind::KF;
                    else if (v == "ebms")
                        cfg.tracker = TrackerKind::EBMS;
                    else
                        throw ConfigError("tracker kind must be ot, kf or ebms");
                } else if (key == "max_trackers") {
                    cfg.ot.max_trackers = intv(v);
                    cfg.kf.max_trackers = intv(v);
                } else if (key == "t_ov")
                    cfg.ot.t_ov = dblv(v);
                else if (key == "n_occl")
                    cfg.ot.n_occl = intv(v);
                else if (key == "kappa_pos")
                    cfg.ot.kappa_pos = dblv(v);
                else if (key == "kappa_vel")
                    cfg.ot.kappa_vel = dblv(v);
                else if (key == "max_invisible") {
                    cfg.ot.max_invisible = intv(v);
                    cfg.kf.max_invisible = intv(v);
                } else if (key == "min_visibility") {
                    cfg.ot.min_visibility = dblv(v);
                    cfg.kf.min_visibility = dblv(v);
                } else if (key == "min_locked_frames")
                    cfg.ot.min_locked_frames = intv(v);
                else
                    throw ConfigError("unknown [tracker] key '" + key + "'");
            }
        } else if (sec.name == "ebms") {
            for (const auto& key : sec.order) {
                const std::string& v = sec.values.at(key);
                if (key == "max_radius")
                    cfg.ebms.max_radius = dblv(v);
                else if (key == "min_events")
                    cfg.ebms.min_events = intv(v);
                else if (key == "inactivity_us")
                    cfg.ebms.inactivity_us = i64v(v);
                else if (key == "blend")
                    cfg.ebms.blend = dblv(v);
                else if (key == "history")
                    cfg.ebms.history = intv(v);
                else if (key == "box_decay")
                    cfg.ebms.box_decay = dblv(v);
                else
                    throw ConfigError("unknown [ebms] key '" + key + "'");
            }
        } else if (sec.name == "io") {
            for (const auto& key : sec.order) {
                const std::string& v = sec.values.at(key);
                if (key == "sort_on_decreasing")
                    cfg.sort_on_decreasing = parse_bool(v, key);
                else if (key == "seed")
                    cfg.seed = std::stoull(v);
                else
                    throw ConfigError("unknown [io] key '" + key + "'");
            }
        } else {
            throw ConfigError("unknown section [" + sec.name + "]");
        }
    }

    if (cfg.median_window < 3 || cfg.median_window % 2 == 0)
        throw ConfigError("median_window must be odd and >= 3");
    if (cfg.frame.t_f_us <= 0) throw ConfigError("t_f_us must be positive");
    if (cfg.s1 < 1 || cfg.s2 < 1) throw ConfigError("scale factors must be >= 1");
    if (cfg.thr <= 0 || cfg.thr >= 1) throw ConfigError("thr must lie in (0,1)");
    if (cfg.thr_ns <= 0 || cfg.thr_ns >= 1) throw ConfigError("thr_ns must lie in (0,1)");
    if (cfg.ot.t_ov <= 0 || cfg.ot.t_ov > 1) throw ConfigError("t_ov must lie in (0,1]");
    cfg.ebms.t_f_us = cfg.frame.t_f_us;
    cfg.train.seed = cfg.seed;
    cfg.train.thr = cfg.thr;
    cfg.train.thr_ns = cfg.thr_ns;
    return cfg;
}

}  // namespace evt
