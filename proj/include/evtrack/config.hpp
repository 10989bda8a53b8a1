#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "evtrack/ebms.hpp"
#include "evtrack/frame.hpp"
#include "evtrack/kalman.hpp"
#include "evtrack/nndc.hpp"
#include "evtrack/tracker.hpp"

namespace evt {

/// Parsed `key=value` file with [section] headers. Repeated sections are
/// kept in file order; '#' starts a comment.
struct ConfigSection {
    std::string name;
    std::map<std::string, std::string> values;
    std::vector<std::string> order;
};

struct ConfigFile {
    std::vector<ConfigSection> sections;

    const ConfigSection* find(const std::string& name) const;
    std::vector<const ConfigSection*> find_all(const std::string& name) const;
};

ConfigFile parse_config(const std::string& text);
ConfigFile read_config(const std::string& path);

enum class TrackerKind { OT, KF, EBMS };

/// Every default equals the published parameter where one exists
/// (t_F = 66 ms, p = 3, s1 = 6, s2 = 3, 8 proposals/trackers, thr = 0.1,
/// thr_ns = 0.3, lambda = 5).
struct PipelineConfig {
    FramePlan frame;
    int median_window = 3;
    int s1 = 6;
    int s2 = 3;
    int max_rp = 8;
    int hist_threshold = 1;
    bool use_hist_rp = false;
    double thr = 0.1;
    double thr_ns = 0.3;
    int patch_side = 42;
    TrackerKind tracker = TrackerKind::OT;
    OTConfig ot;
    KFConfig kf;
    EBMSConfig ebms;
    TrainConfig train;
    // event pre-filters (0 disables); the EBMS baseline uses 50 ms / 5 ms
    std::int64_t refractory_us = 0;
    std::int64_t nn_filter_us = 0;
    int nn_filter_radius = 1;
    bool sort_on_decreasing = false;
    std::uint64_t seed = 1;

    std::string weights_path;
    std::string anchors_path;
};

/// Applies a config file on top of the defaults. Unknown sections or keys
/// are hard errors.
PipelineConfig pipeline_config_from(const ConfigFile& file);

}  // namespace evt
