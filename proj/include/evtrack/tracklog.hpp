#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evtrack/geometry.hpp"

namespace evt {

inline constexpr int kUnknownClass = -1;

struct TrackRow {
    std::int64_t frame_idx = 0;
    int track_id = 0;
    int class_id = kUnknownClass;
    BoundingBox box;
    bool occluded = false;
};

using TrackLog = std::vector<TrackRow>;

/// CSV schema `frame_idx,track_id,class_id,x,y,w,h,occluded`; ground-truth
/// annotation files use the same columns (occluded optional on read).
void write_tracklog_csv(const TrackLog& log, const std::string& path);
TrackLog read_tracklog_csv(const std::string& path);

}  // namespace evt
