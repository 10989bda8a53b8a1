#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evtrack/geometry.hpp"

namespace evt {

enum class Polarity : std::uint8_t { Off = 0, On = 1 };

struct Event {
    std::int64_t t = 0;  // microseconds
    int x = 0;
    int y = 0;
    Polarity p = Polarity::Off;

    bool operator==(const Event&) const = default;
};

/// Timestamp-sorted, in-bounds event sequence for one recording.
struct EventStream {
    SensorGeometry geometry;
    std::vector<Event> events;

    bool empty() const { return events.empty(); }
    std::size_t size() const { return events.size(); }
};

/// Validates ordering and bounds; throws DataError on violation.
void validate_stream(const EventStream& stream);

enum class EventFormat { Csv, Bin };

struct ReadOptions {
    /// When true, decreasing timestamps are stable-sorted instead of rejected.
    bool sort_on_decreasing = false;
};

EventFormat format_from_path(const std::string& path);

EventStream read_events(const std::string& path, EventFormat format,
                        const ReadOptions& opts = {});
void write_events(const EventStream& stream, const std::string& path,
                  EventFormat format);

struct OpCounters;  // cost.hpp

/// Per-pixel dead time: an event passes only if no passed event occurred at
/// the same pixel within the preceding t_refr microseconds.
EventStream refractory_filter(const EventStream& stream, std::int64_t t_refr_us,
                              OpCounters* counters = nullptr);

/// Nearest-neighbour (background activity) filter: an event passes iff any
/// earlier event fell inside its (2*radius+1)^2 neighbourhood within the last
/// t_corr microseconds. The pixel's own history counts as support; polarity is
/// ignored. Every event updates the last-timestamp map whether or not it
/// passes.
EventStream nn_filter(const EventStream& stream, std::int64_t t_corr_us,
                      int radius = 1, OpCounters* counters = nullptr);

}  // namespace evt
