#include "evtrack/events.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstring>
#include <fstream>
#include <limits>

#include "evtrack/cost.hpp"
#include "evtrack/errors.hpp"

namespace evt {

namespace {

constexpr char kBinMagic[4] = {'E', 'V', 'T', '1'};

void check_bounds(const Event& e, const SensorGeometry& g, std::size_t record) {
    if (e.x < 0 || e.x >= g.width)
        throw DataError("event " + std::to_string(record) + ": x=" + std::to_string(e.x) +
                        " outside sensor width " + std::to_string(g.width));
    if (e.y < 0 || e.y >= g.height)
        throw DataError("event " + std::to_string(record) + ": y=" + std::to_string(e.y) +
                        " outside sensor height " + std::to_string(g.height));
    if (e.t < 0)
        throw DataError("event " + std::to_string(record) + ": negative timestamp");
}

void finalize(EventStream& s, const ReadOptions& opts, const std::string& path) {
    bool sorted = std::is_sorted(s.events.begin(), s.events.end(),
                                 [](const Event& a, const Event& b) { return a.t < b.t; });
    if (!sorted) {
        if (!opts.sort_on_decreasing)
            throw DataError(path + ": decreasing timestamps (pass sort=true to stable-sort)");
        std::stable_sort(s.events.begin(), s.events.end(),
                         [](const Event& a, const Event& b) { return a.t < b.t; });
    }
}

long long parse_int(std::string_view field, const std::string& context) {
    long long value = 0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last)
        throw DataError(context + ": bad integer '" + std::string(field) + "'");
    return value;
}

template <typename T>
void write_le(std::ostream& out, T value) {
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i)
        buf[i] = static_cast<unsigned char>((std::uint64_t(value) >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
bool read_le(std::istream& in, T& value) {
    unsigned char buf[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) return false;
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= std::uint64_t(buf[i]) << (8 * i);
    value = static_cast<T>(v);
    return true;
}

}  // namespace

void validate_stream(const EventStream& stream) {
    std::int64_t prev = std::numeric_limits<std::int64_t>::min();
    std::size_t i = 0;
    for (const Event& e : stream.events) {
        check_bounds(e, stream.geometry, i);
        if (e.t < prev)
            throw DataError("event " + std::to_string(i) + ": timestamp decreases");
        prev = e.t;
        ++i;
    }
}

EventFormat format_from_path(const std::string& path) {
    if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".bin") == 0)
        return EventFormat::Bin;
    return EventFormat::Csv;
}

static EventStream read_events_csv(const std::string& path, const ReadOptions& opts) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    EventStream stream;
    std::string line;
    std::size_t line_no = 0;
    bool have_geometry = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(line_no);
        if (line[0] == '#') {
            auto pos = line.find("geometry=");
            if (pos != std::string::npos) {
                auto spec = line.substr(pos + 9);
                auto x = spec.find('x');
                if (x == std::string::npos) throw DataError(where + ": bad geometry header");
                stream.geometry.width = int(parse_int(std::string_view(spec).substr(0, x), where));
                stream.geometry.height = int(parse_int(std::string_view(spec).substr(x + 1), where));
                if (stream.geometry.width < 1 || stream.geometry.height < 1)
                    throw DataError(where + ": geometry must be at least 1x1");
                have_geometry = true;
            }
            continue;
        }
        std::string_view rest(line);
        std::array<std::string_view, 4> fields;
        for (int f = 0; f < 4; ++f) {
            auto comma = rest.find(',');
            if (f < 3) {
                if (comma == std::string_view::npos)
                    throw DataError(where + ": expected 4 comma-separated fields");
                fields[f] = rest.substr(0, comma);
                rest.remove_prefix(comma + 1);
            } else {
                if (comma != std::string_view::npos)
                    throw DataError(where + ": trailing fields");
                fields[f] = rest;
            }
        }
        Event e;
        e.t = parse_int(fields[0], where);
        e.x = int(parse_int(fields[1], where));
        e.y = int(parse_int(fields[2], where));
        const long long p = parse_int(fields[3], where);
        if (p != 0 && p != 1) throw DataError(where + ": polarity must be 0 or 1");
        e.p = static_cast<Polarity>(p);
        if (!have_geometry) throw DataError(where + ": event before geometry header");
        check_bounds(e, stream.geometry, line_no);
        stream.events.push_back(e);
    }
    if (!have_geometry) throw DataError(path + ": missing '# geometry=<A>x<B>' header");
    finalize(stream, opts, path);
    return stream;
}

static EventStream read_events_bin(const std::string& path, const ReadOptions& opts) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kBinMagic, 4) != 0)
        throw DataError(path + ": bad magic, expected EVT1");
    EventStream stream;
    std::uint16_t a = 0, b = 0;
    if (!read_le(in, a) || !read_le(in, b)) throw DataError(path + ": truncated header");
    stream.geometry = {int(a), int(b)};
    if (a < 1 || b < 1) throw DataError(path + ": geometry must be at least 1x1");
    while (true) {
        std::uint64_t t = 0;
        std::uint16_t x = 0, y = 0;
        std::uint8_t p = 0;
        if (!read_le(in, t)) break;
        if (!read_le(in, x) || !read_le(in, y) || !read_le(in, p))
            throw DataError(path + ": truncated record at offset " +
                            std::to_string(std::int64_t(in.tellg())));
        if (p > 1) throw DataError(path + ": polarity must be 0 or 1");
        Event e{std::int64_t(t), int(x), int(y), static_cast<Polarity>(p)};
        check_bounds(e, stream.geometry, stream.events.size());
        stream.events.push_back(e);
    }
    finalize(stream, opts, path);
    return stream;
}

EventStream read_events(const std::string& path, EventFormat format,
                        const ReadOptions& opts) {
    return format == EventFormat::Csv ? read_events_csv(path, opts)
                                      : read_events_bin(path, opts);
}

void write_events(const EventStream& stream, const std::string& path,
                  EventFormat format) {
    if (format == EventFormat::Csv) {
        std::ofstream out(path);
        if (!out) throw DataError("cannot write " + path);
        out << "# geometry=" << stream.geometry.width << 'x' << stream.geometry.height
            << '\n';
        for (const Event& e : stream.events)
            out << e.t << ',' << e.x << ',' << e.y << ',' << int(e.p) << '\n';
        if (!out) throw DataError("write failure on " + path);
    } else {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw DataError("cannot write " + path);
        out.write(kBinMagic, 4);
        write_le(out, std::uint16_t(stream.geometry.width));
        write_le(out, std::uint16_t(stream.geometry.height));
        for (const Event& e : stream.events) {
            write_le(out, std::uint64_t(e.t));
            write_le(out, std::uint16_t(e.x));
            write_le(out, std::uint16_t(e.y));
            write_le(out, std::uint8_t(e.p));
        }
        if (!out) throw DataError("write failure on " + path);
    }
}

EventStream refractory_filter(const EventStream& stream, std::int64_t t_refr_us,
                              OpCounters* counters) {
    if (t_refr_us <= 0) throw DataError("refractory period must be positive");
    EventStream out;
    out.geometry = stream.geometry;
    out.events.reserve(stream.events.size());
    constexpr std::int64_t kNever = std::numeric_limits<std::int64_t>::min() / 2;
    std::vector<std::int64_t> last_kept(std::size_t(stream.geometry.area()), kNever);
    std::uint64_t ops = 0;
    for (const Event& e : stream.events) {
        std::int64_t& last = last_kept[std::size_t(e.y) * stream.geometry.width + e.x];
        ops += 3;  // read, subtract, compare
        if (e.t - last >= t_refr_us) {
            out.events.push_back(e);
            last = e.t;
            ops += 1;
        }
    }
    if (counters) counters->refractory_ops += ops;
    return out;
}

EventStream nn_filter(const EventStream& stream, std::int64_t t_corr_us, int radius,
                      OpCounters* counters) {
    if (t_corr_us <= 0) throw DataError("correlation time must be positive");
    if (radius < 1) throw DataError("neighbourhood radius must be at least 1");
    EventStream out;
    out.geometry = stream.geometry;
    out.events.reserve(stream.events.size());
    constexpr std::int64_t kNever = std::numeric_limits<std::int64_t>::min() / 2;
    const int w = stream.geometry.width, h = stream.geometry.height;
    std::vector<std::int64_t> last(std::size_t(w) * h, kNever);
    std::uint64_t ops = 0;
    for (const Event& e : stream.events) {
        bool supported = false;
        for (int dy = -radius; dy <= radius && !supported; ++dy) {
            const int ny = e.y + dy;
            if (ny < 0 || ny >= h) continue;
            for (int dx = -radius; dx <= radius; ++dx) {
                const int nx = e.x + dx;
                if (nx < 0 || nx >= w) continue;
                ops += 3;  // read, subtract, compare
                if (e.t - last[std::size_t(ny) * w + nx] <= t_corr_us) {
                    supported = true;
                    break;
                }
            }
        }
        last[std::size_t(e.y) * w + e.x] = e.t;
        ops += 1;
        if (supported) out.events.push_back(e);
    }
    if (counters) counters->nn_filter_ops += ops;
    return out;
}

}  // namespace evt
