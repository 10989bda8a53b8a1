#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "evtrack/errors.hpp"
#include "evtrack/events.hpp"
#include "evtrack/frame.hpp"

using namespace evt;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

EventStream random_stream(std::uint64_t seed, std::size_t n, int w = 240, int h = 180) {
    std::mt19937_64 rng(seed);
    EventStream s;
    s.geometry = {w, h};
    std::int64_t t = 0;
    for (std::size_t i = 0; i < n; ++i) {
        t += std::int64_t(rng() % 500);
        s.events.push_back({t, int(rng() % std::uint64_t(w)),
                            int(rng() % std::uint64_t(h)),
                            (rng() & 1) ? Polarity::On : Polarity::Off});
    }
    return s;
}

}  // namespace

TEST_CASE("csv parsing: minimal body") {
    const std::string path = temp_path("evt_min.csv");
    write_file(path, "# geometry=240x180\n0,3,4,1\n10,3,4,0\n");
    const EventStream s = read_events(path, EventFormat::Csv);
    CHECK(s.geometry.width == 240);
    CHECK(s.geometry.height == 180);
    REQUIRE(s.size() == 2);
    CHECK(s.events[0] == Event{0, 3, 4, Polarity::On});
    CHECK(s.events[1] == Event{10, 3, 4, Polarity::Off});
}

TEST_CASE("csv parsing: empty body keeps geometry") {
    const std::string path = temp_path("evt_empty.csv");
    write_file(path, "# geometry=64x48\n");
    const EventStream s = read_events(path, EventFormat::Csv);
    CHECK(s.empty());
    CHECK(s.geometry.width == 64);
}

TEST_CASE("csv parsing: out-of-bounds coordinate names the offender") {
    const std::string path = temp_path("evt_oob.csv");
    write_file(path, "# geometry=240x180\n5,300,4,1\n");
    CHECK_THROWS_WITH_AS(read_events(path, EventFormat::Csv),
                         doctest::Contains("300"), DataError);
}

TEST_CASE("csv parsing: malformed record reports the line") {
    const std::string path = temp_path("evt_bad.csv");
    write_file(path, "# geometry=240x180\n1,2,3,1\nnonsense\n");
    CHECK_THROWS_WITH_AS(read_events(path, EventFormat::Csv), doctest::Contains(":3"),
                         DataError);
}

TEST_CASE("decreasing timestamps: rejected by default, sortable on request") {
    const std::string path = temp_path("evt_dec.csv");
    write_file(path, "# geometry=240x180\n10,1,1,1\n5,2,2,0\n");
    CHECK_THROWS_AS(read_events(path, EventFormat::Csv), DataError);
    const EventStream s = read_events(path, EventFormat::Csv, {.sort_on_decreasing = true});
    REQUIRE(s.size() == 2);
    CHECK(s.events[0].t == 5);
    CHECK(s.events[1].t == 10);
}

TEST_CASE("round-trip identity in both formats") {
    const EventStream s = random_stream(42, 1000);
    for (EventFormat fmt : {EventFormat::Csv, EventFormat::Bin}) {
        const std::string path =
            temp_path(fmt == EventFormat::Csv ? "evt_rt.csv" : "evt_rt.bin");
        write_events(s, path, fmt);
        const EventStream back = read_events(path, fmt);
        CHECK(back.geometry == s.geometry);
        CHECK(back.events == s.events);
    }
}

TEST_CASE("empty stream writes a header-only csv") {
    EventStream s;
    s.geometry = {240, 180};
    const std::string path = temp_path("evt_hdr.csv");
    write_events(s, path, EventFormat::Csv);
    CHECK(read_file(path) == "# geometry=240x180\n");
}

TEST_CASE("csv -> bin -> csv reproduces the byte-identical body") {
    const EventStream s = random_stream(7, 500);
    const std::string csv1 = temp_path("evt_c1.csv");
    const std::string bin = temp_path("evt_c1.bin");
    const std::string csv2 = temp_path("evt_c2.csv");
    write_events(s, csv1, EventFormat::Csv);
    write_events(read_events(csv1, EventFormat::Csv), bin, EventFormat::Bin);
    write_events(read_events(bin, EventFormat::Bin), csv2, EventFormat::Csv);
    CHECK(read_file(csv1) == read_file(csv2));
}

TEST_CASE("bin format rejects a bad magic") {
    const std::string path = temp_path("evt_badmagic.bin");
    write_file(path, "NOPE");
    CHECK_THROWS_AS(read_events(path, EventFormat::Bin), DataError);
}

TEST_CASE("refractory filter: per-pixel dead time") {
    EventStream s;
    s.geometry = {240, 180};
    s.events = {{0, 5, 5, Polarity::On},
                {30000, 5, 5, Polarity::On},
                {80000, 5, 5, Polarity::Off}};
    const EventStream out = refractory_filter(s, 50000);
    REQUIRE(out.size() == 2);
    CHECK(out.events[0].t == 0);
    CHECK(out.events[1].t == 80000);
}

TEST_CASE("refractory filter: distinct pixels never interact") {
    EventStream s;
    s.geometry = {240, 180};
    for (int i = 0; i < 20; ++i) s.events.push_back({i, i, i, Polarity::On});
    CHECK(refractory_filter(s, 50000).size() == 20);
}

TEST_CASE("refractory filter: empty stream") {
    EventStream s;
    s.geometry = {240, 180};
    CHECK(refractory_filter(s, 50000).empty());
    CHECK(nn_filter(s, 5000).empty());
}

TEST_CASE("nn filter: lone event is dropped, supported event passes") {
    EventStream s;
    s.geometry = {240, 180};
    s.events = {{0, 50, 50, Polarity::On}, {1000, 51, 50, Polarity::Off}};
    const EventStream out = nn_filter(s, 5000);
    REQUIRE(out.size() == 1);
    CHECK(out.events[0].t == 1000);

    EventStream lone;
    lone.geometry = {240, 180};
    lone.events = {{0, 50, 50, Polarity::On}};
    CHECK(nn_filter(lone, 5000).empty());
}

TEST_CASE("nn filter: same-pixel history counts as support") {
    EventStream s;
    s.geometry = {240, 180};
    s.events = {{0, 9, 9, Polarity::On}, {2000, 9, 9, Polarity::On}};
    const EventStream out = nn_filter(s, 5000);
    REQUIRE(out.size() == 1);
    CHECK(out.events[0].t == 2000);
}

TEST_CASE("filters select subsequences and refractory is idempotent") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const EventStream s = random_stream(seed, 2000, 32, 32);
        for (const EventStream& f :
             {refractory_filter(s, 3000), nn_filter(s, 3000)}) {
            // subsequence: every output event appears in order in the input
            std::size_t cursor = 0;
            for (const Event& e : f.events) {
                while (cursor < s.size() && !(s.events[cursor] == e)) ++cursor;
                REQUIRE(cursor < s.size());
                ++cursor;
            }
        }
        const EventStream once = refractory_filter(s, 3000);
        const EventStream twice = refractory_filter(once, 3000);
        CHECK(once.events == twice.events);
    }
}

TEST_CASE("nn filter with huge correlation time drops only first arrivals") {
    const EventStream s = random_stream(11, 3000, 16, 16);
    const EventStream out = nn_filter(s, std::int64_t(1) << 60);
    // an event is a "first arrival" when no earlier event exists anywhere in
    // its neighbourhood; with unlimited correlation time everything else passes
    std::size_t expected = 0;
    std::vector<bool> seen(16 * 16, false);
    for (const Event& e : s.events) {
        bool supported = false;
        for (int dy = -1; dy <= 1 && !supported; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                const int nx = e.x + dx, ny = e.y + dy;
                if (nx < 0 || ny < 0 || nx >= 16 || ny >= 16) continue;
                if (seen[std::size_t(ny) * 16 + nx]) {
                    supported = true;
                    break;
                }
            }
        seen[std::size_t(e.y) * 16 + e.x] = true;
        if (supported) ++expected;
    }
    CHECK(out.size() == expected);
}

TEST_CASE("median survivors always have nn-filter-level support") {
    // the median threshold floor(p^2/2) is stricter than the single-neighbour
    // rule, so every surviving pixel implies at least one active neighbour
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        BinaryFrame frame(32, 32);
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x)
                if (rng() % 100 < 30) frame.set(x, y);
        const BinaryFrame filtered = median_filter(frame, 3);
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x) {
                if (!filtered.get(x, y)) continue;
                int window = 0, neighbours = 0;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = x + dx, ny = y + dy;
                        if (nx < 0 || ny < 0 || nx >= 32 || ny >= 32) continue;
                        if (!frame.get(nx, ny)) continue;
                        ++window;
                        if (dx || dy) ++neighbours;
                    }
                CHECK(window >= 5);
                CHECK(neighbours >= 1);
            }
    }
}
