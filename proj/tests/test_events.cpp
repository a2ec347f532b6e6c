#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "aegn/errors.hpp"
#include "aegn/events.hpp"

using namespace aegn;

namespace {

EventList sample_stream(uint64_t seed, size_t n = 300) {
    SynthParams params;
    params.width = 100;
    params.height = 80;
    params.duration_us = 40000;
    params.rate = double(n) / 40000.0;
    params.noise_rate = params.rate * 0.5;
    params.seed = seed;
    return generate_synthetic(SynthPattern::Mixed, params);
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

} // namespace

TEST_CASE("csv parsing handles headers, zero polarity and sorting") {
    std::istringstream in("x,y,t,p\n3,4,100,1\n2,1,50,0\n7,0,100,1\n");
    const EventList list = parse_csv(in, 10, 10);
    REQUIRE(list.size() == 3);
    CHECK(list.events[0] == Event{2, 1, 50, -1});
    CHECK(list.events[1] == Event{3, 4, 100, 1});
    CHECK(list.events[2] == Event{7, 0, 100, 1});
    CHECK(list.width == 10);
    CHECK(list.height == 10);
}

TEST_CASE("csv without a header parses from the first line") {
    std::istringstream in("1,2,10,1\n0,0,5,-1\n");
    const EventList list = parse_csv(in, 4, 4);
    REQUIRE(list.size() == 2);
    CHECK(list.events[0].t == 5);
}

TEST_CASE("csv rejects out-of-range rows with the line named") {
    std::istringstream bad_x("9,0,1,1\n");
    CHECK_THROWS_WITH_AS(parse_csv(bad_x, 8, 8), doctest::Contains("line 1"), ValidationError);
    std::istringstream bad_p("x,y,t,p\n1,1,1,3\n");
    CHECK_THROWS_WITH_AS(parse_csv(bad_p, 8, 8), doctest::Contains("line 2"), ValidationError);
    std::istringstream garbage("x,y,t,p\nnope,1,1,1\n");
    CHECK_THROWS_AS(parse_csv(garbage, 8, 8), ParseError);
}

TEST_CASE("binary and csv round trips preserve every event") {
    const EventList list = sample_stream(4);

    std::stringstream bin;
    write_bin(list, bin);
    CHECK(parse_bin(bin) == list);

    std::stringstream csv;
    write_csv(list, csv);
    CHECK(parse_csv(csv, list.width, list.height) == list);
}

TEST_CASE("path loaders pick the format from the extension") {
    const EventList list = sample_stream(9);
    const std::string bin_path = temp_path("aegn_events_test.bin");
    const std::string csv_path = temp_path("aegn_events_test.csv");
    save_events(list, bin_path);
    save_events(list, csv_path);
    CHECK(load_events(bin_path, 0, 0) == list); // resolution from the header
    CHECK(load_events(csv_path, list.width, list.height) == list);
    std::filesystem::remove(bin_path);
    std::filesystem::remove(csv_path);
}

TEST_CASE("truncated or mislabeled binary input is rejected") {
    const EventList list = sample_stream(2, 50);
    std::stringstream full;
    write_bin(list, full);
    const std::string bytes = full.str();

    std::istringstream truncated(bytes.substr(0, bytes.size() - 5));
    CHECK_THROWS_AS(parse_bin(truncated), ParseError);

    std::string magic = bytes;
    magic[0] = 'X';
    std::istringstream wrong(magic);
    CHECK_THROWS_AS(parse_bin(wrong), ParseError);
}

TEST_CASE("uniform subsampling keeps every k-th event") {
    const EventList list = sample_stream(1, 101);
    const EventList thin = subsample_uniform(list, 10);
    CHECK(thin.size() == (list.size() + 9) / 10);
    for (size_t i = 0; i < thin.size(); ++i) CHECK(thin.events[i] == list.events[10 * i]);
    CHECK(subsample_uniform(list, 1) == list);
    CHECK_THROWS_AS(subsample_uniform(list, 0), InvalidParameterError);
}

TEST_CASE("random thinning is seed-stable and roughly proportional") {
    const EventList list = sample_stream(12, 2000);
    const EventList a = subsample_random(list, 4, 99);
    const EventList b = subsample_random(list, 4, 99);
    CHECK(a == b);
    const double expected = double(list.size()) / 4.0;
    CHECK(double(a.size()) > expected * 0.7);
    CHECK(double(a.size()) < expected * 1.3);
    size_t j = 0;
    for (const Event& e : list.events)
        if (j < a.events.size() && a.events[j] == e) ++j;
    CHECK(j == a.events.size()); // kept events form a subsequence
}

TEST_CASE("time windows keep the half-open trailing range") {
    EventList list;
    list.width = 4;
    list.height = 4;
    list.events = {{0, 0, 10, 1}, {1, 0, 20, 1}, {2, 0, 30, 1}, {3, 0, 40, 1}};
    const EventList w = window(list, 20, 40); // (20, 40]
    REQUIRE(w.size() == 2);
    CHECK(w.events[0].t == 30);
    CHECK(w.events[1].t == 40);
}

TEST_CASE("the moving edge emits exactly the requested count, in time order") {
    SynthParams params;
    params.width = 32;
    params.height = 24;
    params.duration_us = 10000;
    params.rate = 0.0137; // awkward on purpose: count = round(137)
    params.seed = 5;
    const EventList list = generate_synthetic(SynthPattern::MovingEdge, params);
    CHECK(list.size() == 137);
    CHECK(std::is_sorted(list.events.begin(), list.events.end(),
                         [](const Event& a, const Event& b) { return a.t < b.t; }));
    int pos = 0, neg = 0;
    for (const Event& e : list.events) {
        CHECK(e.x < params.width);
        CHECK(e.y < params.height);
        CHECK(e.t <= params.duration_us);
        (e.p > 0 ? pos : neg)++;
    }
    CHECK(pos + neg == 137);
    CHECK(pos > 0);
    CHECK(neg > 0);
}

TEST_CASE("synthesis is deterministic per seed") {
    SynthParams params;
    params.seed = 21;
    params.noise_rate = 0.002;
    const EventList a = generate_synthetic(SynthPattern::Mixed, params);
    const EventList b = generate_synthetic(SynthPattern::Mixed, params);
    CHECK(a == b);
    params.seed = 22;
    const EventList c = generate_synthetic(SynthPattern::Mixed, params);
    CHECK(a.events != c.events);
}

TEST_CASE("noise counts follow the requested rate on average") {
    SynthParams params;
    params.duration_us = 100000;
    params.noise_rate = 0.0;
    params.rate = 0.002; // expect 200 per stream
    double total = 0.0;
    const int streams = 200;
    for (int s = 0; s < streams; ++s) {
        params.seed = uint64_t(s);
        const EventList list = generate_synthetic(SynthPattern::RandomNoise, params);
        total += double(list.size());
        CHECK(std::is_sorted(list.events.begin(), list.events.end(),
                             [](const Event& a, const Event& b) { return a.t < b.t; }));
    }
    const double mean = total / streams;
    // Mean of 200 Poisson(200) draws: standard error 1, allow 5 sigma.
    CHECK(std::abs(mean - 200.0) < 5.0);
}

TEST_CASE("mixed synthesis without noise equals the pure edge") {
    SynthParams params;
    params.seed = 31;
    params.noise_rate = 0.0;
    const EventList mixed = generate_synthetic(SynthPattern::Mixed, params);
    const EventList edge = generate_synthetic(SynthPattern::MovingEdge, params);
    CHECK(mixed == edge);
}
