#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <queue>
#include <vector>

#include "aegn/errors.hpp"
#include "aegn/events.hpp"
#include "aegn/graph.hpp"
#include "aegn/rng.hpp"

using namespace aegn;

namespace {

EventList random_stream(uint64_t seed, size_t n, uint16_t w = 48, uint16_t h = 32,
                        uint64_t duration = 50000) {
    SynthParams params;
    params.width = w;
    params.height = h;
    params.duration_us = duration;
    params.rate = double(n) / double(duration);
    params.noise_rate = params.rate * 0.3;
    params.seed = seed;
    return generate_synthetic(SynthPattern::Mixed, params);
}

// All-pairs reference construction: no spatial hash, just the insertion
// rule applied literally. Candidates of node i are earlier nodes within
// the radius, closest first with ids breaking ties; an edge lands only
// while i itself is below the cap, and skips candidates already at it.
EventGraph oracle_build(const EventList& list, const GraphParams& params) {
    EventGraph g;
    g.width = list.width;
    g.height = list.height;
    g.params = params;
    const double r2 = params.radius * params.radius;
    for (size_t i = 0; i < list.events.size(); ++i) {
        const Event& e = list.events[i];
        g.events.push_back(e);
        g.positions.push_back({double(e.x), double(e.y), params.beta * double(e.t)});
        g.adj.emplace_back();
        struct Cand {
            double d2;
            int32_t id;
        };
        std::vector<Cand> cands;
        for (size_t j = 0; j < i; ++j) {
            double d2 = 0.0;
            for (int s = 0; s < 3; ++s) {
                const double d = g.positions[i][s] - g.positions[j][s];
                d2 += d * d;
            }
            if (d2 <= r2) cands.push_back({d2, int32_t(j)});
        }
        std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
            return a.d2 != b.d2 ? a.d2 < b.d2 : a.id < b.id;
        });
        for (const Cand& c : cands) {
            if (g.adj[i].size() >= size_t(params.max_degree)) break;
            if (g.adj[c.id].size() >= size_t(params.max_degree)) continue;
            EdgeTo fwd;
            fwd.to = c.id;
            fwd.u = pseudo_offset(g.positions[i], g.positions[c.id], params.radius);
            g.adj[i].push_back(fwd);
            EdgeTo back;
            back.to = int32_t(i);
            back.u = pseudo_offset(g.positions[c.id], g.positions[i], params.radius);
            g.adj[c.id].push_back(back);
        }
    }
    return g;
}

std::vector<int32_t> oracle_k_hop(const EventGraph& g, std::vector<int32_t> seeds, int k) {
    std::vector<int> dist(g.num_nodes(), -1);
    std::queue<int32_t> q;
    for (int32_t s : seeds) {
        if (dist[s] == -1) {
            dist[s] = 0;
            q.push(s);
        }
    }
    while (!q.empty()) {
        const int32_t v = q.front();
        q.pop();
        if (dist[v] == k) continue;
        for (const EdgeTo& e : g.adj[v])
            if (dist[e.to] == -1) {
                dist[e.to] = dist[v] + 1;
                q.push(e.to);
            }
    }
    std::vector<int32_t> out;
    for (int32_t i = 0; i < g.num_nodes(); ++i)
        if (dist[i] >= 0) out.push_back(i);
    return out;
}

} // namespace

TEST_CASE("construction matches the all-pairs reference") {
    GraphParams params;
    params.radius = 3.0;
    params.beta = 0.0005;
    for (int dmax : {4, 16}) {
        params.max_degree = dmax;
        for (uint64_t seed = 0; seed < 25; ++seed) {
            const EventList list = random_stream(seed, 180);
            const EventGraph got = build_graph(list, params);
            const EventGraph want = oracle_build(list, params);
            REQUIRE(got.num_nodes() == want.num_nodes());
            CHECK(got == want);
        }
    }
}

TEST_CASE("folding single insertions reproduces batch construction") {
    GraphParams params;
    params.beta = 0.001;
    for (uint64_t seed = 100; seed < 110; ++seed) {
        const EventList list = random_stream(seed, 250);
        const EventGraph batch = build_graph(list, params);

        EventList empty;
        empty.width = list.width;
        empty.height = list.height;
        EventGraph folded = build_graph(empty, params);
        for (const Event& e : list.events) insert_event(folded, e);
        CHECK(folded == batch);
    }
}

TEST_CASE("degree never exceeds the cap") {
    GraphParams params;
    params.max_degree = 3;
    params.beta = 0.0; // all events on one plane, maximal crowding
    const EventList list = random_stream(5, 400);
    const EventGraph g = build_graph(list, params);
    size_t edges = 0;
    for (int32_t i = 0; i < g.num_nodes(); ++i) {
        CHECK(g.degree(i) <= 3);
        edges += g.adj[i].size();
    }
    CHECK(edges == g.num_directed_edges());
    CHECK(edges > 0);
}

TEST_CASE("capacity rule on a hand-built line") {
    // Three nodes on a line, cap 1: the first pair saturates, the third
    // finds both candidates full and stays isolated.
    EventList list;
    list.width = 8;
    list.height = 8;
    list.events = {{0, 0, 0, 1}, {1, 0, 0, 1}, {2, 0, 0, -1}};
    GraphParams params;
    params.radius = 3.0;
    params.max_degree = 1;
    params.beta = 1.0;
    const EventGraph g = build_graph(list, params);
    CHECK(g.degree(0) == 1);
    CHECK(g.degree(1) == 1);
    CHECK(g.degree(2) == 0);
    CHECK(g.adj[0][0].to == 1);
    CHECK(g.adj[1][0].to == 0);
}

TEST_CASE("closer candidates win over earlier ids") {
    // Nodes 0 and 1 sit out of each other's reach. Node 2 has room for a
    // single edge and two candidates: id order would pick 0, distance
    // order picks 1.
    EventList list;
    list.width = 16;
    list.height = 8;
    list.events = {{0, 0, 0, 1}, {5, 0, 0, 1}, {3, 0, 0, 1}};
    GraphParams params;
    params.radius = 3.5;
    params.max_degree = 1;
    params.beta = 1.0;
    const EventGraph g = build_graph(list, params);
    CHECK(g.degree(0) == 0);
    REQUIRE(g.adj[2].size() == 1);
    CHECK(g.adj[2][0].to == 1);
}

TEST_CASE("equal distances break ties by id") {
    EventList list;
    list.width = 16;
    list.height = 8;
    list.events = {{0, 0, 0, 1}, {6, 0, 0, 1}, {3, 0, 0, 1}};
    GraphParams params;
    params.radius = 3.0;
    params.max_degree = 1;
    params.beta = 1.0;
    const EventGraph g = build_graph(list, params);
    CHECK(g.degree(1) == 0);
    REQUIRE(g.adj[2].size() == 1);
    CHECK(g.adj[2][0].to == 0);
}

TEST_CASE("out-of-order insertion is rejected") {
    EventList empty;
    empty.width = 8;
    empty.height = 8;
    EventGraph g = build_graph(empty, GraphParams{});
    insert_event(g, {1, 1, 100, 1});
    CHECK_THROWS_AS(insert_event(g, {1, 1, 99, 1}), OrderingError);
    insert_event(g, {1, 1, 100, -1}); // equal timestamps are fine
    CHECK(g.num_nodes() == 2);
}

TEST_CASE("events outside the sensor are rejected") {
    EventList list;
    list.width = 8;
    list.height = 8;
    list.events = {{8, 0, 0, 1}};
    CHECK_THROWS_AS(build_graph(list, GraphParams{}), ValidationError);
    list.events = {{0, 0, 0, 0}};
    CHECK_THROWS_AS(build_graph(list, GraphParams{}), ValidationError);
}

TEST_CASE("k-hop neighborhoods match a reference BFS") {
    GraphParams params;
    params.beta = 0.0008;
    const EventList list = random_stream(42, 300);
    const EventGraph g = build_graph(list, params);
    Rng rng(9);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<int32_t> seeds;
        const int ns = 1 + int(rng.next_below(3));
        for (int s = 0; s < ns; ++s)
            seeds.push_back(int32_t(rng.next_below(uint64_t(g.num_nodes()))));
        for (int k = 0; k <= 3; ++k) {
            const auto got = k_hop(g, seeds, k);
            const auto want = oracle_k_hop(g, seeds, k);
            CHECK(got == want);
            CHECK(std::is_sorted(got.begin(), got.end()));
        }
    }
    CHECK_THROWS_AS(k_hop(g, {g.num_nodes()}, 1), LookupError);
}

TEST_CASE("pseudo-coordinates of opposite directions mirror around the center") {
    GraphParams params;
    params.beta = 0.0005;
    const EventList list = random_stream(77, 200);
    const EventGraph g = build_graph(list, params);
    bool saw_edge = false;
    for (int32_t i = 0; i < g.num_nodes(); ++i)
        for (const EdgeTo& e : g.adj[i]) {
            saw_edge = true;
            const auto uij = pseudo_coords(g, i, e.to);
            const auto uji = pseudo_coords(g, e.to, i);
            for (int s = 0; s < 3; ++s) {
                CHECK(uij[s] == doctest::Approx(e.u[s]).epsilon(1e-15));
                CHECK(uij[s] + uji[s] == doctest::Approx(1.0).epsilon(1e-12));
                CHECK(uij[s] >= 0.0);
                CHECK(uij[s] <= 1.0);
            }
        }
    CHECK(saw_edge);
    CHECK_THROWS_AS(pseudo_coords(g, 0, g.num_nodes()), LookupError);
}

TEST_CASE("offsets beyond the diameter clamp to the cube") {
    const std::array<double, 3> a{0.0, 0.0, 0.0};
    const std::array<double, 3> b{10.0, -10.0, 1.0};
    const auto u = pseudo_offset(a, b, 1.0);
    CHECK(u[0] == 1.0);
    CHECK(u[1] == 0.0);
    CHECK(u[2] == 1.0);
    const auto center = pseudo_offset(a, a, 1.0);
    CHECK(center[0] == 0.5);
    CHECK(center[1] == 0.5);
    CHECK(center[2] == 0.5);
}

TEST_CASE("default beta maps the stream span onto the larger sensor side") {
    EventList list;
    list.width = 64;
    list.height = 32;
    list.events = {{0, 0, 1000, 1}, {1, 1, 3000, 1}};
    CHECK(default_beta(list) == doctest::Approx(64.0 / 2000.0));
    EventList empty;
    empty.width = 64;
    empty.height = 32;
    CHECK(default_beta(empty) == 1.0);
    EventList flat;
    flat.width = 16;
    flat.height = 16;
    flat.events = {{0, 0, 5, 1}, {1, 1, 5, 1}};
    CHECK(default_beta(flat) == 1.0);
}

TEST_CASE("positions scale time by beta") {
    EventList list;
    list.width = 8;
    list.height = 8;
    list.events = {{3, 4, 2000, 1}};
    GraphParams params;
    params.beta = 0.25;
    const EventGraph g = build_graph(list, params);
    CHECK(g.positions[0][0] == 3.0);
    CHECK(g.positions[0][1] == 4.0);
    CHECK(g.positions[0][2] == 500.0);
}
