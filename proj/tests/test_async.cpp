#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <vector>

#include "aegn/engine.hpp"
#include "aegn/errors.hpp"
#include "aegn/forward.hpp"

using namespace aegn;

namespace {

EventList stream(uint64_t seed, size_t n, uint16_t w = 64, uint16_t h = 48) {
    SynthParams params;
    params.width = w;
    params.height = h;
    params.duration_us = 60000;
    params.rate = double(n) / 60000.0;
    params.noise_rate = params.rate * 0.25;
    params.seed = seed;
    return generate_synthetic(SynthPattern::Mixed, params);
}

GraphParams graph_params(const EventList& list) {
    GraphParams p;
    p.beta = default_beta(list);
    return p;
}

EventList head_of(const EventList& list, size_t n) {
    EventList out;
    out.width = list.width;
    out.height = list.height;
    out.events.assign(list.events.begin(), list.events.begin() + std::min(n, list.size()));
    return out;
}

// Zero when every buffer matches exactly.
double state_diff(const ForwardResult& a, const ForwardResult& b) {
    double worst = 0.0;
    auto take = [&](const FeatureMap& x, const FeatureMap& y) {
        REQUIRE(x.rows() == y.rows());
        REQUIRE(x.cols() == y.cols());
        if (x.size() > 0) worst = std::max(worst, (x - y).cwiseAbs().maxCoeff());
    };
    take(a.input, b.input);
    REQUIRE(a.y.size() == b.y.size());
    for (size_t k = 0; k < a.y.size(); ++k) take(a.y[k], b.y[k]);
    take(a.pooled1, b.pooled1);
    take(a.pooled2, b.pooled2);
    REQUIRE(a.readout.size() == b.readout.size());
    if (a.readout.size() > 0)
        worst = std::max(worst, (a.readout - b.readout).cwiseAbs().maxCoeff());
    return worst;
}

} // namespace

TEST_CASE("initialization equals a full pass") {
    const EventList list = stream(1, 200);
    const Model model = random_init(recognition_preset(), 7);
    const EventGraph g = build_graph(list, graph_params(list));
    AsyncEngine engine(model, g, {});
    const ForwardResult dense = dense_forward(model, g);
    CHECK(state_diff(engine.state(), dense) == 0.0);
}

TEST_CASE("every update equals a full pass under the pinned grids") {
    const EventList list = stream(2, 260);
    const Model model = random_init(recognition_preset(2, 3), 11);
    const EventList init = head_of(list, 180);
    AsyncEngine engine(model, build_graph(init, graph_params(list)), {});
    for (size_t i = 180; i < list.size(); ++i) {
        engine.process_event(list.events[i]);
        const ForwardResult dense =
            dense_forward(model, engine.graph(), &engine.state().pool1.grid,
                          &engine.state().pool2.grid);
        CHECK(state_diff(engine.state(), dense) == 0.0);
    }
    CHECK(engine.events_processed() == int64_t(list.size() - 180));
}

TEST_CASE("updates starting from an empty graph equal a full pass") {
    const EventList list = stream(3, 120);
    const Model model = random_init(recognition_preset(), 19);
    EventList empty;
    empty.width = list.width;
    empty.height = list.height;
    AsyncEngine engine(model, build_graph(empty, graph_params(list)), {});
    for (const Event& e : list.events) engine.process_event(e);
    const ForwardResult dense = dense_forward(
        model, engine.graph(), &engine.state().pool1.grid, &engine.state().pool2.grid);
    CHECK(state_diff(engine.state(), dense) == 0.0);
}

TEST_CASE("rows outside the announced dirty sets never change") {
    const EventList list = stream(4, 240);
    const Model model = random_init(recognition_preset(), 3);
    const int p1 = model.config.pool_after[0];
    const EventList init = head_of(list, 200);
    AsyncEngine engine(model, build_graph(init, graph_params(list)), {});

    for (size_t i = 200; i < std::min<size_t>(list.size(), 220); ++i) {
        // Shadow insertion on a copy reveals which neighbors the event
        // will pick up, without touching the engine.
        EventGraph shadow = engine.graph();
        const InsertResult ins = insert_event(shadow, list.events[i]);
        std::vector<int32_t> seeds = ins.new_neighbors;
        seeds.push_back(ins.node);
        std::sort(seeds.begin(), seeds.end());

        const ForwardResult before = engine.state();
        engine.process_event(list.events[i]);
        const ForwardResult& after = engine.state();

        std::vector<int32_t> rows = seeds;
        for (int k = 1; k <= p1; ++k) {
            if (k > 1) rows = engine.dirty_frontier(k, rows);
            for (int32_t r = 0; r < int32_t(before.y[k - 1].rows()); ++r) {
                if (std::binary_search(rows.begin(), rows.end(), r)) continue;
                for (int c = 0; c < before.y[k - 1].cols(); ++c)
                    CHECK(after.y[k - 1](r, c) == before.y[k - 1](r, c));
            }
        }
    }
}

TEST_CASE("frontier chains match k-hop reachability") {
    const EventList list = stream(5, 180);
    const Model model = random_init(recognition_preset(), 5);
    const EventGraph g = build_graph(list, graph_params(list));
    AsyncEngine engine(model, g, {});

    std::vector<int32_t> seeds = {3, 40};
    std::vector<int32_t> frontier = seeds;
    for (int hops = 1; hops <= 3; ++hops) {
        frontier = engine.dirty_frontier(1, frontier);
        CHECK(frontier == k_hop(g, seeds, hops));
    }
    CHECK_THROWS_AS(engine.dirty_frontier(0, seeds), LookupError);
    CHECK_THROWS_AS(engine.dirty_frontier(99, seeds), LookupError);
    CHECK_THROWS_AS(engine.dirty_frontier(1, {g.num_nodes()}), LookupError);
}

TEST_CASE("reinitialize repins the grids and reports once") {
    const EventList list = stream(6, 200);
    const Model model = random_init(recognition_preset(), 23);
    const EventList init = head_of(list, 140);
    AsyncEngine engine(model, build_graph(init, graph_params(list)), {});
    for (size_t i = 140; i < 170; ++i) engine.process_event(list.events[i]);

    engine.reinitialize();
    const ForwardResult fresh = dense_forward(model, engine.graph());
    CHECK(state_diff(engine.state(), fresh) == 0.0);

    const UpdateStats first = engine.process_event(list.events[170]);
    CHECK(first.reinitialized);
    const UpdateStats second = engine.process_event(list.events[171]);
    CHECK(!second.reinitialized);
}

TEST_CASE("update stats line up with the layer sequence and stay consistent") {
    const EventList list = stream(7, 220);
    const Model model = random_init(recognition_preset(), 29);
    const EventList init = head_of(list, 180);

    SUBCASE("without counting") {
        AsyncEngine engine(model, build_graph(init, graph_params(list)), {});
        const std::vector<std::string> names = layer_sequence(model.config);
        for (size_t i = 180; i < 200; ++i) {
            const UpdateStats stats = engine.process_event(list.events[i]);
            REQUIRE(stats.layers.size() == names.size());
            uint64_t analytic = 0;
            int64_t rows = 0;
            for (size_t l = 0; l < names.size(); ++l) {
                CHECK(stats.layers[l].layer == names[l]);
                CHECK(stats.layers[l].measured_flops == 0);
                CHECK(stats.layers[l].event_index == stats.event_index);
                analytic += stats.layers[l].analytic_flops;
                rows += stats.layers[l].recomputed_nodes;
            }
            CHECK(stats.total_analytic == analytic);
            CHECK(stats.total_measured == 0);
            CHECK(stats.touched_rows == rows);
            CHECK(stats.touched_rows <= stats.dense_rows);
            CHECK(stats.total_analytic <= stats.dense_analytic);
            CHECK(stats.touched_fraction >= 0.0);
            CHECK(stats.touched_fraction <= 1.0);
            CHECK(stats.event_index == int64_t(i - 180));
        }
    }

    SUBCASE("with counting, measured equals analytic per layer") {
        EngineOptions opts;
        opts.count_flops = true;
        AsyncEngine engine(model, build_graph(init, graph_params(list)), opts);
        for (size_t i = 180; i < 195; ++i) {
            const UpdateStats stats = engine.process_event(list.events[i]);
            for (const FlopCsvRow& row : stats.layers)
                CHECK(row.measured_flops == row.analytic_flops);
            CHECK(stats.total_measured == stats.total_analytic);
        }
    }
}

TEST_CASE("counting mode changes no values") {
    const EventList list = stream(8, 160);
    const Model model = random_init(recognition_preset(), 31);
    const EventList init = head_of(list, 120);

    AsyncEngine plain(model, build_graph(init, graph_params(list)), {});
    EngineOptions opts;
    opts.count_flops = true;
    AsyncEngine counted(model, build_graph(init, graph_params(list)), opts);
    for (size_t i = 120; i < list.size(); ++i) {
        plain.process_event(list.events[i]);
        counted.process_event(list.events[i]);
    }
    CHECK(state_diff(plain.state(), counted.state()) <= 1e-10);
}

TEST_CASE("out-of-order events are rejected without corrupting state") {
    const EventList list = stream(9, 150);
    const Model model = random_init(recognition_preset(), 37);
    AsyncEngine engine(model, build_graph(list, graph_params(list)), {});
    Event stale = list.events.back();
    stale.t -= 1000;
    const ForwardResult before = engine.state();
    CHECK_THROWS_AS(engine.process_event(stale), OrderingError);
    CHECK(state_diff(engine.state(), before) == 0.0);
    CHECK(engine.graph().num_nodes() == int32_t(list.size()));
}
