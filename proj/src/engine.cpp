#include "aegn/engine.hpp"

#include <algorithm>
#include <utility>

#include "aegn/errors.hpp"
#include "aegn/log.hpp"

namespace aegn {

namespace {

void sort_unique(std::vector<int32_t>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
}

// Seeds plus their direct neighbors, ascending. A scan over a mark array
// keeps the output sorted without a comparison sort.
std::vector<int32_t> one_hop(const AdjacencyList& adj, const std::vector<int32_t>& seeds) {
    std::vector<uint8_t> mark(adj.size(), 0);
    for (int32_t s : seeds) {
        if (s < 0 || static_cast<size_t>(s) >= adj.size())
            throw LookupError("frontier seed " + std::to_string(s) + " out of range");
        mark[s] = 1;
        for (const EdgeTo& e : adj[s]) mark[e.to] = 1;
    }
    std::vector<int32_t> out;
    for (size_t i = 0; i < mark.size(); ++i)
        if (mark[i]) out.push_back(static_cast<int32_t>(i));
    return out;
}

std::vector<int64_t> member_sizes(const PooledGraph& pooled, const std::vector<int32_t>& clusters) {
    std::vector<int64_t> sizes;
    sizes.reserve(clusters.size());
    for (int32_t c : clusters)
        sizes.push_back(static_cast<int64_t>(pooled.members[c].size()));
    return sizes;
}

} // namespace

AsyncEngine::AsyncEngine(Model model, EventGraph graph, EngineOptions opts)
    : model_(std::move(model)), graph_(std::move(graph)), opts_(opts) {
    state_ = dense_forward(model_, graph_);
    log_debug("engine", "initialized on %d nodes, %d coarse, %d final",
              graph_.num_nodes(), state_.pool1.num_coarse(), state_.pool2.num_coarse());
}

void AsyncEngine::reinitialize() {
    state_ = dense_forward(model_, graph_);
    pending_reinit_flag_ = true;
}

std::vector<int32_t> AsyncEngine::dirty_frontier(int k, const std::vector<int32_t>& seeds) const {
    const ArchitectureConfig& c = model_.config;
    if (k < 1 || k > c.num_blocks())
        throw LookupError("no block " + std::to_string(k));
    const AdjacencyList& adj = c.level_of_block(k) == 0 ? graph_.adj : state_.pool1.adj;
    return one_hop(adj, seeds);
}

UpdateStats AsyncEngine::process_event(const Event& e) {
    const ArchitectureConfig& c = model_.config;
    const int p1 = c.pool_after[0];
    const int p2 = c.pool_after[1];

    const InsertResult ins = insert_event(graph_, e);
    const int32_t nid = ins.node;
    const int32_t n = graph_.num_nodes();

    state_.input.conservativeResize(n, 1);
    state_.input(nid, 0) = static_cast<double>(e.p);
    for (int k = 1; k <= p1; ++k) {
        state_.y[k - 1].conservativeResize(n, c.blocks[k - 1].out_ch);
        state_.y[k - 1].row(nid).setZero();
    }

    FlopCounter counter;
    FlopCounter* cnt = opts_.count_flops ? &counter : nullptr;

    // The inserted node and everything whose neighborhood it entered form
    // the first dirty set; each further convolution reaches one hop more.
    std::vector<std::vector<int32_t>> fine_rows(p1);
    fine_rows[0] = ins.new_neighbors;
    fine_rows[0].push_back(nid);
    sort_unique(fine_rows[0]);
    for (int k = 2; k <= p1; ++k)
        fine_rows[k - 1] = one_hop(graph_.adj, fine_rows[k - 2]);

    const FeatureMap* x = &state_.input;
    for (int k = 1; k <= p1; ++k) {
        run_block(model_, k, graph_.adj, *x, state_.y[k - 1], &fine_rows[k - 1], cnt);
        x = &state_.y[k - 1];
    }

    std::vector<std::pair<int32_t, int32_t>> fine_new_edges;
    fine_new_edges.reserve(ins.new_neighbors.size());
    for (int32_t nb : ins.new_neighbors) fine_new_edges.emplace_back(nid, nb);
    const PoolDelta d1 =
        pool_update_topology(state_.pool1, graph_.positions, {nid}, fine_new_edges);

    const int32_t nc1 = state_.pool1.num_coarse();
    state_.pooled1.conservativeResize(nc1, x->cols());
    for (int32_t fresh : d1.new_coarse) state_.pooled1.row(fresh).setZero();

    // Clusters holding any recomputed fine row must re-take their max; a
    // recomputation can lower a member, so the whole cluster is rescanned.
    std::vector<int32_t> dirty1;
    dirty1.reserve(fine_rows[p1 - 1].size() + d1.new_coarse.size());
    for (int32_t r : fine_rows[p1 - 1]) dirty1.push_back(state_.pool1.assign[r]);
    dirty1.insert(dirty1.end(), d1.new_coarse.begin(), d1.new_coarse.end());
    sort_unique(dirty1);
    voxel_max(state_.pool1, *x, state_.pooled1, &dirty1);
    if (cnt != nullptr)
        cnt->add("pool1", max_pool_flops(member_sizes(state_.pool1, dirty1), x->cols()));

    for (int k = p1 + 1; k <= p2; ++k) {
        state_.y[k - 1].conservativeResize(nc1, c.blocks[k - 1].out_ch);
        for (int32_t fresh : d1.new_coarse) state_.y[k - 1].row(fresh).setZero();
    }

    // Coarse dirt: clusters with changed features, plus both endpoints of
    // every new coarse edge, since their neighborhoods changed too.
    std::vector<int32_t> seeds1 = dirty1;
    for (const auto& [a, b] : d1.new_edges) {
        seeds1.push_back(a);
        seeds1.push_back(b);
    }
    sort_unique(seeds1);

    std::vector<std::vector<int32_t>> coarse_rows(p2 - p1);
    coarse_rows[0] = one_hop(state_.pool1.adj, seeds1);
    for (int k = p1 + 2; k <= p2; ++k)
        coarse_rows[k - p1 - 1] = one_hop(state_.pool1.adj, coarse_rows[k - p1 - 2]);

    x = &state_.pooled1;
    for (int k = p1 + 1; k <= p2; ++k) {
        run_block(model_, k, state_.pool1.adj, *x, state_.y[k - 1], &coarse_rows[k - p1 - 1], cnt);
        x = &state_.y[k - 1];
    }

    const PoolDelta d2 =
        pool_update_topology(state_.pool2, state_.pool1.positions, d1.new_coarse, d1.new_edges);

    const int32_t nc2 = state_.pool2.num_coarse();
    state_.pooled2.conservativeResize(nc2, x->cols());
    for (int32_t fresh : d2.new_coarse) state_.pooled2.row(fresh).setZero();

    std::vector<int32_t> dirty2;
    dirty2.reserve(coarse_rows[p2 - p1 - 1].size() + d2.new_coarse.size());
    for (int32_t r : coarse_rows[p2 - p1 - 1]) dirty2.push_back(state_.pool2.assign[r]);
    dirty2.insert(dirty2.end(), d2.new_coarse.begin(), d2.new_coarse.end());
    sort_unique(dirty2);
    voxel_max(state_.pool2, *x, state_.pooled2, &dirty2);
    if (cnt != nullptr)
        cnt->add("pool2", max_pool_flops(member_sizes(state_.pool2, dirty2), x->cols()));

    // The global max can fall anywhere, so the readout is always fresh.
    state_.readout = model_.head.apply(global_max(state_.pooled2));
    if (cnt != nullptr)
        cnt->add("readout", readout_flops(nc2, c.head_width(), c.outputs));

    UpdateStats stats = assemble_stats(fine_rows, coarse_rows, dirty1, dirty2, cnt);
    stats.event_index = events_processed_++;
    stats.reinitialized = pending_reinit_flag_;
    pending_reinit_flag_ = false;
    for (FlopCsvRow& row : stats.layers) row.event_index = stats.event_index;
    return stats;
}

UpdateStats AsyncEngine::assemble_stats(const std::vector<std::vector<int32_t>>& fine_rows,
                                        const std::vector<std::vector<int32_t>>& coarse_rows,
                                        const std::vector<int32_t>& dirty1,
                                        const std::vector<int32_t>& dirty2,
                                        const FlopCounter* counter) const {
    const ArchitectureConfig& c = model_.config;
    const int p1 = c.pool_after[0];
    UpdateStats stats;

    auto measured = [&](const std::string& layer) -> uint64_t {
        if (counter == nullptr) return 0;
        auto it = counter->by_layer.find(layer);
        return it != counter->by_layer.end() ? it->second : 0;
    };
    auto push = [&](const std::string& layer, uint64_t analytic, int64_t rows) {
        FlopCsvRow row;
        row.layer = layer;
        row.analytic_flops = analytic;
        row.measured_flops = measured(layer);
        row.recomputed_nodes = rows;
        stats.layers.push_back(std::move(row));
    };

    for (int k = 1; k <= c.num_blocks(); ++k) {
        const bool fine = c.level_of_block(k) == 0;
        const AdjacencyList& adj = fine ? graph_.adj : state_.pool1.adj;
        const std::vector<int32_t>& rows = fine ? fine_rows[k - 1] : coarse_rows[k - p1 - 1];
        const int64_t nrows = static_cast<int64_t>(rows.size());
        const SplineKernel& kern = model_.blocks[k - 1].conv;
        const int width = kern.out_channels;
        const std::string tag = std::to_string(k);

        uint64_t conv = 0;
        for (int32_t r : rows)
            conv += spline_conv_flops(static_cast<int64_t>(adj[r].size()), kern.in_channels,
                                      kern.out_channels, kern.grid_points(), kern.degree);
        push("conv" + tag, conv, nrows);
        push("elu" + tag, elu_flops(nrows, width), nrows);
        push("bn" + tag, batch_norm_flops(nrows, width), nrows);
        if (c.skip_identity_after == k)
            push("skip" + tag, residual_add_flops(nrows, width), nrows);
        if (c.skip_project_after == k)
            push("skip" + tag, projection_skip_flops(nrows, c.blocks[k - 2].out_ch, width), nrows);
        if (c.pool_after[0] == k)
            push("pool1", max_pool_flops(member_sizes(state_.pool1, dirty1), width),
                 static_cast<int64_t>(dirty1.size()));
        if (c.pool_after[1] == k)
            push("pool2", max_pool_flops(member_sizes(state_.pool2, dirty2), width),
                 static_cast<int64_t>(dirty2.size()));
    }
    push("readout", readout_flops(state_.pool2.num_coarse(), c.head_width(), c.outputs), 1);

    for (const FlopCsvRow& row : stats.layers) {
        stats.total_analytic += row.analytic_flops;
        stats.total_measured += row.measured_flops;
        stats.touched_rows += row.recomputed_nodes;
    }
    stats.dense_analytic =
        dense_flop_report(model_, graph_, state_.pool1, state_.pool2).total();
    const std::vector<int64_t> full =
        dense_row_counts(c, graph_.num_nodes(), state_.pool1.num_coarse(),
                         state_.pool2.num_coarse());
    for (int64_t r : full) stats.dense_rows += r;
    stats.touched_fraction =
        stats.dense_rows > 0 ? double(stats.touched_rows) / double(stats.dense_rows) : 0.0;
    return stats;
}

} // namespace aegn
