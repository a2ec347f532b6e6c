#include "aegn/forward.hpp"

#include "aegn/errors.hpp"

namespace aegn {

FeatureMap polarity_features(const EventGraph& g) {
    FeatureMap f(g.num_nodes(), 1);
    for (int32_t i = 0; i < g.num_nodes(); ++i)
        f(i, 0) = static_cast<double>(g.events[i].p);
    return f;
}

void run_block(const Model& model, int k, const AdjacencyList& adj,
               const FeatureMap& prev, FeatureMap& out,
               const std::vector<int32_t>* rows, FlopCounter* counter) {
    const ConvBlock& block = model.blocks[k - 1];
    const std::string tag = std::to_string(k);
    const int64_t nrows = rows != nullptr ? static_cast<int64_t>(rows->size()) : out.rows();
    const int width = block.conv.out_channels;

    if (counter != nullptr)
        spline_conv_counted(block.conv, adj, prev, out, *counter, "conv" + tag, rows);
    else
        spline_conv(block.conv, adj, prev, out, rows);

    elu_inplace(out, rows);
    if (counter != nullptr) counter->add("elu" + tag, elu_flops(nrows, width));
    block.bn.apply_inplace(out, rows);
    if (counter != nullptr) counter->add("bn" + tag, batch_norm_flops(nrows, width));

    auto each_row = [&](auto&& fn) {
        if (rows == nullptr) {
            for (Eigen::Index r = 0; r < out.rows(); ++r) fn(static_cast<int32_t>(r));
        } else {
            for (int32_t r : *rows) fn(r);
        }
    };

    if (model.config.skip_identity_after == k) {
        each_row([&](int32_t r) { out.row(r) += prev.row(r); });
        if (counter != nullptr)
            counter->add("skip" + tag, residual_add_flops(nrows, width));
    }
    if (model.config.skip_project_after == k) {
        each_row([&](int32_t r) {
            out.row(r).noalias() += prev.row(r) * model.skip_proj.w.transpose();
        });
        if (counter != nullptr)
            counter->add("skip" + tag,
                         projection_skip_flops(nrows, model.skip_proj.in_features, width));
    }
}

namespace {

std::vector<int64_t> cluster_sizes(const PooledGraph& pooled) {
    std::vector<int64_t> sizes;
    sizes.reserve(pooled.members.size());
    for (const auto& m : pooled.members) sizes.push_back(static_cast<int64_t>(m.size()));
    return sizes;
}

} // namespace

ForwardResult dense_forward(const Model& model, const EventGraph& g,
                            const VoxelGridSpec* fine_grid, const VoxelGridSpec* coarse_grid,
                            FlopCounter* counter) {
    const ArchitectureConfig& c = model.config;
    validate_architecture(c);
    if (c.input_width != 1)
        throw ShapeError("event streams carry one input feature per node");
    const int p1 = c.pool_after[0];
    const int p2 = c.pool_after[1];

    ForwardResult r;
    r.input = polarity_features(g);
    r.y.resize(p2);

    const FeatureMap* x = &r.input;
    for (int k = 1; k <= p1; ++k) {
        r.y[k - 1].resize(g.num_nodes(), c.blocks[k - 1].out_ch);
        run_block(model, k, g.adj, *x, r.y[k - 1], nullptr, counter);
        x = &r.y[k - 1];
    }

    const VoxelGridSpec spec1 = fine_grid != nullptr
                                    ? *fine_grid
                                    : VoxelGridSpec::from_positions(g.positions, c.voxel_dims);
    r.pool1 = voxel_pool_topology(g.positions, g.adj, spec1, g.params.radius);
    r.pooled1.resize(r.pool1.num_coarse(), x->cols());
    voxel_max(r.pool1, *x, r.pooled1);
    if (counter != nullptr)
        counter->add("pool1", max_pool_flops(cluster_sizes(r.pool1), x->cols()));

    x = &r.pooled1;
    for (int k = p1 + 1; k <= p2; ++k) {
        r.y[k - 1].resize(r.pool1.num_coarse(), c.blocks[k - 1].out_ch);
        run_block(model, k, r.pool1.adj, *x, r.y[k - 1], nullptr, counter);
        x = &r.y[k - 1];
    }

    const VoxelGridSpec spec2 = coarse_grid != nullptr
                                    ? *coarse_grid
                                    : VoxelGridSpec::from_positions(r.pool1.positions, c.voxel_dims);
    r.pool2 = voxel_pool_topology(r.pool1.positions, r.pool1.adj, spec2, g.params.radius);
    r.pooled2.resize(r.pool2.num_coarse(), x->cols());
    voxel_max(r.pool2, *x, r.pooled2);
    if (counter != nullptr)
        counter->add("pool2", max_pool_flops(cluster_sizes(r.pool2), x->cols()));

    r.readout = model.head.apply(global_max(r.pooled2));
    if (counter != nullptr)
        counter->add("readout", readout_flops(r.pooled2.rows(), c.head_width(), c.outputs));
    return r;
}

std::vector<std::string> layer_sequence(const ArchitectureConfig& c) {
    std::vector<std::string> names;
    for (int k = 1; k <= c.num_blocks(); ++k) {
        const std::string tag = std::to_string(k);
        names.push_back("conv" + tag);
        names.push_back("elu" + tag);
        names.push_back("bn" + tag);
        if (c.skip_identity_after == k || c.skip_project_after == k)
            names.push_back("skip" + tag);
        if (c.pool_after[0] == k) names.push_back("pool1");
        if (c.pool_after[1] == k) names.push_back("pool2");
    }
    names.push_back("readout");
    return names;
}

FlopsReport dense_flop_report(const Model& model, const EventGraph& g,
                              const PooledGraph& pool1, const PooledGraph& pool2) {
    const ArchitectureConfig& c = model.config;
    FlopsReport report;
    auto conv_total = [&](int k, const AdjacencyList& adj) {
        const SplineKernel& kern = model.blocks[k - 1].conv;
        uint64_t total = 0;
        for (const auto& edges : adj)
            total += spline_conv_flops(static_cast<int64_t>(edges.size()), kern.in_channels,
                                       kern.out_channels, kern.grid_points(), kern.degree);
        return total;
    };
    for (int k = 1; k <= c.num_blocks(); ++k) {
        const bool fine = c.level_of_block(k) == 0;
        const AdjacencyList& adj = fine ? g.adj : pool1.adj;
        const int64_t rows = fine ? g.num_nodes() : pool1.num_coarse();
        const int width = c.blocks[k - 1].out_ch;
        const std::string tag = std::to_string(k);
        report.layers.emplace_back("conv" + tag, conv_total(k, adj));
        report.layers.emplace_back("elu" + tag, elu_flops(rows, width));
        report.layers.emplace_back("bn" + tag, batch_norm_flops(rows, width));
        if (c.skip_identity_after == k)
            report.layers.emplace_back("skip" + tag, residual_add_flops(rows, width));
        if (c.skip_project_after == k)
            report.layers.emplace_back("skip" + tag,
                                       projection_skip_flops(rows, c.blocks[k - 2].out_ch, width));
        if (c.pool_after[0] == k) {
            std::vector<int64_t> sizes;
            for (const auto& m : pool1.members) sizes.push_back(static_cast<int64_t>(m.size()));
            report.layers.emplace_back("pool1", max_pool_flops(sizes, width));
        }
        if (c.pool_after[1] == k) {
            std::vector<int64_t> sizes;
            for (const auto& m : pool2.members) sizes.push_back(static_cast<int64_t>(m.size()));
            report.layers.emplace_back("pool2", max_pool_flops(sizes, width));
        }
    }
    report.layers.emplace_back("readout",
                               readout_flops(pool2.num_coarse(), c.head_width(), c.outputs));
    return report;
}

std::vector<int64_t> dense_row_counts(const ArchitectureConfig& c, int64_t fine_nodes,
                                      int64_t coarse_nodes, int64_t final_nodes) {
    std::vector<int64_t> rows;
    for (int k = 1; k <= c.num_blocks(); ++k) {
        const int64_t n = c.level_of_block(k) == 0 ? fine_nodes : coarse_nodes;
        rows.push_back(n); // conv
        rows.push_back(n); // elu
        rows.push_back(n); // bn
        if (c.skip_identity_after == k || c.skip_project_after == k) rows.push_back(n);
        if (c.pool_after[0] == k) rows.push_back(coarse_nodes);
        if (c.pool_after[1] == k) rows.push_back(final_nodes);
    }
    rows.push_back(1); // readout
    return rows;
}

} // namespace aegn
