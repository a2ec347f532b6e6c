#pragma once

#include <array>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "aegn/flops.hpp"
#include "aegn/graph.hpp"
#include "aegn/spline.hpp"

namespace aegn {

// Node features, one row per node. Row-major so that per-node rows are
// contiguous and incremental row updates touch contiguous memory.
using FeatureMap = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using AdjacencyList = std::vector<std::vector<EdgeTo>>;

// ---------------------------------------------------------------------
// Spline convolution
// ---------------------------------------------------------------------

// Continuous kernel sampled on a kernel_size^3 control grid; the value at
// a pseudo-coordinate is the B-spline interpolation of the control
// weights. Weight layout is w[p][l][n]: grid point, input channel, output
// channel, with n fastest.
struct SplineKernel {
    int kernel_size = 2;
    int degree = 1;
    int in_channels = 1;
    int out_channels = 1;
    std::vector<double> w;

    int grid_points() const { return kernel_size * kernel_size * kernel_size; }
    size_t weight_count() const {
        return size_t(grid_points()) * in_channels * out_channels;
    }
    const double* slice(int p) const {
        return w.data() + size_t(p) * in_channels * out_channels;
    }
};

// Neighborhood-averaged continuous convolution: output row i is the mean
// over neighbors j of the kernel at u(i, j) applied to the input row j.
// Isolated nodes produce zero rows. When `targets` is given only those
// rows of `out` are written, all other rows are left untouched; a target
// row's value depends only on the kernel, the input and that row's
// adjacency, so partial and full evaluation agree bit for bit.
void spline_conv(const SplineKernel& kernel, const AdjacencyList& adj,
                 const FeatureMap& in, FeatureMap& out,
                 const std::vector<int32_t>* targets = nullptr);

// Same contract, but executes the literal counting schedule: per target it
// evaluates the kernel by a dense sweep over every grid point and tallies
// each multiply, add, comparison and division into `counter` under
// `layer`. Slower; the measured count equals spline_conv_flops exactly.
void spline_conv_counted(const SplineKernel& kernel, const AdjacencyList& adj,
                         const FeatureMap& in, FeatureMap& out,
                         FlopCounter& counter, const std::string& layer,
                         const std::vector<int32_t>* targets = nullptr);

// ---------------------------------------------------------------------
// Pointwise layers
// ---------------------------------------------------------------------

void elu_inplace(FeatureMap& x, const std::vector<int32_t>* rows = nullptr);

// Inference-mode batch normalization with frozen statistics.
struct BatchNorm {
    static constexpr double kEps = 1e-5;

    Eigen::VectorXd mean, var, scale, shift;
    Eigen::VectorXd inv_std; // 1 / sqrt(var + eps), refreshed via finalize()

    void init_identity(int width);
    void finalize();
    void apply_inplace(FeatureMap& x, const std::vector<int32_t>* rows = nullptr) const;
};

struct LinearLayer {
    int in_features = 0;
    int out_features = 0;
    bool has_bias = true;
    FeatureMap w; // out x in
    Eigen::VectorXd b;

    void init_zero(int in, int out, bool bias);
    Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
    void apply_rows(const FeatureMap& in, FeatureMap& out,
                    const std::vector<int32_t>* rows = nullptr) const;
};

// ---------------------------------------------------------------------
// Voxel max pooling
// ---------------------------------------------------------------------

// A fixed uniform voxel grid. Keeping the grid fixed while the graph grows
// means a node's voxel never changes, so pooling clusters only ever gain
// members; coordinates outside the box are clamped to the border cells.
struct VoxelGridSpec {
    std::array<double, 3> origin{0.0, 0.0, 0.0};
    std::array<double, 3> side{0.0, 0.0, 0.0}; // 0 collapses the axis
    std::array<int, 3> dims{1, 1, 1};

    static VoxelGridSpec from_positions(const std::vector<std::array<double, 3>>& positions,
                                        const std::array<int, 3>& dims);

    std::array<int, 3> cell(const std::array<double, 3>& pos) const;
    int64_t linear(const std::array<int, 3>& c) const {
        return c[0] + int64_t(dims[0]) * (c[1] + int64_t(dims[1]) * c[2]);
    }
};

// The coarse graph produced by pooling. Coarse ids are assigned in order
// of each voxel's smallest member, which is also first-occupancy order, so
// ids are stable under stream growth. The representative of a cluster is
// its smallest member; coarse positions and pseudo-coordinates are
// computed from representatives. Coarse adjacency is the deduplicated
// projection of fine edges across voxel borders, kept sorted by neighbor.
struct PooledGraph {
    VoxelGridSpec grid;
    double radius = 1.0; // fine radius, reused for coarse pseudo-coords

    std::vector<int32_t> assign;               // fine node -> coarse id
    std::vector<std::vector<int32_t>> members; // ascending fine ids
    std::vector<int32_t> rep;                  // coarse id -> smallest member
    std::vector<int64_t> voxel_of;             // coarse id -> linear voxel
    std::unordered_map<int64_t, int32_t> coarse_of_voxel;
    std::vector<std::array<double, 3>> positions;
    AdjacencyList adj;

    int32_t num_coarse() const { return static_cast<int32_t>(members.size()); }
};

// Clusters `positions` onto the grid and projects `fine_adj` to coarse
// edges. radius feeds the coarse pseudo-coordinates.
PooledGraph voxel_pool_topology(const std::vector<std::array<double, 3>>& positions,
                                const AdjacencyList& fine_adj,
                                const VoxelGridSpec& grid, double radius);

// What changed when a pooled graph absorbed new fine nodes and edges.
// new_edges lists each fresh undirected coarse link once, as the (from, to)
// pair in the order the fine edge presented it.
struct PoolDelta {
    std::vector<int32_t> new_coarse;
    std::vector<std::pair<int32_t, int32_t>> new_edges;
};

// Folds appended fine nodes and edges into an existing pooled graph.
// `new_nodes` must be the freshly appended fine ids in ascending order and
// `positions` the full fine position list including them; `new_fine_edges`
// the fine links created since the last call, as (from, to) pairs. Growing
// the pool this way lands in the same state a batch rebuild would reach,
// because coarse ids follow first occupancy and adjacency stays sorted.
PoolDelta pool_update_topology(PooledGraph& pooled,
                               const std::vector<std::array<double, 3>>& positions,
                               const std::vector<int32_t>& new_nodes,
                               const std::vector<std::pair<int32_t, int32_t>>& new_fine_edges);

// Componentwise max over each cluster. With `clusters` given, only those
// coarse rows of `out` are recomputed (each over its full member list,
// since a max can fall when recomputed after member feature changes).
void voxel_max(const PooledGraph& pooled, const FeatureMap& fine, FeatureMap& out,
               const std::vector<int32_t>* clusters = nullptr);

// Convenience wrapper: topology plus features in one call, grid defaulting
// to the bounding box of the positions.
std::pair<PooledGraph, FeatureMap> voxel_pool(const std::vector<std::array<double, 3>>& positions,
                                              const AdjacencyList& fine_adj,
                                              const FeatureMap& features,
                                              const std::array<int, 3>& dims,
                                              double radius,
                                              const VoxelGridSpec* grid = nullptr);

// Per-channel max over all rows; zeros when the map is empty.
Eigen::VectorXd global_max(const FeatureMap& x);

} // namespace aegn
