#pragma once

#include <string>
#include <vector>

#include "aegn/flops.hpp"
#include "aegn/model.hpp"
#include "aegn/nn.hpp"

namespace aegn {

// Every activation a full pass produces, kept because the asynchronous
// engine updates exactly these buffers in place.
struct ForwardResult {
    FeatureMap input;            // polarity, one column
    std::vector<FeatureMap> y;   // y[k-1] = output of block k
    PooledGraph pool1, pool2;
    FeatureMap pooled1, pooled2; // features on the coarse and final level
    Eigen::VectorXd readout;
};

FeatureMap polarity_features(const EventGraph& g);

// One block k (1-based): conv -> ELU -> frozen batch norm -> optional
// residual, on all rows or the given subset. `prev` is the block input,
// which the skips read again. The dense pass and the incremental engine
// share this path, so a row recomputed incrementally is bit-identical to
// its dense value.
void run_block(const Model& model, int k, const AdjacencyList& adj,
               const FeatureMap& prev, FeatureMap& out,
               const std::vector<int32_t>* rows, FlopCounter* counter);

// Full pass over the whole graph. Pooling grids default to the bounding
// boxes of the respective levels; passing explicit grids reproduces a pass
// under grids pinned earlier (the engine's view of the same stream). With
// a counter the convolutions run the instrumented schedule.
ForwardResult dense_forward(const Model& model, const EventGraph& g,
                            const VoxelGridSpec* fine_grid = nullptr,
                            const VoxelGridSpec* coarse_grid = nullptr,
                            FlopCounter* counter = nullptr);

// Fixed reporting order of layer names: convK/eluK/bnK per block, skips
// and pools where they sit in the chain, readout last.
std::vector<std::string> layer_sequence(const ArchitectureConfig& config);

// Analytic cost of a full pass over the current graph, one entry per name
// in layer_sequence.
FlopsReport dense_flop_report(const Model& model, const EventGraph& g,
                              const PooledGraph& pool1, const PooledGraph& pool2);

// Rows a full pass computes per layer, aligned with layer_sequence; the
// readout counts as one row.
std::vector<int64_t> dense_row_counts(const ArchitectureConfig& config, int64_t fine_nodes,
                                      int64_t coarse_nodes, int64_t final_nodes);

} // namespace aegn
