#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace aegn {

// Multiply, add, comparison and division all count as one FLOP. Analytic
// formulas and the instrumented execution paths follow the same schedule,
// so for identical work the two numbers agree exactly, not approximately.

// One spline convolution output node with n_i neighbors: pseudo-coordinate
// and basis evaluation per neighbor, a dense kernel contraction over all
// n_grid points, neighborhood aggregation and the 1/|N(i)| division.
uint64_t spline_conv_flops(int64_t n_i, int64_t m_in, int64_t m_out,
                           int64_t n_grid, int64_t degree, int64_t dim = 3);

uint64_t elu_flops(int64_t rows, int64_t width);          // 1 per entry
uint64_t batch_norm_flops(int64_t rows, int64_t width);   // 4 per entry
// Dot products only; the bias add is excluded by convention.
uint64_t linear_flops(int64_t rows, int64_t m_in, int64_t m_out);
uint64_t residual_add_flops(int64_t rows, int64_t width); // 1 per entry
// No-bias projection plus the residual add.
uint64_t projection_skip_flops(int64_t rows, int64_t m_in, int64_t m_out);
// (cluster size - 1) comparisons per channel, per recomputed voxel.
uint64_t max_pool_flops(const std::vector<int64_t>& cluster_sizes, int64_t width);
uint64_t global_max_flops(int64_t rows, int64_t width);
// Global max over the final level plus the classification head on one row.
uint64_t readout_flops(int64_t rows, int64_t width, int64_t outputs);

// Instrumented execution paths accumulate here, one named slot per layer.
struct FlopCounter {
    std::map<std::string, uint64_t> by_layer;

    void add(const std::string& layer, uint64_t n) { by_layer[layer] += n; }
    uint64_t total() const;
};

// One run's per-layer FLOP numbers in a fixed layer order.
struct FlopsReport {
    std::vector<std::pair<std::string, uint64_t>> layers;
    uint64_t total() const;
};

struct LayerDiff {
    std::string layer;
    int64_t abs_diff = 0;
    double rel_diff = 0.0;
};

// Per-layer difference between two reports covering the same layers in the
// same order; anything else is a shape error.
std::vector<LayerDiff> compare_reports(const FlopsReport& a, const FlopsReport& b);

// One CSV row of the standard FLOP report.
struct FlopCsvRow {
    int64_t event_index = 0;
    std::string layer;
    uint64_t analytic_flops = 0;
    uint64_t measured_flops = 0;
    int64_t recomputed_nodes = 0;
};

extern const char* const kFlopCsvHeader; // event_index,layer,...

void write_flop_csv(std::ostream& out, const std::vector<FlopCsvRow>& rows);

} // namespace aegn
