#include "aegn/flops.hpp"

#include <ostream>

#include "aegn/errors.hpp"

namespace aegn {

uint64_t spline_conv_flops(int64_t n_i, int64_t m_in, int64_t m_out,
                           int64_t n_grid, int64_t degree, int64_t dim) {
    if (n_i < 0 || m_in <= 0 || m_out <= 0 || n_grid <= 0 || degree <= 0 || dim <= 0)
        throw InvalidParameterError("spline convolution cost needs positive dimensions");
    if (n_i == 0) return 0;
    const uint64_t contraction = uint64_t(n_i) * uint64_t(m_out) * uint64_t(m_in) * uint64_t(2 * n_grid + 1);
    const uint64_t coords = uint64_t(n_i) * uint64_t(2 * dim + 2 * degree * dim - 1);
    return contraction + coords;
}

uint64_t elu_flops(int64_t rows, int64_t width) {
    return uint64_t(rows) * uint64_t(width);
}

uint64_t batch_norm_flops(int64_t rows, int64_t width) {
    return 4ull * uint64_t(rows) * uint64_t(width);
}

uint64_t linear_flops(int64_t rows, int64_t m_in, int64_t m_out) {
    if (rows == 0) return 0;
    return uint64_t(rows) * (2ull * uint64_t(m_in) * uint64_t(m_out) - uint64_t(m_out));
}

uint64_t residual_add_flops(int64_t rows, int64_t width) {
    return uint64_t(rows) * uint64_t(width);
}

uint64_t projection_skip_flops(int64_t rows, int64_t m_in, int64_t m_out) {
    return linear_flops(rows, m_in, m_out) + residual_add_flops(rows, m_out);
}

uint64_t max_pool_flops(const std::vector<int64_t>& cluster_sizes, int64_t width) {
    uint64_t total = 0;
    for (int64_t sz : cluster_sizes)
        if (sz > 0) total += uint64_t(sz - 1) * uint64_t(width);
    return total;
}

uint64_t global_max_flops(int64_t rows, int64_t width) {
    if (rows <= 0) return 0;
    return uint64_t(rows - 1) * uint64_t(width);
}

uint64_t readout_flops(int64_t rows, int64_t width, int64_t outputs) {
    return global_max_flops(rows, width) + linear_flops(1, width, outputs);
}

uint64_t FlopCounter::total() const {
    uint64_t t = 0;
    for (const auto& [_, n] : by_layer) t += n;
    return t;
}

uint64_t FlopsReport::total() const {
    uint64_t t = 0;
    for (const auto& [_, n] : layers) t += n;
    return t;
}

std::vector<LayerDiff> compare_reports(const FlopsReport& a, const FlopsReport& b) {
    if (a.layers.size() != b.layers.size())
        throw ShapeError("flop reports cover different layer counts");
    std::vector<LayerDiff> diffs;
    diffs.reserve(a.layers.size());
    for (size_t i = 0; i < a.layers.size(); ++i) {
        if (a.layers[i].first != b.layers[i].first)
            throw ShapeError("flop reports disagree on layer order at '" + a.layers[i].first + "'");
        LayerDiff d;
        d.layer = a.layers[i].first;
        const uint64_t x = a.layers[i].second;
        const uint64_t y = b.layers[i].second;
        d.abs_diff = x >= y ? int64_t(x - y) : -int64_t(y - x);
        const uint64_t denom = x > 0 ? x : 1;
        d.rel_diff = double(d.abs_diff >= 0 ? d.abs_diff : -d.abs_diff) / double(denom);
        diffs.push_back(std::move(d));
    }
    return diffs;
}

const char* const kFlopCsvHeader = "event_index,layer,analytic_flops,measured_flops,recomputed_nodes";

void write_flop_csv(std::ostream& out, const std::vector<FlopCsvRow>& rows) {
    out << kFlopCsvHeader << '\n';
    for (const FlopCsvRow& r : rows)
        out << r.event_index << ',' << r.layer << ',' << r.analytic_flops << ','
            << r.measured_flops << ',' << r.recomputed_nodes << '\n';
}

} // namespace aegn
