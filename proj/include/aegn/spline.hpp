#pragma once

#include <array>
#include <cstdint>

namespace aegn {

// Sparse evaluation of a tensor-product B-spline basis on the unit cube.
//
// Per dimension the kernel places `kernel_size` control points; a uniform
// degree-m B-spline over them has m+1 active basis functions at any
// parameter. The parameter u in [0, 1] is mapped onto the knot span
// max(kernel_size - m, 1); when the kernel is smaller than m+1 control
// points wide, out-of-range indices are clamped to the last control point
// and their weights merged, which keeps the partition of unity intact.

struct BasisEntry {
    int32_t index = 0; // linearized grid point, x fastest
    double weight = 0.0;
};

// At most (m+1)^3 = 64 entries for degree <= 3.
struct BasisSet {
    std::array<BasisEntry, 64> entries;
    int count = 0;

    const BasisEntry* begin() const { return entries.data(); }
    const BasisEntry* end() const { return entries.data() + count; }
};

struct Basis1D {
    std::array<int, 4> index;
    std::array<double, 4> weight;
    int count = 0;
};

// Active control points and weights along one dimension. u must lie in
// [0, 1] (domain error otherwise); degree in {1, 2, 3}; kernel_size >= 2.
Basis1D spline_basis_1d(double u, int kernel_size, int degree);

// Tensor product over three dimensions. Entries are sorted by grid index
// and duplicates (from boundary clamping) are merged. Weights sum to 1.
BasisSet spline_basis(const std::array<double, 3>& u, int kernel_size, int degree);

// Number of grid points of the kernel tensor, kernel_size^3.
int grid_point_count(int kernel_size);

} // namespace aegn
