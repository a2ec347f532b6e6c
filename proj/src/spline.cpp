#include "aegn/spline.hpp"

#include <algorithm>
#include <cmath>

#include "aegn/errors.hpp"

namespace aegn {

namespace {

void check_args(int kernel_size, int degree) {
    if (degree < 1 || degree > 3)
        throw InvalidParameterError("spline degree must be 1, 2 or 3");
    if (kernel_size < 2)
        throw InvalidParameterError("kernel size must be at least 2");
}

// Cardinal B-spline weights of the m+1 active functions at local offset
// b in [0, 1]. Entry k belongs to control point bot + k.
void cardinal_weights(double b, int degree, std::array<double, 4>& w) {
    switch (degree) {
        case 1:
            w[0] = 1.0 - b;
            w[1] = b;
            break;
        case 2: {
            const double b2 = b * b;
            w[0] = 0.5 * (1.0 - b) * (1.0 - b);
            w[1] = 0.5 * (-2.0 * b2 + 2.0 * b + 1.0);
            w[2] = 0.5 * b2;
            break;
        }
        default: {
            const double b2 = b * b;
            const double b3 = b2 * b;
            const double ib = 1.0 - b;
            w[0] = ib * ib * ib / 6.0;
            w[1] = (3.0 * b3 - 6.0 * b2 + 4.0) / 6.0;
            w[2] = (-3.0 * b3 + 3.0 * b2 + 3.0 * b + 1.0) / 6.0;
            w[3] = b3 / 6.0;
            break;
        }
    }
}

} // namespace

Basis1D spline_basis_1d(double u, int kernel_size, int degree) {
    check_args(kernel_size, degree);
    if (!(u >= 0.0 && u <= 1.0))
        throw DomainError("spline parameter " + std::to_string(u) + " outside [0, 1]");

    const int span = std::max(kernel_size - degree, 1);
    const double v = u * span;
    int bot = static_cast<int>(v);
    if (bot > span - 1) bot = span - 1; // u == 1
    const double frac = v - bot;

    std::array<double, 4> w;
    cardinal_weights(frac, degree, w);

    Basis1D basis;
    int prev = -1;
    for (int k = 0; k <= degree; ++k) {
        const int idx = std::min(bot + k, kernel_size - 1);
        if (idx == prev) {
            basis.weight[basis.count - 1] += w[k];
        } else {
            basis.index[basis.count] = idx;
            basis.weight[basis.count] = w[k];
            ++basis.count;
            prev = idx;
        }
    }
    return basis;
}

BasisSet spline_basis(const std::array<double, 3>& u, int kernel_size, int degree) {
    const Basis1D bx = spline_basis_1d(u[0], kernel_size, degree);
    const Basis1D by = spline_basis_1d(u[1], kernel_size, degree);
    const Basis1D bz = spline_basis_1d(u[2], kernel_size, degree);

    BasisSet set;
    const int k2 = kernel_size * kernel_size;
    for (int iz = 0; iz < bz.count; ++iz)
        for (int iy = 0; iy < by.count; ++iy) {
            const int base = by.index[iy] * kernel_size + bz.index[iz] * k2;
            const double wyz = by.weight[iy] * bz.weight[iz];
            for (int ix = 0; ix < bx.count; ++ix) {
                set.entries[set.count].index = base + bx.index[ix];
                set.entries[set.count].weight = wyz * bx.weight[ix];
                ++set.count;
            }
        }
    std::sort(set.entries.begin(), set.entries.begin() + set.count,
              [](const BasisEntry& a, const BasisEntry& b) { return a.index < b.index; });
    return set;
}

int grid_point_count(int kernel_size) {
    return kernel_size * kernel_size * kernel_size;
}

} // namespace aegn
