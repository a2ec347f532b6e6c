#include "aegn/nn.hpp"

#include <algorithm>
#include <cmath>

#include "aegn/errors.hpp"

namespace aegn {

// ======================================================================
// Spline convolution
// ======================================================================

namespace {

void check_conv_shapes(const SplineKernel& k, const AdjacencyList& adj,
                       const FeatureMap& in, const FeatureMap& out) {
    if (k.w.size() != k.weight_count())
        throw ShapeError("kernel weight buffer does not match its dimensions");
    if (in.rows() != static_cast<Eigen::Index>(adj.size()))
        throw ShapeError("feature rows do not match adjacency size");
    if (out.rows() != in.rows() || in.cols() != k.in_channels || out.cols() != k.out_channels)
        throw ShapeError("convolution buffers do not match kernel channels");
}

std::vector<int32_t> resolve_targets(const std::vector<int32_t>* targets, int32_t n) {
    std::vector<int32_t> all;
    if (targets == nullptr) {
        all.resize(n);
        for (int32_t i = 0; i < n; ++i) all[i] = i;
        return all;
    }
    for (int32_t t : *targets)
        if (t < 0 || t >= n)
            throw LookupError("convolution target " + std::to_string(t) + " out of range");
    return *targets;
}

} // namespace

// Incidence-merged evaluation. Per target the basis contributions of all
// neighbors are first accumulated per active grid point, then the kernel
// slices are applied in ascending grid-point order. Targets are processed
// in blocks and slice application is bucketed by grid point, so each
// kernel slice streams through cache once per block instead of once per
// edge. Every output row still receives its contributions in the same
// order regardless of blocking or target subsetting, which keeps partial
// recomputation bit-identical to a full pass.
void spline_conv(const SplineKernel& kernel, const AdjacencyList& adj,
                 const FeatureMap& in, FeatureMap& out,
                 const std::vector<int32_t>* targets) {
    check_conv_shapes(kernel, adj, in, out);
    const int np = kernel.grid_points();
    const int mi = kernel.in_channels;
    const int mo = kernel.out_channels;
    const std::vector<int32_t> tg = resolve_targets(targets, static_cast<int32_t>(adj.size()));
    if (tg.empty()) return;

    const size_t per_row_bytes = size_t(np) * mi * sizeof(double);
    const size_t block_rows = std::clamp<size_t>((16u << 20) / std::max<size_t>(per_row_bytes, 1),
                                                 16, 1u << 15);

    std::vector<double> acc;             // slot accumulators, mi wide each
    std::vector<int32_t> slot_p, slot_row;
    std::vector<int32_t> stamp(np, -1), slot_at(np);
    std::vector<int32_t> bucket(np + 1), order;

    for (size_t begin = 0; begin < tg.size(); begin += block_rows) {
        const size_t end = std::min(begin + block_rows, tg.size());
        acc.clear();
        slot_p.clear();
        slot_row.clear();

        for (size_t ti = begin; ti < end; ++ti) {
            const int32_t t = tg[ti];
            out.row(t).setZero();
            for (const EdgeTo& e : adj[t]) {
                const BasisSet basis = spline_basis(e.u, kernel.kernel_size, kernel.degree);
                const auto frow = in.row(e.to);
                for (const BasisEntry& be : basis) {
                    int32_t s;
                    if (stamp[be.index] == t) {
                        s = slot_at[be.index];
                    } else {
                        s = static_cast<int32_t>(slot_p.size());
                        stamp[be.index] = t;
                        slot_at[be.index] = s;
                        slot_p.push_back(be.index);
                        slot_row.push_back(t);
                        acc.resize(acc.size() + mi, 0.0);
                    }
                    Eigen::Map<Eigen::RowVectorXd> sl(acc.data() + size_t(s) * mi, mi);
                    sl += be.weight * frow;
                }
            }
        }

        // Counting sort of slots by grid point.
        const int32_t slots = static_cast<int32_t>(slot_p.size());
        std::fill(bucket.begin(), bucket.end(), 0);
        for (int32_t s = 0; s < slots; ++s) ++bucket[slot_p[s] + 1];
        for (int p = 0; p < np; ++p) bucket[p + 1] += bucket[p];
        order.resize(slots);
        for (int32_t s = 0; s < slots; ++s) order[bucket[slot_p[s]]++] = s;

        for (int32_t oi = 0; oi < slots; ++oi) {
            const int32_t s = order[oi];
            const double* wp = kernel.slice(slot_p[s]);
            const double* sl = acc.data() + size_t(s) * mi;
            Eigen::Map<Eigen::RowVectorXd> orow(&out(slot_row[s], 0), mo);
            for (int l = 0; l < mi; ++l) {
                Eigen::Map<const Eigen::RowVectorXd> wrow(wp + size_t(l) * mo, mo);
                orow += sl[l] * wrow;
            }
        }

        for (size_t ti = begin; ti < end; ++ti) {
            const int32_t t = tg[ti];
            const size_t deg = adj[t].size();
            if (deg > 0)
                out.row(t) /= static_cast<double>(deg);
            else
                out.row(t).setZero();
        }
    }
}

// Literal counting schedule: pseudo-coordinate and basis pricing per
// neighbor, then for every output channel a dense dot product over all
// grid points per (input channel, neighbor) pair, aggregation and the
// final division, tallying as it goes.
void spline_conv_counted(const SplineKernel& kernel, const AdjacencyList& adj,
                         const FeatureMap& in, FeatureMap& out,
                         FlopCounter& counter, const std::string& layer,
                         const std::vector<int32_t>* targets) {
    check_conv_shapes(kernel, adj, in, out);
    const int np = kernel.grid_points();
    const int mi = kernel.in_channels;
    const int mo = kernel.out_channels;
    const int d = 3;
    const int m = kernel.degree;
    const std::vector<int32_t> tg = resolve_targets(targets, static_cast<int32_t>(adj.size()));

    uint64_t flops = 0;
    std::vector<double> dense; // per target: neighbors x np basis values
    for (int32_t t : tg) {
        const auto& edges = adj[t];
        const int deg = static_cast<int>(edges.size());
        if (deg == 0) {
            out.row(t).setZero();
            continue;
        }
        flops += uint64_t(deg) * d;                   // pseudo-coordinates
        flops += uint64_t(deg) * (2 * m * d + d - 1); // basis via Horner per dimension

        dense.assign(size_t(deg) * np, 0.0);
        for (int j = 0; j < deg; ++j) {
            const BasisSet basis = spline_basis(edges[j].u, kernel.kernel_size, kernel.degree);
            for (const BasisEntry& be : basis)
                dense[size_t(j) * np + be.index] = be.weight;
        }

        for (int n = 0; n < mo; ++n) {
            double acc_n = 0.0;
            for (int l = 0; l < mi; ++l) {
                double part = 0.0;
                for (int j = 0; j < deg; ++j) {
                    const double* bj = dense.data() + size_t(j) * np;
                    double g = 0.0;
                    for (int p = 0; p < np; ++p)
                        g += kernel.w[(size_t(p) * mi + l) * mo + n] * bj[p];
                    flops += uint64_t(2 * np - 1);
                    part += in(edges[j].to, l) * g;
                }
                flops += uint64_t(2 * deg - 1);
                if (l == 0)
                    acc_n = part;
                else {
                    acc_n += part;
                    flops += 1;
                }
            }
            out(t, n) = acc_n / deg;
            flops += 1;
        }
    }
    counter.add(layer, flops);
}

// ======================================================================
// Pointwise layers
// ======================================================================

namespace {

template <typename Fn>
void for_rows(Eigen::Index n, const std::vector<int32_t>* rows, Fn&& fn) {
    if (rows == nullptr) {
        for (Eigen::Index r = 0; r < n; ++r) fn(static_cast<int32_t>(r));
        return;
    }
    for (int32_t r : *rows) {
        if (r < 0 || r >= n)
            throw LookupError("row " + std::to_string(r) + " out of range");
        fn(r);
    }
}

} // namespace

void elu_inplace(FeatureMap& x, const std::vector<int32_t>* rows) {
    for_rows(x.rows(), rows, [&](int32_t r) {
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            const double v = x(r, c);
            if (v <= 0.0) x(r, c) = std::expm1(v);
        }
    });
}

void BatchNorm::init_identity(int width) {
    mean = Eigen::VectorXd::Zero(width);
    var = Eigen::VectorXd::Ones(width);
    scale = Eigen::VectorXd::Ones(width);
    shift = Eigen::VectorXd::Zero(width);
    finalize();
}

void BatchNorm::finalize() {
    inv_std = (var.array() + kEps).rsqrt();
}

void BatchNorm::apply_inplace(FeatureMap& x, const std::vector<int32_t>* rows) const {
    if (x.cols() != mean.size())
        throw ShapeError("batch norm width does not match features");
    for_rows(x.rows(), rows, [&](int32_t r) {
        for (Eigen::Index c = 0; c < x.cols(); ++c)
            x(r, c) = (x(r, c) - mean[c]) * inv_std[c] * scale[c] + shift[c];
    });
}

void LinearLayer::init_zero(int in, int out, bool bias) {
    in_features = in;
    out_features = out;
    has_bias = bias;
    w = FeatureMap::Zero(out, in);
    b = Eigen::VectorXd::Zero(bias ? out : 0);
}

Eigen::VectorXd LinearLayer::apply(const Eigen::VectorXd& x) const {
    if (x.size() != in_features)
        throw ShapeError("linear layer input width mismatch");
    Eigen::VectorXd y = w * x;
    if (has_bias) y += b;
    return y;
}

void LinearLayer::apply_rows(const FeatureMap& in, FeatureMap& out,
                             const std::vector<int32_t>* rows) const {
    if (in.cols() != in_features || out.cols() != out_features || in.rows() != out.rows())
        throw ShapeError("linear layer buffer shapes mismatch");
    for_rows(in.rows(), rows, [&](int32_t r) {
        out.row(r).noalias() = in.row(r) * w.transpose();
        if (has_bias) out.row(r) += b.transpose();
    });
}

// ======================================================================
// Voxel max pooling
// ======================================================================

VoxelGridSpec VoxelGridSpec::from_positions(const std::vector<std::array<double, 3>>& positions,
                                            const std::array<int, 3>& dims) {
    for (int s = 0; s < 3; ++s)
        if (dims[s] <= 0)
            throw InvalidParameterError("voxel grid dimensions must be positive");
    VoxelGridSpec spec;
    spec.dims = dims;
    if (positions.empty()) return spec;
    std::array<double, 3> lo = positions[0], hi = positions[0];
    for (const auto& p : positions)
        for (int s = 0; s < 3; ++s) {
            lo[s] = std::min(lo[s], p[s]);
            hi[s] = std::max(hi[s], p[s]);
        }
    spec.origin = lo;
    for (int s = 0; s < 3; ++s)
        spec.side[s] = (hi[s] - lo[s]) / dims[s];
    return spec;
}

std::array<int, 3> VoxelGridSpec::cell(const std::array<double, 3>& pos) const {
    std::array<int, 3> c;
    for (int s = 0; s < 3; ++s) {
        if (side[s] <= 0.0) {
            c[s] = 0;
            continue;
        }
        const double f = std::floor((pos[s] - origin[s]) / side[s]);
        c[s] = static_cast<int>(std::clamp(f, 0.0, static_cast<double>(dims[s] - 1)));
    }
    return c;
}

namespace {

// Sorted insertion keeps coarse adjacency canonical, so batch projection
// and incremental edge additions produce identical lists.
bool add_coarse_edge(PooledGraph& pooled, int32_t k, int32_t l) {
    auto& lst = pooled.adj[k];
    auto it = std::lower_bound(lst.begin(), lst.end(), l,
                               [](const EdgeTo& e, int32_t v) { return e.to < v; });
    if (it != lst.end() && it->to == l) return false;
    EdgeTo e;
    e.to = l;
    e.u = pseudo_offset(pooled.positions[k], pooled.positions[l], pooled.radius);
    lst.insert(it, e);
    return true;
}

// Registers fine node i with the pool, creating its voxel's cluster on
// first occupancy. Returns the coarse id.
int32_t absorb_fine_node(PooledGraph& pooled,
                         const std::vector<std::array<double, 3>>& positions, int32_t i) {
    const int64_t key = pooled.grid.linear(pooled.grid.cell(positions[i]));
    auto [it, inserted] = pooled.coarse_of_voxel.try_emplace(key, pooled.num_coarse());
    if (inserted) {
        pooled.members.emplace_back();
        pooled.rep.push_back(i);
        pooled.voxel_of.push_back(key);
        pooled.positions.push_back(positions[i]);
        pooled.adj.emplace_back();
    }
    pooled.assign.push_back(it->second);
    pooled.members[it->second].push_back(i);
    return it->second;
}

} // namespace

PooledGraph voxel_pool_topology(const std::vector<std::array<double, 3>>& positions,
                                const AdjacencyList& fine_adj,
                                const VoxelGridSpec& grid, double radius) {
    if (fine_adj.size() != positions.size())
        throw ShapeError("adjacency does not match position count");
    if (!(radius > 0.0))
        throw InvalidParameterError("pooling radius must be positive");
    PooledGraph pooled;
    pooled.grid = grid;
    pooled.radius = radius;
    const int32_t n = static_cast<int32_t>(positions.size());
    pooled.assign.reserve(n);
    for (int32_t i = 0; i < n; ++i) absorb_fine_node(pooled, positions, i);
    for (int32_t i = 0; i < n; ++i) {
        const int32_t k = pooled.assign[i];
        for (const EdgeTo& e : fine_adj[i]) {
            const int32_t l = pooled.assign[e.to];
            if (k != l) add_coarse_edge(pooled, k, l);
        }
    }
    return pooled;
}

PoolDelta pool_update_topology(PooledGraph& pooled,
                               const std::vector<std::array<double, 3>>& positions,
                               const std::vector<int32_t>& new_nodes,
                               const std::vector<std::pair<int32_t, int32_t>>& new_fine_edges) {
    PoolDelta delta;
    for (int32_t i : new_nodes) {
        if (i != static_cast<int32_t>(pooled.assign.size()))
            throw OrderingError("pool update expects appended fine ids, got " + std::to_string(i) +
                                " with " + std::to_string(pooled.assign.size()) + " absorbed");
        if (i < 0 || static_cast<size_t>(i) >= positions.size())
            throw LookupError("fine node " + std::to_string(i) + " has no position");
        const int32_t before = pooled.num_coarse();
        const int32_t c = absorb_fine_node(pooled, positions, i);
        if (pooled.num_coarse() > before) delta.new_coarse.push_back(c);
    }
    if (pooled.assign.size() != positions.size())
        throw ShapeError("pool update left assignment short of the position count");
    for (const auto& [a, b] : new_fine_edges) {
        if (a < 0 || static_cast<size_t>(a) >= pooled.assign.size() ||
            b < 0 || static_cast<size_t>(b) >= pooled.assign.size())
            throw LookupError("fine edge endpoint out of range in pool update");
        const int32_t k = pooled.assign[a];
        const int32_t l = pooled.assign[b];
        if (k == l) continue;
        const bool added = add_coarse_edge(pooled, k, l);
        add_coarse_edge(pooled, l, k);
        if (added) delta.new_edges.emplace_back(k, l);
    }
    return delta;
}

void voxel_max(const PooledGraph& pooled, const FeatureMap& fine, FeatureMap& out,
               const std::vector<int32_t>* clusters) {
    if (fine.rows() != static_cast<Eigen::Index>(pooled.assign.size()))
        throw ShapeError("fine features do not match pooled assignment");
    if (out.rows() != pooled.num_coarse() || out.cols() != fine.cols())
        throw ShapeError("pooled feature buffer has wrong shape");
    for_rows(pooled.num_coarse(), clusters, [&](int32_t c) {
        const auto& mem = pooled.members[c];
        if (mem.empty())
            throw LookupError("pooled cluster " + std::to_string(c) + " has no members");
        out.row(c) = fine.row(mem[0]);
        for (size_t i = 1; i < mem.size(); ++i)
            out.row(c) = out.row(c).cwiseMax(fine.row(mem[i]));
    });
}

std::pair<PooledGraph, FeatureMap> voxel_pool(const std::vector<std::array<double, 3>>& positions,
                                              const AdjacencyList& fine_adj,
                                              const FeatureMap& features,
                                              const std::array<int, 3>& dims,
                                              double radius,
                                              const VoxelGridSpec* grid) {
    const VoxelGridSpec spec = grid != nullptr ? *grid : VoxelGridSpec::from_positions(positions, dims);
    PooledGraph pooled = voxel_pool_topology(positions, fine_adj, spec, radius);
    FeatureMap out(pooled.num_coarse(), features.cols());
    voxel_max(pooled, features, out);
    return {std::move(pooled), std::move(out)};
}

Eigen::VectorXd global_max(const FeatureMap& x) {
    if (x.rows() == 0) return Eigen::VectorXd::Zero(x.cols());
    return x.colwise().maxCoeff().transpose();
}

} // namespace aegn
