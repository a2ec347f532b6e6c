#pragma once

#include <array>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "aegn/events.hpp"

namespace aegn {

struct GraphParams {
    double radius = 3.0;
    int max_degree = 16;
    // Scales microseconds into the spatial coordinate unit: a node sits at
    // (x, y, beta * t).
    double beta = 1.0;

    bool operator==(const GraphParams&) const = default;
};

// beta such that the stream's time span maps onto the sensor's larger side.
double default_beta(const EventList& list);

// Directed adjacency entry: target node plus the pseudo-coordinates of the
// edge, normalized offsets in [0, 1]^3 with 0.5 meaning "same position".
struct EdgeTo {
    int32_t to = 0;
    std::array<double, 3> u{};

    bool operator==(const EdgeTo&) const = default;
};

namespace detail {
struct CellKey {
    int64_t c[3];
    bool operator==(const CellKey& o) const {
        return c[0] == o.c[0] && c[1] == o.c[1] && c[2] == o.c[2];
    }
};
struct CellKeyHash {
    size_t operator()(const CellKey& k) const {
        uint64_t h = 0x9e3779b97f4a7c15ULL;
        for (int64_t v : k.c) {
            uint64_t z = h ^ static_cast<uint64_t>(v);
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            h = z ^ (z >> 31);
        }
        return static_cast<size_t>(h);
    }
};
} // namespace detail

// Spatio-temporal radius graph over an event stream. Node ids are insertion
// order (time order, ties kept stable). Edges connect nodes within the
// radius, capped at max_degree per node; candidates are ranked by distance,
// then by id, and an edge is added only while both endpoints have spare
// capacity. Every edge is stored in both directions.
struct EventGraph {
    uint16_t width = 0;
    uint16_t height = 0;
    GraphParams params;

    std::vector<Event> events;                  // per node, insertion order
    std::vector<std::array<double, 3>> positions;
    std::vector<std::vector<EdgeTo>> adj;

    int32_t num_nodes() const { return static_cast<int32_t>(positions.size()); }
    size_t num_directed_edges() const;
    int degree(int32_t i) const { return static_cast<int>(adj.at(i).size()); }

    // Spatial hash with cell side = radius, so neighbor candidates live in
    // the 27 cells around a node.
    std::unordered_map<detail::CellKey, std::vector<int32_t>, detail::CellKeyHash> cells;

    bool operator==(const EventGraph& o) const {
        return width == o.width && height == o.height && params == o.params &&
               events == o.events && positions == o.positions && adj == o.adj;
    }
};

struct InsertResult {
    int32_t node = 0;
    // New neighbors of the inserted node, in edge creation order.
    std::vector<int32_t> new_neighbors;
};

// Builds the graph for a whole stream at once over a pre-bucketed spatial
// hash. Events must already be time-sorted (ordering error otherwise). The
// result is identical, bit for bit, to folding insert_event over the stream.
EventGraph build_graph(const EventList& list, const GraphParams& params);

// Appends one node and connects it under the capacity rule. The timestamp
// must not precede the newest node (ordering error); coordinates are
// validated against the stream resolution.
InsertResult insert_event(EventGraph& g, const Event& e);

// Pseudo-coordinates of the directed pair (i, j): the offset of j relative
// to i, scaled by the graph diameter 2R into [0, 1]^3 and clamped.
std::array<double, 3> pseudo_coords(const EventGraph& g, int32_t i, int32_t j);

// Same mapping on raw positions; also used for coarse pooled graphs.
std::array<double, 3> pseudo_offset(const std::array<double, 3>& from,
                                    const std::array<double, 3>& to, double radius);

// All nodes reachable from the seed set in at most k hops, seeds included.
// Returned sorted ascending, deduplicated. Unknown ids are lookup errors.
std::vector<int32_t> k_hop(const EventGraph& g, const std::vector<int32_t>& seeds, int k);

} // namespace aegn
