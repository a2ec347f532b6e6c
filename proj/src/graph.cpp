#include "aegn/graph.hpp"

#include <algorithm>
#include <cmath>

#include "aegn/errors.hpp"

namespace aegn {

double default_beta(const EventList& list) {
    if (list.events.empty()) return 1.0;
    const uint64_t span = list.events.back().t - list.events.front().t;
    if (span == 0) return 1.0;
    const double side = static_cast<double>(std::max(list.width, list.height));
    return side / static_cast<double>(span);
}

size_t EventGraph::num_directed_edges() const {
    size_t n = 0;
    for (const auto& a : adj) n += a.size();
    return n;
}

std::array<double, 3> pseudo_offset(const std::array<double, 3>& from,
                                    const std::array<double, 3>& to, double radius) {
    std::array<double, 3> u;
    for (int s = 0; s < 3; ++s) {
        double v = (to[s] - from[s]) / (2.0 * radius) + 0.5;
        u[s] = std::clamp(v, 0.0, 1.0);
    }
    return u;
}

namespace {

using detail::CellKey;

void check_params(const GraphParams& p) {
    if (!(p.radius > 0.0))
        throw InvalidParameterError("graph radius must be positive");
    if (p.max_degree <= 0)
        throw InvalidParameterError("graph degree cap must be positive");
    if (p.beta < 0.0)
        throw InvalidParameterError("beta must be non-negative");
}

std::array<double, 3> node_position(const Event& e, double beta) {
    return {static_cast<double>(e.x), static_cast<double>(e.y),
            beta * static_cast<double>(e.t)};
}

CellKey cell_of(const std::array<double, 3>& pos, double radius) {
    CellKey key;
    for (int s = 0; s < 3; ++s)
        key.c[s] = static_cast<int64_t>(std::floor(pos[s] / radius));
    return key;
}

double dist2(const std::array<double, 3>& a, const std::array<double, 3>& b) {
    const double dx = a[0] - b[0];
    const double dy = a[1] - b[1];
    const double dz = a[2] - b[2];
    return dx * dx + dy * dy + dz * dz;
}

struct Candidate {
    double d2;
    int32_t id;
};

// Neighbor candidates of node i among nodes with a smaller id, collected
// from the 27 cells around its position. Sorted by distance, ties by id.
std::vector<Candidate> gather_candidates(const EventGraph& g, int32_t i) {
    const auto& pos = g.positions[i];
    const double r2 = g.params.radius * g.params.radius;
    const CellKey center = cell_of(pos, g.params.radius);
    std::vector<Candidate> cand;
    for (int64_t dx = -1; dx <= 1; ++dx)
        for (int64_t dy = -1; dy <= 1; ++dy)
            for (int64_t dz = -1; dz <= 1; ++dz) {
                CellKey key{{center.c[0] + dx, center.c[1] + dy, center.c[2] + dz}};
                auto it = g.cells.find(key);
                if (it == g.cells.end()) continue;
                for (int32_t j : it->second) {
                    if (j >= i) continue;
                    const double d2 = dist2(pos, g.positions[j]);
                    if (d2 <= r2) cand.push_back({d2, j});
                }
            }
    std::sort(cand.begin(), cand.end(), [](const Candidate& a, const Candidate& b) {
        if (a.d2 != b.d2) return a.d2 < b.d2;
        return a.id < b.id;
    });
    return cand;
}

// Capacity rule shared by batch construction and incremental insertion.
std::vector<int32_t> connect_node(EventGraph& g, int32_t i) {
    std::vector<int32_t> added;
    const int cap = g.params.max_degree;
    for (const Candidate& c : gather_candidates(g, i)) {
        if (static_cast<int>(g.adj[i].size()) >= cap) break;
        if (static_cast<int>(g.adj[c.id].size()) >= cap) continue;
        g.adj[i].push_back({c.id, pseudo_offset(g.positions[i], g.positions[c.id], g.params.radius)});
        g.adj[c.id].push_back({i, pseudo_offset(g.positions[c.id], g.positions[i], g.params.radius)});
        added.push_back(c.id);
    }
    return added;
}

void check_event(const Event& e, uint16_t width, uint16_t height) {
    if (e.x >= width || e.y >= height)
        throw ValidationError("event coordinate (" + std::to_string(e.x) + ", " +
                              std::to_string(e.y) + ") outside resolution");
    if (e.p != -1 && e.p != 1)
        throw ValidationError("event polarity must be -1 or +1");
}

} // namespace

EventGraph build_graph(const EventList& list, const GraphParams& params) {
    check_params(params);
    EventGraph g;
    g.width = list.width;
    g.height = list.height;
    g.params = params;

    const auto& events = list.events;
    for (size_t i = 1; i < events.size(); ++i)
        if (events[i].t < events[i - 1].t)
            throw OrderingError("event stream not sorted by time at index " + std::to_string(i));

    const int32_t n = static_cast<int32_t>(events.size());
    g.events = events;
    g.positions.resize(n);
    g.adj.resize(n);
    for (int32_t i = 0; i < n; ++i) {
        check_event(events[i], g.width, g.height);
        g.positions[i] = node_position(events[i], params.beta);
    }
    // Bucket every node up front; candidate gathering filters on id order.
    for (int32_t i = 0; i < n; ++i)
        g.cells[cell_of(g.positions[i], params.radius)].push_back(i);
    for (int32_t i = 0; i < n; ++i)
        connect_node(g, i);
    return g;
}

InsertResult insert_event(EventGraph& g, const Event& e) {
    check_params(g.params);
    check_event(e, g.width, g.height);
    if (!g.events.empty() && e.t < g.events.back().t)
        throw OrderingError("inserted event precedes the newest node");

    const int32_t i = g.num_nodes();
    g.events.push_back(e);
    g.positions.push_back(node_position(e, g.params.beta));
    g.adj.emplace_back();
    g.cells[cell_of(g.positions[i], g.params.radius)].push_back(i);

    InsertResult res;
    res.node = i;
    res.new_neighbors = connect_node(g, i);
    return res;
}

std::array<double, 3> pseudo_coords(const EventGraph& g, int32_t i, int32_t j) {
    if (i < 0 || i >= g.num_nodes() || j < 0 || j >= g.num_nodes())
        throw LookupError("pseudo-coordinates of unknown node pair");
    return pseudo_offset(g.positions[i], g.positions[j], g.params.radius);
}

std::vector<int32_t> k_hop(const EventGraph& g, const std::vector<int32_t>& seeds, int k) {
    if (k < 0)
        throw InvalidParameterError("hop count must be non-negative");
    std::vector<char> seen(g.positions.size(), 0);
    std::vector<int32_t> frontier;
    for (int32_t s : seeds) {
        if (s < 0 || s >= g.num_nodes())
            throw LookupError("hop expansion from unknown node " + std::to_string(s));
        if (!seen[s]) {
            seen[s] = 1;
            frontier.push_back(s);
        }
    }
    std::vector<int32_t> next;
    for (int hop = 0; hop < k && !frontier.empty(); ++hop) {
        next.clear();
        for (int32_t v : frontier)
            for (const EdgeTo& e : g.adj[v])
                if (!seen[e.to]) {
                    seen[e.to] = 1;
                    next.push_back(e.to);
                }
        frontier.swap(next);
    }
    std::vector<int32_t> out;
    for (int32_t v = 0; v < g.num_nodes(); ++v)
        if (seen[v]) out.push_back(v);
    return out;
}

} // namespace aegn
