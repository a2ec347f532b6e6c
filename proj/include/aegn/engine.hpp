#pragma once

#include <cstdint>
#include <vector>

#include "aegn/events.hpp"
#include "aegn/flops.hpp"
#include "aegn/forward.hpp"
#include "aegn/graph.hpp"
#include "aegn/model.hpp"

namespace aegn {

struct EngineOptions {
    // Runs convolutions through the instrumented schedule so per-event
    // measured FLOPs are available. Slower than the plain path.
    bool count_flops = false;
};

// Per-event accounting of one incremental update. `layers` follows
// layer_sequence(); measured numbers are zero unless FLOP counting is on.
struct UpdateStats {
    int64_t event_index = 0;
    std::vector<FlopCsvRow> layers;

    uint64_t total_analytic = 0;
    uint64_t total_measured = 0;
    uint64_t dense_analytic = 0; // full pass over the current graph

    int64_t touched_rows = 0; // recomputed rows summed over layers
    int64_t dense_rows = 0;   // rows a full pass would compute
    double touched_fraction = 0.0;

    bool reinitialized = false; // first update after reinitialize()
};

// Keeps a network's activations current while the event graph grows one
// event at a time. Initialization runs a full pass and pins both pooling
// grids; every later event only recomputes the rows its insertion can
// reach, one hop wider per convolution, which leaves each touched buffer
// bit-identical to a full pass under the same pinned grids.
class AsyncEngine {
public:
    AsyncEngine(Model model, EventGraph graph, EngineOptions opts = {});

    UpdateStats process_event(const Event& e);

    // Full pass from the current graph, re-pinning the pooling grids to
    // the present bounding boxes. The next update reports it.
    void reinitialize();

    const ForwardResult& state() const { return state_; }
    const Eigen::VectorXd& readout() const { return state_.readout; }
    const EventGraph& graph() const { return graph_; }
    const Model& model() const { return model_; }
    int64_t events_processed() const { return events_processed_; }

    // Seed set grown by one hop in the adjacency block `k` convolves over
    // (fine before the first pooling, coarse after), seeds included,
    // sorted ascending. Exposed for inspecting update reach.
    std::vector<int32_t> dirty_frontier(int k, const std::vector<int32_t>& seeds) const;

private:
    Model model_;
    EventGraph graph_;
    EngineOptions opts_;
    ForwardResult state_;
    int64_t events_processed_ = 0;
    bool pending_reinit_flag_ = false;

    UpdateStats assemble_stats(const std::vector<std::vector<int32_t>>& fine_rows,
                               const std::vector<std::vector<int32_t>>& coarse_rows,
                               const std::vector<int32_t>& dirty1,
                               const std::vector<int32_t>& dirty2,
                               const FlopCounter* counter) const;
};

} // namespace aegn
