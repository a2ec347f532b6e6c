#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "aegn/engine.hpp"
#include "aegn/errors.hpp"
#include "aegn/events.hpp"
#include "aegn/flops.hpp"
#include "aegn/forward.hpp"
#include "aegn/graph.hpp"
#include "aegn/ioutil.hpp"
#include "aegn/log.hpp"
#include "aegn/model.hpp"

namespace {

using namespace aegn;

// Exit codes: 0 success, 1 verification failure, 2 invalid input or usage,
// 3 I/O failure.
constexpr int kExitOk = 0;
constexpr int kExitVerifyFailed = 1;
constexpr int kExitBadInput = 2;
constexpr int kExitIo = 3;

struct Shared {
    std::string preset = "recognition";
    int degree = 1;
    double radius = 3.0;
    int max_degree = 16;
    double beta = 0.0; // 0 picks the per-stream default
    std::string voxels = "12x16x16";
    uint32_t subsample = 10;
    uint64_t seed = 0;
    std::string res;
    double tolerance = 1e-6;
    uint64_t window_us = 0;

    bool preset_set = false;
    bool degree_set = false;
    bool voxels_set = false;
};

std::array<int, 3> parse_voxels(const std::string& text) {
    int a = 0, b = 0, c = 0;
    char extra = 0;
    if (std::sscanf(text.c_str(), "%dx%dx%d%c", &a, &b, &c, &extra) != 3 || a <= 0 || b <= 0 ||
        c <= 0)
        throw ValidationError("voxel dimensions must look like 12x16x16, got '" + text + "'");
    return {a, b, c};
}

std::pair<uint16_t, uint16_t> parse_res(const std::string& text) {
    int w = 0, h = 0;
    char extra = 0;
    if (std::sscanf(text.c_str(), "%dx%d%c", &w, &h, &extra) != 2 || w <= 0 || h <= 0 ||
        w > 65535 || h > 65535)
        throw ValidationError("resolution must look like 346x260, got '" + text + "'");
    return {static_cast<uint16_t>(w), static_cast<uint16_t>(h)};
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

EventList load_input(const Shared& shared, const std::string& path) {
    uint16_t w = 0, h = 0;
    if (!shared.res.empty()) {
        auto [rw, rh] = parse_res(shared.res);
        w = rw;
        h = rh;
    } else if (!ends_with(path, ".bin")) {
        throw InvalidParameterError("CSV input carries no resolution, pass --res WxH");
    }
    EventList list = load_events(path, w, h);
    log_info("cli", "loaded %zu events from %s", list.size(), path.c_str());
    if (shared.window_us > 0 && !list.events.empty())
        list = window(list, shared.window_us, list.events.back().t);
    if (shared.subsample > 1) list = subsample_uniform(list, shared.subsample);
    if (shared.window_us > 0 || shared.subsample > 1)
        log_info("cli", "%zu events after windowing and subsampling", list.size());
    return list;
}

ArchitectureConfig make_config(const Shared& shared) {
    ArchitectureConfig config;
    if (shared.preset == "recognition")
        config = recognition_preset(2, shared.degree);
    else if (shared.preset == "detection")
        config = detection_preset(2, shared.degree);
    else
        throw InvalidParameterError("unknown preset '" + shared.preset + "'");
    config.voxel_dims = parse_voxels(shared.voxels);
    validate_architecture(config);
    return config;
}

Model make_model(const Shared& shared, const std::string& weights_path) {
    if (weights_path.empty()) {
        Model model = random_init(make_config(shared), shared.seed);
        log_info("cli", "initialized %s weights from seed %llu", shared.preset.c_str(),
                 static_cast<unsigned long long>(shared.seed));
        return model;
    }
    Model model = load_weights(weights_path);
    if (shared.preset_set || shared.degree_set || shared.voxels_set)
        require_matching_architecture(model.config, make_config(shared));
    log_info("cli", "loaded %s weights from %s", model.config.preset.c_str(),
             weights_path.c_str());
    return model;
}

GraphParams make_graph_params(const Shared& shared, const EventList& list) {
    GraphParams params;
    params.radius = shared.radius;
    params.max_degree = shared.max_degree;
    params.beta = shared.beta > 0.0 ? shared.beta : default_beta(list);
    return params;
}

void print_readout(const Eigen::VectorXd& readout) {
    std::ostringstream line;
    line << std::setprecision(17);
    line << "readout:";
    for (Eigen::Index i = 0; i < readout.size(); ++i) line << ' ' << readout[i];
    std::cout << line.str() << '\n';
}

// Largest componentwise difference across every buffer both passes fill.
double state_max_diff(const ForwardResult& a, const ForwardResult& b) {
    double worst = 0.0;
    auto take = [&](const FeatureMap& x, const FeatureMap& y) {
        if (x.rows() != y.rows() || x.cols() != y.cols())
            throw ShapeError("activation buffers diverged in shape");
        if (x.size() > 0) worst = std::max(worst, (x - y).cwiseAbs().maxCoeff());
    };
    take(a.input, b.input);
    if (a.y.size() != b.y.size()) throw ShapeError("block output counts diverged");
    for (size_t k = 0; k < a.y.size(); ++k) take(a.y[k], b.y[k]);
    take(a.pooled1, b.pooled1);
    take(a.pooled2, b.pooled2);
    if (a.readout.size() != b.readout.size()) throw ShapeError("readout widths diverged");
    if (a.readout.size() > 0)
        worst = std::max(worst, (a.readout - b.readout).cwiseAbs().maxCoeff());
    return worst;
}

struct StreamSplit {
    EventList init;
    std::vector<Event> rest;
};

StreamSplit split_stream(const EventList& list, size_t init_count) {
    StreamSplit split;
    split.init.width = list.width;
    split.init.height = list.height;
    const size_t n = std::min(init_count, list.events.size());
    split.init.events.assign(list.events.begin(), list.events.begin() + n);
    split.rest.assign(list.events.begin() + n, list.events.end());
    return split;
}

int cmd_synth(const Shared& shared, const std::string& pattern, uint64_t events,
              uint64_t duration_us, double noise_rate, const std::string& out) {
    SynthParams params;
    if (!shared.res.empty()) {
        auto [w, h] = parse_res(shared.res);
        params.width = w;
        params.height = h;
    }
    params.duration_us = duration_us;
    if (duration_us == 0) throw InvalidParameterError("duration must be positive");
    params.rate = static_cast<double>(events) / static_cast<double>(duration_us);
    params.noise_rate = noise_rate;
    params.seed = shared.seed;

    SynthPattern kind;
    if (pattern == "edge")
        kind = SynthPattern::MovingEdge;
    else if (pattern == "noise")
        kind = SynthPattern::RandomNoise;
    else if (pattern == "mixed")
        kind = SynthPattern::Mixed;
    else
        throw InvalidParameterError("unknown pattern '" + pattern + "'");

    const EventList list = generate_synthetic(kind, params);
    save_events(list, out);
    std::cout << "wrote " << list.size() << " events (" << params.width << "x" << params.height
              << ", " << duration_us << " us) to " << out << '\n';
    return kExitOk;
}

int cmd_build_graph(const Shared& shared, const std::string& input, bool dump, int64_t limit) {
    const EventList list = load_input(shared, input);
    const GraphParams params = make_graph_params(shared, list);
    const EventGraph g = build_graph(list, params);

    size_t max_deg = 0;
    for (int32_t i = 0; i < g.num_nodes(); ++i) max_deg = std::max(max_deg, g.adj[i].size());
    const double mean_deg =
        g.num_nodes() > 0 ? double(g.num_directed_edges()) / double(g.num_nodes()) : 0.0;

    std::cout << "nodes " << g.num_nodes() << " directed-edges " << g.num_directed_edges()
              << " mean-degree " << std::setprecision(4) << mean_deg << " max-degree " << max_deg
              << " radius " << params.radius << " dmax " << params.max_degree << " beta "
              << std::setprecision(6) << params.beta << '\n';

    if (!dump) return kExitOk;
    std::cout << std::setprecision(17);
    const int64_t n = limit > 0 ? std::min<int64_t>(limit, g.num_nodes()) : g.num_nodes();
    for (int64_t i = 0; i < n; ++i) {
        const Event& e = g.events[i];
        std::cout << "node " << i << " x=" << e.x << " y=" << e.y << " t=" << e.t
                  << " p=" << int(e.p) << " pos=(" << g.positions[i][0] << ','
                  << g.positions[i][1] << ',' << g.positions[i][2] << ")\n";
        for (const EdgeTo& edge : g.adj[i])
            std::cout << "  -> " << edge.to << " u=(" << edge.u[0] << ',' << edge.u[1] << ','
                      << edge.u[2] << ")\n";
    }
    return kExitOk;
}

int cmd_init_weights(const Shared& shared, const std::string& out) {
    const Model model = random_init(make_config(shared), shared.seed);
    save_weights(model, out);
    std::cout << "wrote " << shared.preset << " weights (kernel " << model.config.kernel_size
              << "^3, degree " << model.config.degree << ", seed " << shared.seed << ") to "
              << out << '\n';
    return kExitOk;
}

int cmd_run_dense(const Shared& shared, const std::string& input,
                  const std::string& weights_path) {
    const EventList list = load_input(shared, input);
    const Model model = make_model(shared, weights_path);
    const EventGraph g = build_graph(list, make_graph_params(shared, list));

    FlopCounter counter;
    const ForwardResult result = dense_forward(model, g, nullptr, nullptr, &counter);
    const FlopsReport analytic = dense_flop_report(model, g, result.pool1, result.pool2);
    const std::vector<int64_t> rows = dense_row_counts(
        model.config, g.num_nodes(), result.pool1.num_coarse(), result.pool2.num_coarse());

    std::cout << std::left << std::setw(10) << "layer" << std::right << std::setw(16)
              << "analytic" << std::setw(16) << "measured" << std::setw(10) << "rows" << '\n';
    for (size_t i = 0; i < analytic.layers.size(); ++i) {
        const auto& [name, flops] = analytic.layers[i];
        const auto it = counter.by_layer.find(name);
        const uint64_t meas = it != counter.by_layer.end() ? it->second : 0;
        std::cout << std::left << std::setw(10) << name << std::right << std::setw(16) << flops
                  << std::setw(16) << meas << std::setw(10) << rows[i] << '\n';
    }
    std::cout << std::left << std::setw(10) << "total" << std::right << std::setw(16)
              << analytic.total() << std::setw(16) << counter.total() << '\n';
    print_readout(result.readout);
    return kExitOk;
}

int cmd_run_async(const Shared& shared, const std::string& input, const std::string& weights_path,
                  size_t init_count, bool count_flops, const std::string& csv_out,
                  bool is_bench) {
    const EventList list = load_input(shared, input);
    const Model model = make_model(shared, weights_path);
    const StreamSplit split = split_stream(list, init_count);

    EngineOptions opts;
    opts.count_flops = count_flops || is_bench;
    AsyncEngine engine(model, build_graph(split.init, make_graph_params(shared, list)), opts);

    std::vector<FlopCsvRow> csv_rows;
    uint64_t async_analytic = 0, async_measured = 0, dense_analytic = 0;
    int64_t touched = 0;
    double fraction_sum = 0.0;
    for (const Event& e : split.rest) {
        const UpdateStats stats = engine.process_event(e);
        csv_rows.insert(csv_rows.end(), stats.layers.begin(), stats.layers.end());
        async_analytic += stats.total_analytic;
        async_measured += stats.total_measured;
        dense_analytic += stats.dense_analytic;
        touched += stats.touched_rows;
        fraction_sum += stats.touched_fraction;
    }
    const size_t n = split.rest.size();

    if (!csv_out.empty()) {
        if (is_bench) {
            FlopCsvRow total;
            total.event_index = -1;
            total.layer = "total";
            total.analytic_flops = async_analytic;
            total.measured_flops = async_measured;
            total.recomputed_nodes = touched;
            csv_rows.push_back(std::move(total));
        }
        atomic_write(csv_out, [&](std::ostream& out) { write_flop_csv(out, csv_rows); });
        log_info("cli", "wrote per-event cost table to %s", csv_out.c_str());
    }

    std::cout << "initialized on " << split.init.size() << " events, streamed " << n << '\n';
    std::cout << "async analytic flops " << async_analytic;
    if (opts.count_flops) std::cout << " measured " << async_measured;
    std::cout << '\n';
    std::cout << "dense analytic flops " << dense_analytic << " (full pass per event)\n";
    if (n > 0 && dense_analytic > 0) {
        std::cout << std::setprecision(6) << "cost ratio " << double(async_analytic) / double(dense_analytic)
                  << " mean touched fraction " << fraction_sum / double(n) << '\n';
    }
    print_readout(engine.readout());
    return kExitOk;
}

int cmd_verify(const Shared& shared, const std::string& input, const std::string& weights_path,
               size_t init_count, const std::string& csv_out, bool inject_fault) {
    const EventList list = load_input(shared, input);
    const Model model = make_model(shared, weights_path);
    const StreamSplit split = split_stream(list, init_count);

    AsyncEngine engine(model, build_graph(split.init, make_graph_params(shared, list)), {});

    Model oracle_model = model;
    if (inject_fault && oracle_model.head.has_bias && oracle_model.head.b.size() > 0)
        oracle_model.head.b[0] += 1e-3;

    std::ostringstream csv;
    csv << std::setprecision(17);
    csv << "event_index,nodes,max_abs_diff,readout_abs_diff\n";

    double worst = 0.0;
    int64_t index = 0;
    for (const Event& e : split.rest) {
        engine.process_event(e);
        const ForwardResult oracle =
            dense_forward(oracle_model, engine.graph(), &engine.state().pool1.grid,
                          &engine.state().pool2.grid);
        const double diff = state_max_diff(engine.state(), oracle);
        const double rdiff =
            (engine.readout() - oracle.readout).cwiseAbs().maxCoeff();
        worst = std::max(worst, diff);
        csv << index << ',' << engine.graph().num_nodes() << ',' << diff << ',' << rdiff << '\n';
        ++index;
    }

    if (!csv_out.empty())
        atomic_write(csv_out, [&](std::ostream& out) { out << csv.str(); });

    std::cout << std::setprecision(17) << "verified " << index << " events, max deviation "
              << worst << " (tolerance " << shared.tolerance << ")\n";
    if (worst > shared.tolerance) {
        std::cout << "FAIL: incremental pass deviates from the full pass\n";
        return kExitVerifyFailed;
    }
    std::cout << "OK\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Incremental graph network inference over event-camera streams"};
    app.require_subcommand(1);
    app.fallthrough();

    Shared shared;
    auto* preset_opt =
        app.add_option("--preset", shared.preset, "Network preset: recognition or detection")
            ->check(CLI::IsMember({"recognition", "detection"}));
    auto* degree_opt = app.add_option("--degree", shared.degree, "B-spline degree")
                           ->check(CLI::IsMember({1, 3}));
    app.add_option("--radius", shared.radius, "Neighborhood radius");
    app.add_option("--dmax", shared.max_degree, "Degree cap per node");
    app.add_option("--beta", shared.beta, "Time scaling (0 = span-based default)");
    auto* voxels_opt = app.add_option("--voxels", shared.voxels, "Pooling grid, e.g. 12x16x16");
    app.add_option("--subsample", shared.subsample, "Keep every k-th event (default 10)");
    app.add_option("--seed", shared.seed, "Seed for weights and synthetic streams");
    app.add_option("--res", shared.res, "Sensor resolution WxH (required for CSV input)");
    app.add_option("--tolerance", shared.tolerance, "Verification tolerance");
    app.add_option("--window-us", shared.window_us, "Keep only the trailing time window");

    std::string synth_pattern = "mixed";
    uint64_t synth_events = 1000;
    uint64_t synth_duration = 100000;
    double synth_noise = 0.0;
    std::string synth_out;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic event stream");
    synth->add_option("--pattern", synth_pattern, "edge, noise or mixed")
        ->check(CLI::IsMember({"edge", "noise", "mixed"}));
    synth->add_option("--events", synth_events, "Target event count");
    synth->add_option("--duration-us", synth_duration, "Stream duration in microseconds");
    synth->add_option("--noise-rate", synth_noise, "Extra noise events per microsecond");
    synth->add_option("--out", synth_out, "Output path (.bin or .csv)")->required();

    std::string bg_input;
    auto* build = app.add_subcommand("build-graph", "Build the graph and print its shape");
    build->add_option("input", bg_input, "Event stream file")->required();

    std::string dg_input;
    int64_t dg_limit = 0;
    auto* dump = app.add_subcommand("dump-graph", "Print nodes and edges");
    dump->add_option("input", dg_input, "Event stream file")->required();
    dump->add_option("--limit", dg_limit, "Print only the first n nodes");

    std::string iw_out;
    auto* initw = app.add_subcommand("init-weights", "Write freshly initialized weights");
    initw->add_option("--out", iw_out, "Weight file path")->required();

    std::string rd_input, rd_weights;
    auto* dense = app.add_subcommand("run-dense", "Full pass with a per-layer cost table");
    dense->add_option("input", rd_input, "Event stream file")->required();
    dense->add_option("--weights", rd_weights, "Weight file (default: seeded random)");

    std::string ra_input, ra_weights, ra_csv;
    size_t ra_init = 0;
    bool ra_count = false;
    auto* async = app.add_subcommand("run-async", "Stream events through the incremental engine");
    async->add_option("input", ra_input, "Event stream file")->required();
    async->add_option("--weights", ra_weights, "Weight file (default: seeded random)");
    async->add_option("--init", ra_init, "Events folded into the initial full pass");
    async->add_flag("--count", ra_count, "Measure FLOPs while running (slower)");
    async->add_option("--out", ra_csv, "Per-event cost table (CSV)");

    std::string be_input, be_weights, be_csv;
    size_t be_init = 0;
    auto* bench = app.add_subcommand("bench", "Measured per-event costs against full-pass costs");
    bench->add_option("input", be_input, "Event stream file")->required();
    bench->add_option("--weights", be_weights, "Weight file (default: seeded random)");
    bench->add_option("--init", be_init, "Events folded into the initial full pass");
    bench->add_option("--out", be_csv, "Per-event cost table (CSV)")->required();

    std::string ve_input, ve_weights, ve_csv;
    size_t ve_init = 0;
    bool ve_fault = false;
    auto* verify = app.add_subcommand(
        "verify", "Replay a stream and compare every update against a full pass");
    verify->add_option("input", ve_input, "Event stream file")->required();
    verify->add_option("--weights", ve_weights, "Weight file (default: seeded random)");
    verify->add_option("--init", ve_init, "Events folded into the initial full pass");
    verify->add_option("--out", ve_csv, "Per-event deviation table (CSV)");
    verify->add_flag("--inject-fault", ve_fault)->group("");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitBadInput;
    }

    try {
        shared.preset_set = preset_opt->count() > 0;
        shared.degree_set = degree_opt->count() > 0;
        shared.voxels_set = voxels_opt->count() > 0;
        if (synth->parsed())
            return cmd_synth(shared, synth_pattern, synth_events, synth_duration, synth_noise,
                             synth_out);
        if (build->parsed()) return cmd_build_graph(shared, bg_input, false, 0);
        if (dump->parsed()) return cmd_build_graph(shared, dg_input, true, dg_limit);
        if (initw->parsed()) return cmd_init_weights(shared, iw_out);
        if (dense->parsed()) return cmd_run_dense(shared, rd_input, rd_weights);
        if (async->parsed())
            return cmd_run_async(shared, ra_input, ra_weights, ra_init, ra_count, ra_csv, false);
        if (bench->parsed())
            return cmd_run_async(shared, be_input, be_weights, be_init, true, be_csv, true);
        if (verify->parsed())
            return cmd_verify(shared, ve_input, ve_weights, ve_init, ve_csv, ve_fault);
    } catch (const IoError& e) {
        log_error("cli", "%s", e.what());
        return kExitIo;
    } catch (const Error& e) {
        log_error("cli", "%s", e.what());
        return kExitBadInput;
    }
    return kExitBadInput;
}
