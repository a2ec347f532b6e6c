#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sstream>

#include "aegn/errors.hpp"
#include "aegn/flops.hpp"
#include "aegn/nn.hpp"
#include "aegn/rng.hpp"

using namespace aegn;

TEST_CASE("convolution cost has known closed-form values") {
    // One node, one neighbor, 1 -> 1 channels over 8 grid points, cubic:
    // 17 for the contraction, 23 for coordinates and basis.
    CHECK(spline_conv_flops(1, 1, 1, 8, 3) == 40);
    // Ten neighbors, 16 -> 32 channels over 8 grid points, cubic.
    CHECK(spline_conv_flops(10, 16, 32, 8, 3) == 87270);
    CHECK(spline_conv_flops(0, 16, 32, 8, 3) == 0);
    CHECK_THROWS_AS(spline_conv_flops(-1, 1, 1, 8, 3), InvalidParameterError);
    CHECK_THROWS_AS(spline_conv_flops(1, 0, 1, 8, 3), InvalidParameterError);
}

TEST_CASE("pointwise costs count one flop per arithmetic step") {
    CHECK(elu_flops(10, 8) == 80);
    CHECK(batch_norm_flops(3, 2) == 24);
    CHECK(linear_flops(1, 3, 3) == 15); // dot products only, no bias
    CHECK(linear_flops(0, 3, 3) == 0);
    CHECK(residual_add_flops(2, 8) == 16);
    CHECK(projection_skip_flops(2, 4, 8) == 2 * (2 * 4 * 8 - 8) + 16);
    CHECK(max_pool_flops({4, 1, 3}, 3) == (3 + 0 + 2) * 3);
    CHECK(global_max_flops(4, 3) == 9);
    CHECK(global_max_flops(0, 3) == 0);
    CHECK(readout_flops(4, 3, 2) == 9 + (2 * 3 * 2 - 2));
}

TEST_CASE("instrumented convolution lands exactly on the closed form") {
    Rng rng(13);
    for (int trial = 0; trial < 60; ++trial) {
        SplineKernel kernel;
        kernel.kernel_size = (trial % 2 == 0) ? 2 : 8; // 8 or 512 grid points
        kernel.degree = (trial % 4 < 2) ? 1 : 3;
        kernel.in_channels = 1 + int(rng.next_below(5));
        kernel.out_channels = 1 + int(rng.next_below(5));
        kernel.w.resize(kernel.weight_count());
        for (double& w : kernel.w) w = rng.next_double(-1, 1);

        const int n = 1 + int(rng.next_below(12));
        AdjacencyList adj(n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < i; ++j)
                if (rng.next_double() < 0.4) {
                    EdgeTo f, r;
                    f.to = j;
                    r.to = i;
                    for (int s = 0; s < 3; ++s) {
                        f.u[s] = rng.next_double();
                        r.u[s] = 1.0 - f.u[s];
                    }
                    adj[i].push_back(f);
                    adj[j].push_back(r);
                }
        FeatureMap in(n, kernel.in_channels);
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < kernel.in_channels; ++c) in(i, c) = rng.next_double(-1, 1);

        FeatureMap out(n, kernel.out_channels);
        FlopCounter counter;
        spline_conv_counted(kernel, adj, in, out, counter, "conv");

        uint64_t analytic = 0;
        for (const auto& edges : adj)
            analytic += spline_conv_flops(int64_t(edges.size()), kernel.in_channels,
                                          kernel.out_channels, kernel.grid_points(),
                                          kernel.degree);
        CHECK(counter.by_layer.at("conv") == analytic); // integer equality
    }
}

TEST_CASE("counters accumulate by layer") {
    FlopCounter counter;
    counter.add("a", 10);
    counter.add("b", 5);
    counter.add("a", 1);
    CHECK(counter.by_layer.at("a") == 11);
    CHECK(counter.total() == 16);
}

TEST_CASE("report comparison requires identical layer structure") {
    FlopsReport a, b;
    a.layers = {{"conv1", 100}, {"elu1", 10}};
    b.layers = {{"conv1", 90}, {"elu1", 10}};
    const auto diffs = compare_reports(a, b);
    REQUIRE(diffs.size() == 2);
    CHECK(diffs[0].abs_diff == 10);
    CHECK(diffs[0].rel_diff == doctest::Approx(0.1));
    CHECK(diffs[1].abs_diff == 0);

    FlopsReport swapped;
    swapped.layers = {{"elu1", 10}, {"conv1", 90}};
    CHECK_THROWS_AS(compare_reports(a, swapped), ShapeError);
    FlopsReport shorter;
    shorter.layers = {{"conv1", 90}};
    CHECK_THROWS_AS(compare_reports(a, shorter), ShapeError);
}

TEST_CASE("cost tables serialize with the fixed header") {
    std::vector<FlopCsvRow> rows(2);
    rows[0].event_index = 0;
    rows[0].layer = "conv1";
    rows[0].analytic_flops = 12;
    rows[0].measured_flops = 12;
    rows[0].recomputed_nodes = 3;
    rows[1].event_index = 1;
    rows[1].layer = "readout";
    rows[1].analytic_flops = 7;
    rows[1].measured_flops = 0;
    rows[1].recomputed_nodes = 1;
    std::ostringstream out;
    write_flop_csv(out, rows);
    CHECK(out.str() ==
          "event_index,layer,analytic_flops,measured_flops,recomputed_nodes\n"
          "0,conv1,12,12,3\n"
          "1,readout,7,0,1\n");
}
