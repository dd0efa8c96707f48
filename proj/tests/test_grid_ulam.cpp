#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "stobas/grid.hpp"
#include "stobas/ulam.hpp"

using namespace stobas;

namespace {

std::map<std::pair<Index, Index>, double> as_map(const SparseStochasticMatrix& m) {
    std::map<std::pair<Index, Index>, double> out;
    for (const Triplet& t : m.to_triplets()) out[{t.row, t.col}] = t.value;
    return out;
}

} // namespace

TEST_CASE("uniform 1-d split with half-open boxes") {
    auto grid = build_partition({0.0}, {1.0}, {4}, {false});
    CHECK(grid.box_count() == 4);
    CHECK(grid.locate({0.0}) == 0);
    CHECK(grid.locate({0.25}) == 1);
    CHECK(grid.locate({0.749}) == 2);
    CHECK(grid.locate({1.0}) == 3); // global upper face is closed
    CHECK(grid.locate({-0.001}) == kExteriorBox);
    CHECK(grid.locate({1.001}) == kExteriorBox);
    CHECK(grid.box_center(0)[0] == doctest::Approx(0.125));
}

TEST_CASE("periodic wrap and exterior detection") {
    auto grid = build_partition({-M_PI, -20.0}, {M_PI, 20.0}, {8, 8}, {true, false});
    Index wrapped = grid.locate({M_PI + 0.1, 0.0});
    Index direct = grid.locate({-M_PI + 0.1, 0.0});
    CHECK(wrapped == direct);
    CHECK(grid.locate({0.0, 25.0}) == kExteriorBox);
}

TEST_CASE("full pendulum-scale partition size") {
    auto grid = build_partition({-M_PI, -20.0}, {M_PI, 20.0}, {256, 256}, {true, false});
    CHECK(grid.box_count() == 65536);
}

TEST_CASE("simplex mask on the unit square keeps 8256 of 128x128 boxes") {
    auto mask = [](const Vec& c) { return c[0] + c[1] <= 1.0; };
    auto grid = build_partition({0.0, 0.0}, {1.0, 1.0}, {128, 128}, {false, false}, mask);
    CHECK(grid.box_count() == 8256);
    // points above the diagonal are outside the retained partition
    CHECK(grid.locate({0.9, 0.9}) == kExteriorBox);
    CHECK(grid.locate({0.1, 0.1}) != kExteriorBox);
}

TEST_CASE("invalid bounds are rejected") {
    CHECK_THROWS_AS(build_partition({1.0}, {0.0}, {4}, {false}), InvalidBounds);
    CHECK_THROWS_AS(build_partition({0.0}, {1.0}, {0}, {false}), InvalidBounds);
    CHECK_THROWS_AS(build_partition({0.0, 0.0}, {1.0, 1.0}, {4, 4}, {false, false},
                                    [](const Vec&) { return false; }),
                    InvalidBounds);
}

TEST_CASE("identity flow gives the identity matrix exactly") {
    auto grid = build_partition({0.0, 0.0}, {1.0, 2.0}, {8, 4}, {false, false});
    auto flow = [](const Vec& x, RngStream&) { return x; };
    auto [m, report] = estimate_transition_matrix(grid, flow, 16, 2024);
    CHECK(report.exterior_mass == 0.0);
    CHECK(!report.exterior_state_added);
    CHECK(m.size() == 32);
    CHECK(m.nnz() == 32);
    for (const Triplet& t : m.to_triplets()) {
        CHECK(t.row == t.col);
        CHECK(t.value == 1.0);
    }
}

TEST_CASE("periodic shift by one box width is a permutation matrix") {
    const Index boxes = 16;
    auto grid = build_partition({0.0}, {1.0}, {boxes}, {true});
    double width = 1.0 / static_cast<double>(boxes);
    auto flow = [width](const Vec& x, RngStream&) -> Vec {
        return {x[0] + width};
    };
    auto [m, report] = estimate_transition_matrix(grid, flow, 32, 7);
    CHECK(m.nnz() == boxes);
    auto entries = as_map(m);
    for (Index i = 0; i < boxes; ++i) {
        auto it = entries.find({i, (i + 1) % boxes});
        REQUIRE(it != entries.end());
        CHECK(it->second == 1.0);
    }
    // uniform density is an exact left fixed vector of a permutation estimate
    Vec uniform(static_cast<size_t>(boxes), 1.0 / static_cast<double>(boxes));
    Vec propagated = m.apply_left(uniform);
    CHECK(sup_diff(propagated, uniform) == 0.0);
}

TEST_CASE("doubling map keeps the uniform density invariant at every refinement") {
    for (Index boxes : {4, 16, 64}) {
        auto grid = build_partition({0.0}, {1.0}, {boxes}, {true});
        auto flow = [](const Vec& x, RngStream&) -> Vec {
            double y = 2.0 * x[0];
            return {y - std::floor(y)};
        };
        auto [m, report] = estimate_transition_matrix(grid, flow, 64, 11);
        CHECK(report.exterior_mass == 0.0);
        Vec uniform(static_cast<size_t>(boxes), 1.0 / static_cast<double>(boxes));
        Vec propagated = m.apply_left(uniform);
        CHECK(sup_diff(propagated, uniform) <= 1e-15);
    }
}

TEST_CASE("estimates are bitwise identical across thread counts") {
    auto grid = build_partition({-M_PI, -2.0}, {M_PI, 2.0}, {12, 12}, {true, false});
    auto flow = [](const Vec& x, RngStream& rng) -> Vec {
        return {x[0] + 0.3 + 0.01 * rng.normal(), 0.9 * x[1] + 0.05 * rng.normal()};
    };
    auto [m1, r1] = estimate_transition_matrix(grid, flow, 50, 555, ExteriorPolicy::absorb, 1);
    auto [m2, r2] = estimate_transition_matrix(grid, flow, 50, 555, ExteriorPolicy::absorb, 2);
    auto t1 = m1.to_triplets();
    auto t2 = m2.to_triplets();
    REQUIRE(t1.size() == t2.size());
    for (size_t k = 0; k < t1.size(); ++k) {
        CHECK(t1[k].row == t2[k].row);
        CHECK(t1[k].col == t2[k].col);
        CHECK(t1[k].value == t2[k].value);
    }
    CHECK(r1.exterior_mass == r2.exterior_mass);
}

TEST_CASE("row counts are exact ratios of samples_per_box") {
    auto grid = build_partition({0.0}, {1.0}, {8}, {true});
    auto flow = [](const Vec& x, RngStream& rng) -> Vec {
        double y = x[0] + 0.37 + 0.1 * rng.uniform();
        return {y - std::floor(y)};
    };
    const Index S = 48;
    auto [m, report] = estimate_transition_matrix(grid, flow, S, 99);
    for (Index i = 0; i < m.size(); ++i) {
        long long numer = 0;
        m.for_row(i, [&](Index, double v) {
            double scaled = v * static_cast<double>(S);
            CHECK(scaled == doctest::Approx(std::round(scaled)).epsilon(1e-12));
            numer += static_cast<long long>(std::llround(scaled));
        });
        CHECK(numer == S);
    }
}

TEST_CASE("exterior handling") {
    // rightward drift pushes part of the last box off the non-periodic domain
    auto grid = build_partition({0.0}, {1.0}, {4}, {false});
    auto flow = [](const Vec& x, RngStream&) -> Vec {
        return {x[0] + 0.2};
    };
    SUBCASE("absorbing exterior state") {
        auto [m, report] = estimate_transition_matrix(grid, flow, 20, 3, ExteriorPolicy::absorb);
        CHECK(report.exterior_state_added);
        CHECK(m.size() == 5);
        CHECK(report.exterior_mass > 0.1);
        CHECK(report.exterior_mass < 0.3);
        double self = 0.0;
        m.for_row(4, [&](Index j, double v) {
            if (j == 4) self = v;
        });
        CHECK(self == 1.0);
    }
    SUBCASE("renormalized rows") {
        auto [m, report] = estimate_transition_matrix(grid, flow, 20, 3, ExteriorPolicy::renormalize);
        CHECK(m.size() == 4);
        CHECK(report.exterior_mass > 0.1);
        for (Index i = 0; i < 4; ++i) CHECK(std::fabs(m.row_sum(i) - 1.0) <= 1e-12);
    }
    SUBCASE("fully exterior row fails under renormalization") {
        auto far = [](const Vec& x, RngStream&) -> Vec {
            return {x[0] + 10.0};
        };
        CHECK_THROWS_AS(estimate_transition_matrix(grid, far, 10, 3, ExteriorPolicy::renormalize),
                        EmptyRow);
    }
}

TEST_CASE("metadata sidecar") {
    auto grid = build_partition({0.0}, {1.0}, {4}, {true});
    FlowMapSpec spec;
    spec.field = [](const Vec&, Vec& dx) { dx.assign(1, 0.0); };
    spec.dim = 1;
    spec.tau = 2.5;
    spec.dt = 0.05;
    auto [m, report] = estimate_transition_matrix(grid, spec, 8, 17);
    const char* path = "ulam_meta_test.txt";
    write_ulam_metadata(path, grid, spec, report, "identity");
    std::ifstream is(path);
    REQUIRE(is.good());
    std::string line;
    bool saw_tau = false, saw_seed = false, saw_boxes = false;
    while (std::getline(is, line)) {
        if (line == "tau=2.5") saw_tau = true;
        if (line == "seed=17") saw_seed = true;
        if (line == "box_count=4") saw_boxes = true;
    }
    CHECK(saw_tau);
    CHECK(saw_seed);
    CHECK(saw_boxes);
    std::remove(path);
}

TEST_CASE("non-finite states are exterior and diverging flows fail") {
    auto grid = build_partition({0.0}, {1.0}, {4}, {false});
    CHECK(grid.locate({std::nan("")}) == kExteriorBox);

    auto blowup = [](const Vec&, RngStream&) -> Vec {
        throw NonFiniteState("diverged");
    };
    CHECK_THROWS_AS(estimate_transition_matrix(grid, blowup, 4, 1), IntegrationFailure);
}
