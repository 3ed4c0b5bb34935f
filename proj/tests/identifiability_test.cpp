#include <doctest.h>

#include <cmath>

#include "noisyor/identifiability.hpp"
#include "noisyor/rng.hpp"
#include "noisyor/sampler.hpp"
#include "support.hpp"

using namespace noisyor;
using namespace testsupport;

namespace {

NetworkStructure fully_connected(int n, int m) {
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j)
            edges.emplace_back(i, j);
    return NetworkStructure::from_edges(n, m, std::move(edges));
}

}  // namespace

TEST_CASE("moment map entries and ordering") {
    const NetworkStructure s = fully_connected(1, 1);
    const MomentMapSpec spec = MomentMapSpec::build(s, 1, true);
    CHECK(spec.parameter_count() == 3);
    NoisyOrParameters params;
    params.priors = {0.3};
    params.failures = {0.4};
    params.leaks = {0.0};
    const auto values = moment_map(spec, params);
    REQUIRE(values.size() == 1);
    CHECK(values[0] == doctest::Approx(1.0 - 0.3 + 0.3 * 0.4).epsilon(1e-12));

    // All priors zero: every entry is the leak-only product.
    const NetworkStructure s2 = fully_connected(2, 3);
    const MomentMapSpec spec2 = MomentMapSpec::build(s2, 2, true);
    NoisyOrParameters p2;
    p2.priors = {0.0, 0.0};
    p2.failures.assign(6, 0.5);
    p2.leaks = {0.1, 0.2, 0.3};
    const auto v2 = moment_map(spec2, p2);
    REQUIRE(spec2.subsets.size() == 6);  // 3 singles then 3 pairs
    CHECK(v2[0] == doctest::Approx(0.9));
    CHECK(v2[3] == doctest::Approx(0.9 * 0.8));  // subset {0,1}
    CHECK(v2[5] == doctest::Approx(0.8 * 0.7));  // subset {1,2}

    // Pack/unpack round trip.
    const auto theta = spec2.pack(p2);
    REQUIRE(theta.size() == static_cast<std::size_t>(spec2.parameter_count()));
    const NoisyOrParameters back = spec2.unpack(theta);
    CHECK(back.priors == p2.priors);
    CHECK(back.failures == p2.failures);
    CHECK(back.leaks == p2.leaks);
}

TEST_CASE("finite differences agree with a half-step richer stencil") {
    const NetworkStructure s = fully_connected(2, 3);
    const MomentMapSpec spec = MomentMapSpec::build(s, 3, true);
    Rng rng(5);
    std::vector<double> theta(static_cast<std::size_t>(spec.parameter_count()));
    for (auto& value : theta)
        value = rng.uniform(0.1, 0.9);
    const double h = 1e-6;
    for (std::size_t c = 0; c < theta.size(); c += 3) {
        auto column = [&](double step) {
            std::vector<double> shifted = theta;
            shifted[c] += step;
            const auto hi = moment_map(spec, spec.unpack(shifted));
            shifted[c] = theta[c] - step;
            const auto lo = moment_map(spec, spec.unpack(shifted));
            std::vector<double> d(hi.size());
            for (std::size_t r = 0; r < hi.size(); ++r)
                d[r] = (hi[r] - lo[r]) / (2.0 * step);
            return d;
        };
        const auto coarse = column(h);
        const auto fine = column(h / 2.0);
        for (std::size_t r = 0; r < coarse.size(); ++r)
            CHECK(std::abs(coarse[r] - fine[r]) < 1e-5);
    }
}

TEST_CASE("rank grows with order and verdicts are seed-stable") {
    const NetworkStructure s = fully_connected(2, 4);
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        const IdentifiabilityVerdict verdict = check_identifiability(s, 4, seed, 1, true);
        for (std::size_t k = 1; k < verdict.per_order.size(); ++k)
            CHECK(verdict.per_order[k].rank >= verdict.per_order[k - 1].rank);
        CHECK(verdict.minimal_order == 3);
    }
}

TEST_CASE("known identifiability verdicts") {
    CHECK(check_identifiability(fully_connected(1, 3), 3, 7, 3, true).minimal_order == 3);
    CHECK(check_identifiability(fully_connected(1, 2), 2, 7, 3, true).minimal_order == -1);
}

TEST_CASE("cleanup objective vanishes at the truth") {
    const NetworkStructure s = dense_demo_structure();
    Rng rng(31);
    for (int trial = 0; trial < 5; ++trial) {
        const NoisyOrParameters truth = random_params_in(s, 0.2, 0.8, 0.01, 1000 + trial);
        const ResidualObservation obs = ResidualObservation::exact(s, truth);
        const double at_truth = cleanup_objective(s, obs, 0, 0, truth.priors[0],
                                                  truth.failures[s.edge_index(0, 0)]);
        CHECK(at_truth < 1e-10);
        // A clearly wrong anchor scores worse.
        const double off = cleanup_objective(s, obs, 0, 0,
                                             std::min(0.95, truth.priors[0] + 0.3),
                                             truth.failures[s.edge_index(0, 0)]);
        CHECK(off > at_truth);
    }
}

TEST_CASE("on-grid truth is recovered exactly by the grid scan") {
    // The reference case: the truth lies on the grid, so the argmin must be
    // that point and every derived parameter follows exactly.
    const NetworkStructure s = dense_demo_structure();
    NoisyOrParameters truth = random_params_in(s, 0.2, 0.8, 0.01, 41);
    truth.priors[0] = 0.3;
    truth.failures[static_cast<std::size_t>(s.edge_index(0, 0))] = 0.2;
    const ResidualObservation obs = ResidualObservation::exact(s, truth);
    const CleanupResult result = cleanup_grid_search(s, obs, 0, 0, 0.005);
    CHECK(std::abs(result.anchor_prior - 0.3) <= 0.005 + 1e-12);
    CHECK(std::abs(result.anchor_failure - 0.2) <= 0.005 + 1e-12);
    CHECK(max_param_error(result.params, truth) <= 0.01);
}

TEST_CASE("grid search argmin tracks the truth over random draws") {
    // Off-grid truths can drift a few cells along the objective's flattest
    // direction; the bound here is the sanity envelope, the tight figure is
    // asserted by the acceptance suite.
    const NetworkStructure s = dense_demo_structure();
    for (int trial = 0; trial < 5; ++trial) {
        const NoisyOrParameters truth =
            random_params_in(s, 0.2, 0.8, 0.01, 500 + static_cast<std::uint64_t>(trial));
        const ResidualObservation obs = ResidualObservation::exact(s, truth);
        const CleanupResult result = cleanup_grid_search(s, obs, 0, 0, 0.005);
        CHECK(std::abs(result.anchor_prior - truth.priors[0]) <= 0.02 + 1e-12);
        CHECK(std::abs(result.anchor_failure - truth.failures[s.edge_index(0, 0)]) <=
              0.02 + 1e-12);
        CHECK(max_param_error(result.params, truth) <= 0.05);
    }
}

TEST_CASE("anchor selection picks the better-conditioned side") {
    const NetworkStructure s = dense_demo_structure();
    for (int trial = 0; trial < 5; ++trial) {
        const NoisyOrParameters truth =
            random_params_in(s, 0.2, 0.8, 0.01, 300 + static_cast<std::uint64_t>(trial));
        const ResidualObservation obs = ResidualObservation::exact(s, truth);
        const AnchoredCleanup run = cleanup_best_anchor(s, obs, 0.01);
        CHECK((run.parent == 0 || run.parent == 1));
        CHECK(run.anchor_symptom == (run.parent == 0 ? 0 : 4));
        const CleanupResult fixed =
            cleanup_grid_search(s, obs, run.parent, run.anchor_symptom, 0.01);
        CHECK(run.result.objective == doctest::Approx(fixed.objective));
        CHECK(max_param_error(run.result.params, truth) <= 0.05);
    }
}

TEST_CASE("cleanup rejects invalid anchors") {
    const NetworkStructure s = dense_demo_structure();
    const NoisyOrParameters truth = random_params_in(s, 0.2, 0.8, 0.01, 9);
    const ResidualObservation obs = ResidualObservation::exact(s, truth);
    // Symptom 1 is shared by both parents: not a valid anchor.
    CHECK_THROWS_AS((void)cleanup_grid_search(s, obs, 0, 1, 0.1), NoisyOrError);
    // Symptom 4 belongs to parent 1, not parent 0.
    CHECK_THROWS_AS((void)cleanup_grid_search(s, obs, 0, 4, 0.1), NoisyOrError);
}
