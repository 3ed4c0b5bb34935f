#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "noisyor/decompose.hpp"
#include "noisyor/rng.hpp"
#include "support.hpp"

using namespace noisyor;
using namespace testsupport;

namespace {

// Truth relabeled to the library's convention: component 0 carries the larger
// all-absent conditional mass.
struct LabeledTruth {
    double prior;
    std::array<double, 3> cond0, cond1;
};

LabeledTruth labeled(double prior, std::array<double, 3> cond0, std::array<double, 3> cond1) {
    const double absent0 = cond0[0] * cond0[1] * cond0[2];
    const double absent1 = cond1[0] * cond1[1] * cond1[2];
    if (absent0 >= absent1)
        return {prior, cond0, cond1};
    return {1.0 - prior, cond1, cond0};
}

double recovery_error(const MixtureResult& got, const LabeledTruth& want) {
    double worst = std::abs(got.prior - want.prior);
    for (std::size_t a = 0; a < 3; ++a) {
        worst = std::max(worst, std::abs(got.cond0[a] - want.cond0[a]));
        worst = std::max(worst, std::abs(got.cond1[a] - want.cond1[a]));
    }
    return worst;
}

}  // namespace

TEST_CASE("exact mixture recovery") {
    const std::array<double, 3> cond0 = {0.9, 0.8, 0.7};
    const std::array<double, 3> cond1 = {0.45, 0.4, 0.35};
    const JointTensor t = mixture_tensor(0.3, cond0, cond1);
    const MixtureResult mix = decompose_222(t);
    CHECK(recovery_error(mix, labeled(0.3, cond0, cond1)) < 1e-10);

    const NoisyOrTriplet nor = noisyor_from_mixture(mix);
    CHECK(nor.prior == doctest::Approx(0.3).epsilon(1e-9));
    for (double f : nor.failures)
        CHECK(f == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("rank-1 tensors are degenerate") {
    // prior 0: a single component.
    const std::array<double, 3> cond = {0.7, 0.6, 0.5};
    const JointTensor t = mixture_tensor(0.0, cond, cond);
    CHECK_THROWS_AS((void)decompose_222(t), NoisyOrError);

    // Product measure of three independent symptoms.
    JointTensor prod;
    prod.ids = {0, 1, 2};
    prod.cell.resize(8);
    const double q[3] = {0.8, 0.65, 0.4};
    for (std::size_t pattern = 0; pattern < 8; ++pattern) {
        double p = 1.0;
        for (int b = 0; b < 3; ++b)
            p *= (pattern >> b) & 1 ? 1.0 - q[b] : q[b];
        prod.cell[pattern] = p;
    }
    try {
        (void)decompose_222(prod);
        FAIL("expected DegenerateEigen");
    } catch (const NoisyOrError& e) {
        CHECK(e.code() == ErrorCode::DegenerateEigen);
    }
}

TEST_CASE("1000 random mixtures recovered to 1e-9") {
    Rng rng(2024);
    for (int trial = 0; trial < 1000; ++trial) {
        const double prior = rng.uniform(0.05, 0.95);
        std::array<double, 3> cond0, cond1;
        for (std::size_t a = 0; a < 3; ++a) {
            cond0[a] = rng.uniform(0.05, 0.95);
            cond1[a] = rng.uniform(0.05, 0.95);
        }
        const JointTensor t = mixture_tensor(prior, cond0, cond1);
        MixtureResult mix;
        try {
            mix = decompose_222(t);
        } catch (const NoisyOrError&) {
            // Nearly identical components are legitimately degenerate; they
            // must be rare.
            double gap = 0.0;
            for (std::size_t a = 0; a < 3; ++a)
                gap = std::max(gap, std::abs(cond0[a] - cond1[a]));
            CHECK(gap < 1e-3);
            continue;
        }
        CHECK(recovery_error(mix, labeled(prior, cond0, cond1)) < 1e-9);
    }
}

TEST_CASE("reconstruction rebuilds the input tensor") {
    Rng rng(77);
    for (int trial = 0; trial < 100; ++trial) {
        const double prior = rng.uniform(0.1, 0.9);
        std::array<double, 3> cond0, cond1;
        for (std::size_t a = 0; a < 3; ++a) {
            cond0[a] = rng.uniform(0.5, 0.95);
            cond1[a] = rng.uniform(0.05, 0.45);
        }
        const JointTensor t = mixture_tensor(prior, cond0, cond1);
        const MixtureResult mix = decompose_222(t);
        const JointTensor c0 = mix.conditional_tensor(0, t.ids);
        const JointTensor c1 = mix.conditional_tensor(1, t.ids);
        for (std::size_t cell = 0; cell < 8; ++cell) {
            const double rebuilt =
                (1.0 - mix.prior) * c0.cell[cell] + mix.prior * c1.cell[cell];
            CHECK(rebuilt == doctest::Approx(t.cell[cell]).epsilon(1e-10));
        }
    }
}

TEST_CASE("perturbation stability is linear in epsilon") {
    Rng rng(99);
    const double eps = 1e-4;
    double worst_ratio = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const double prior = rng.uniform(0.2, 0.8);
        std::array<double, 3> cond0, cond1;
        for (std::size_t a = 0; a < 3; ++a) {
            cond0[a] = rng.uniform(0.6, 0.95);
            cond1[a] = rng.uniform(0.05, 0.4);
        }
        JointTensor t = mixture_tensor(prior, cond0, cond1);
        for (auto& cell : t.cell)
            cell += rng.uniform(-eps, eps);
        const MixtureResult mix = decompose_222(t);
        const double err = recovery_error(mix, labeled(prior, cond0, cond1));
        worst_ratio = std::max(worst_ratio, err / eps);
    }
    CHECK(worst_ratio < 1e3);
}

TEST_CASE("axis permutations yield the same parameters") {
    Rng rng(123);
    for (int trial = 0; trial < 30; ++trial) {
        const double prior = rng.uniform(0.1, 0.9);
        std::array<double, 3> cond0, cond1;
        for (std::size_t a = 0; a < 3; ++a) {
            cond0[a] = rng.uniform(0.5, 0.95);
            cond1[a] = rng.uniform(0.05, 0.45);
        }
        const JointTensor base = mixture_tensor(prior, cond0, cond1);
        const NoisyOrTriplet reference = noisyor_from_mixture(decompose_222(base));

        const int perms[5][3] = {{0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
        for (const auto& perm : perms) {
            // Permute axes: new axis a holds old axis perm[a].
            JointTensor shuffled;
            shuffled.ids = {0, 1, 2};
            shuffled.cell.assign(8, 0.0);
            for (std::size_t pattern = 0; pattern < 8; ++pattern) {
                std::size_t moved = 0;
                for (int a = 0; a < 3; ++a)
                    moved |= ((pattern >> perm[a]) & 1u) << a;
                shuffled.cell[moved] = base.cell[pattern];
            }
            const NoisyOrTriplet got = noisyor_from_mixture(decompose_222(shuffled));
            CHECK(got.prior == doctest::Approx(reference.prior).epsilon(1e-8));
            for (int a = 0; a < 3; ++a)
                CHECK(got.failures[static_cast<std::size_t>(a)] ==
                      doctest::Approx(reference.failures[static_cast<std::size_t>(perm[a])])
                          .epsilon(1e-8));
        }
    }
}

TEST_CASE("mixture-to-noisy-or edge cases") {
    MixtureResult mix;
    mix.prior = 0.4;
    mix.cond0 = {0.5, 0.5, 0.5};
    mix.cond1 = {0.5, 0.5, 0.5};
    const NoisyOrTriplet same = noisyor_from_mixture(mix);
    for (double f : same.failures)
        CHECK(f == doctest::Approx(1.0 - 1e-6));  // ratio 1 clipped to the ceiling

    mix.cond1 = {0.51, 0.5, 0.5};
    const NoisyOrTriplet noisy = noisyor_from_mixture(mix);
    CHECK(noisy.failures[0] == doctest::Approx(1.0 - 1e-6));  // 1.02 clipped

    mix.cond0 = {0.0, 0.5, 0.5};
    CHECK_THROWS_AS((void)noisyor_from_mixture(mix), NoisyOrError);
}
