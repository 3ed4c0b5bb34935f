#pragma once

// Shared fixtures and independent oracles for the test suites. The oracles
// enumerate parent configurations directly and deliberately avoid the
// library's negative-moment code paths.

#include <cmath>
#include <vector>

#include "noisyor/model.hpp"
#include "noisyor/rng.hpp"
#include "noisyor/sampler.hpp"

namespace testsupport {

using namespace noisyor;

/// Joint distribution over a symptom subset by summing over all 2^n disease
/// configurations: p(S) = sum_d prod_i p(d_i) prod_j p(s_j | d).
inline JointTensor enumerate_joint(const NetworkStructure& s, const NoisyOrParameters& params,
                                   const std::vector<int>& symptoms) {
    JointTensor t;
    t.ids = symptoms;
    t.cell.assign(std::size_t{1} << symptoms.size(), 0.0);
    const int n = s.disease_count();
    for (std::size_t config = 0; config < (std::size_t{1} << n); ++config) {
        double prior = 1.0;
        for (int i = 0; i < n; ++i)
            prior *= (config >> i) & 1 ? params.priors[static_cast<std::size_t>(i)]
                                       : 1.0 - params.priors[static_cast<std::size_t>(i)];
        for (std::size_t pattern = 0; pattern < t.cell.size(); ++pattern) {
            double likelihood = 1.0;
            for (std::size_t b = 0; b < symptoms.size(); ++b) {
                const int j = symptoms[b];
                double absent = 1.0 - params.leaks[static_cast<std::size_t>(j)];
                for (int i : s.parents(j))
                    if ((config >> i) & 1)
                        absent *= params.failure(s, i, j);
                likelihood *= (pattern >> b) & 1 ? 1.0 - absent : absent;
            }
            t.cell[pattern] += prior * likelihood;
        }
    }
    return t;
}

inline double enumerate_negmoment(const NetworkStructure& s, const NoisyOrParameters& params,
                                  const std::vector<int>& symptoms) {
    return enumerate_joint(s, params, symptoms).cell[0];
}

/// 2x2x2 tensor of a two-component product mixture, by direct enumeration
/// over the latent state. cond0/cond1 are per-symptom absence probabilities.
inline JointTensor mixture_tensor(double prior, const std::array<double, 3>& cond0,
                                  const std::array<double, 3>& cond1) {
    JointTensor t;
    t.ids = {0, 1, 2};
    t.cell.assign(8, 0.0);
    for (int z = 0; z < 2; ++z) {
        const double weight = z ? prior : 1.0 - prior;
        const auto& cond = z ? cond1 : cond0;
        for (std::size_t pattern = 0; pattern < 8; ++pattern) {
            double p = weight;
            for (std::size_t b = 0; b < 3; ++b)
                p *= (pattern >> b) & 1 ? 1.0 - cond[b] : cond[b];
            t.cell[pattern] += p;
        }
    }
    return t;
}

/// Random parameters with every prior/failure uniform in [lo, hi] and a fixed
/// leak everywhere.
inline NoisyOrParameters random_params_in(const NetworkStructure& s, double lo, double hi,
                                          double leak, std::uint64_t seed) {
    Rng rng(seed);
    NoisyOrParameters params;
    params.priors.resize(static_cast<std::size_t>(s.disease_count()));
    for (auto& p : params.priors)
        p = rng.uniform(lo, hi);
    params.failures.resize(s.edge_count());
    for (auto& f : params.failures)
        f = rng.uniform(lo, hi);
    params.leaks.assign(static_cast<std::size_t>(s.symptom_count()), leak);
    return params;
}

inline double max_param_error(const NoisyOrParameters& a, const NoisyOrParameters& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.priors.size(); ++i)
        worst = std::max(worst, std::abs(a.priors[i] - b.priors[i]));
    for (std::size_t e = 0; e < a.failures.size(); ++e)
        worst = std::max(worst, std::abs(a.failures[e] - b.failures[e]));
    for (std::size_t j = 0; j < a.leaks.size(); ++j)
        worst = std::max(worst, std::abs(a.leaks[j] - b.leaks[j]));
    return worst;
}

}  // namespace testsupport
