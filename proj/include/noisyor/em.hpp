#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "noisyor/model.hpp"
#include "noisyor/sampler.hpp"

namespace noisyor {

struct EmOptions {
    int max_iters = 500;
    double tol = 1e-7;        // stop when the average log-likelihood gain drops below
    int enumeration_cap = 20; // 2^n disease configurations are enumerated
};

struct EmTrace {
    std::vector<double> avg_loglik;  // one entry per visited iterate, non-decreasing
    NoisyOrParameters params;
    int iterations = 0;
    bool converged = false;
};

/// Average log-likelihood of a batch under the model, summing the full-row
/// likelihood over all 2^n disease configurations. Optional per-row weights
/// turn the batch into a weighted empirical distribution (weights need not be
/// normalized).
double loglik_exact(const NetworkStructure& s, const NoisyOrParameters& params,
                    const SampleBatch& batch, std::span<const double> weights = {});

/// Exact-inference EM: the E-step computes exact posteriors over disease
/// configurations per row; the M-step updates priors, failures and leaks in
/// closed form from expected edge-activation counts.
EmTrace em_fit(const NetworkStructure& s, const SampleBatch& batch,
               const NoisyOrParameters& init, const EmOptions& options = {},
               std::span<const double> weights = {});

/// Runs em_fit from `inits` random starting points (uniform [0.2, 0.8]) and
/// returns the run with the best final log-likelihood.
EmTrace em_fit_best_of(const NetworkStructure& s, const SampleBatch& batch, int inits,
                       std::uint64_t seed, const EmOptions& options = {});

}  // namespace noisyor
