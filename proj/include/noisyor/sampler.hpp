#pragma once

#include <cstdint>
#include <vector>

#include "noisyor/model.hpp"

namespace noisyor {

/// N x m binary observation matrix, one byte per entry, row-major.
struct SampleBatch {
    int m = 0;
    std::vector<std::uint8_t> data;

    std::uint64_t size() const {
        return m == 0 ? 0 : data.size() / static_cast<std::size_t>(m);
    }
    const std::uint8_t* row(std::uint64_t r) const {
        return data.data() + r * static_cast<std::size_t>(m);
    }
    std::uint8_t at(std::uint64_t r, int j) const { return row(r)[j]; }

    SampleBatch prefix(std::uint64_t n) const {
        SampleBatch b;
        b.m = m;
        b.data.assign(data.begin(), data.begin() + static_cast<std::ptrdiff_t>(
                                                       n * static_cast<std::uint64_t>(m)));
        return b;
    }
};

struct GeneratorConfig {
    std::uint64_t seed = 0;
    double lo = 0.2;   // parameter range for priors and failures
    double hi = 0.8;
    double leak = 0.01;
    double zipf_exponent = 1.5;
    double zipf_top = 0.1;
};

/// Uniform in-degree request: each symptom draws its parent count uniformly
/// from [lo, hi], then its parent set without replacement.
struct DegreeRange {
    int lo = 1;
    int hi = 1;
};

/// Draws N i.i.d. rows from the generative process: diseases ~ Bernoulli(prior),
/// active edges ~ Bernoulli(1 - failure), symptom = OR of activations and a
/// Bernoulli(leak) noise activation. Rows are split into `shards` contiguous
/// blocks; shard s uses the derived seed Rng::derive(seed, s), so the output
/// is deterministic for a fixed (seed, shards) pair.
SampleBatch draw_samples(const NetworkStructure& s, const NoisyOrParameters& params,
                         std::uint64_t n, std::uint64_t seed, int shards = 1);

NetworkStructure random_structure(int n, int m, DegreeRange degree, std::uint64_t seed);

/// Priors and failures uniform in [lo, hi]; every leak set to config.leak.
NoisyOrParameters random_parameters(const NetworkStructure& s, const GeneratorConfig& config);

/// Power-law priors p_i = p_top * (i + 1)^{-s} in rank order.
std::vector<double> zipf_priors(int n, double exponent, double p_top);

/// Two-disease, five-symptom demonstration network: disease 0 -> {0,1,2},
/// disease 1 -> {1,2,3,4}. The smallest structure whose schedule needs an
/// adjustment round.
NetworkStructure demo_structure();

/// Reference parameters for demo_structure(): priors (0.3, 0.4), failures
/// (0.2, 0.5, 0.6) and (0.3, 0.7, 0.25, 0.5), leaks 0.
NoisyOrParameters demo_parameters();

/// demo_structure() plus the extra edge 0 -> 3. Dense enough that no triplet
/// or pair is singly-coupled, leaving everything to the clean-up search.
NetworkStructure dense_demo_structure();

}  // namespace noisyor
