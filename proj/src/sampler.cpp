#include "noisyor/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "noisyor/rng.hpp"

namespace noisyor {

namespace {

void draw_rows(const NetworkStructure& s, const NoisyOrParameters& params, std::uint8_t* out,
               std::uint64_t rows, Rng& rng) {
    const int m = s.symptom_count();
    const int n = s.disease_count();
    for (std::uint64_t r = 0; r < rows; ++r) {
        std::uint8_t* row = out + r * static_cast<std::size_t>(m);
        for (int j = 0; j < m; ++j)
            row[j] = params.leaks[static_cast<std::size_t>(j)] > 0.0 &&
                             rng.bernoulli(params.leaks[static_cast<std::size_t>(j)])
                         ? 1
                         : 0;
        for (int i = 0; i < n; ++i) {
            if (!rng.bernoulli(params.priors[static_cast<std::size_t>(i)]))
                continue;
            // Only the present disease's children can flip; failures are read
            // in edge order so the bit stream is reproducible.
            auto kids = s.children(i);
            if (kids.empty())
                continue;
            std::size_t base = static_cast<std::size_t>(s.edge_index(i, kids[0]));
            for (std::size_t k = 0; k < kids.size(); ++k) {
                if (rng.bernoulli(1.0 - params.failures[base + k]))
                    row[kids[k]] = 1;
            }
        }
    }
}

}  // namespace

SampleBatch draw_samples(const NetworkStructure& s, const NoisyOrParameters& params,
                         std::uint64_t n, std::uint64_t seed, int shards) {
    require(n >= 1, ErrorCode::InvalidArgument, "sample count must be >= 1");
    require(shards >= 1, ErrorCode::InvalidArgument, "shard count must be >= 1");
    SampleBatch batch;
    batch.m = s.symptom_count();
    batch.data.assign(n * static_cast<std::uint64_t>(batch.m), 0);
    const std::uint64_t per = n / static_cast<std::uint64_t>(shards);
    std::uint64_t start = 0;
    for (int shard = 0; shard < shards; ++shard) {
        const std::uint64_t rows =
            shard + 1 == shards ? n - start : per;
        Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(shard)));
        draw_rows(s, params, batch.data.data() + start * static_cast<std::size_t>(batch.m),
                  rows, rng);
        start += rows;
    }
    return batch;
}

NetworkStructure random_structure(int n, int m, DegreeRange degree, std::uint64_t seed) {
    require(n >= 1 && m >= 1, ErrorCode::InvalidArgument, "need at least one node per side");
    require(degree.lo >= 0 && degree.lo <= degree.hi, ErrorCode::InfeasibleDegree,
            "degree range is empty");
    require(degree.hi <= n, ErrorCode::InfeasibleDegree,
            "requested in-degree " + std::to_string(degree.hi) + " exceeds disease count");
    Rng rng(Rng::derive(seed, 0));
    std::vector<int> pool(static_cast<std::size_t>(n));
    std::iota(pool.begin(), pool.end(), 0);
    std::vector<std::pair<int, int>> edges;
    for (int j = 0; j < m; ++j) {
        const int d =
            degree.lo +
            static_cast<int>(rng.next_below(static_cast<std::uint64_t>(degree.hi - degree.lo + 1)));
        // Partial Fisher-Yates: first d entries become the parent set.
        for (int k = 0; k < d; ++k) {
            const std::size_t pick =
                static_cast<std::size_t>(k) +
                rng.next_below(static_cast<std::uint64_t>(n - k));
            std::swap(pool[static_cast<std::size_t>(k)], pool[pick]);
            edges.emplace_back(pool[static_cast<std::size_t>(k)], j);
        }
    }
    return NetworkStructure::from_edges(n, m, std::move(edges));
}

NoisyOrParameters random_parameters(const NetworkStructure& s, const GeneratorConfig& config) {
    require(config.lo > 0.0 && config.lo <= config.hi && config.hi < 1.0,
            ErrorCode::InvalidArgument, "parameter range must satisfy 0 < lo <= hi < 1");
    Rng rng(Rng::derive(config.seed, 0));
    NoisyOrParameters params;
    params.priors.resize(static_cast<std::size_t>(s.disease_count()));
    for (auto& p : params.priors)
        p = rng.uniform(config.lo, config.hi);
    params.failures.resize(s.edge_count());
    for (auto& f : params.failures)
        f = rng.uniform(config.lo, config.hi);
    params.leaks.assign(static_cast<std::size_t>(s.symptom_count()), config.leak);
    return params;
}

std::vector<double> zipf_priors(int n, double exponent, double p_top) {
    require(n >= 1, ErrorCode::InvalidArgument, "need at least one disease");
    require(exponent > 0.0 && p_top > 0.0 && p_top < 1.0, ErrorCode::InvalidArgument,
            "zipf parameters out of range");
    std::vector<double> priors(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        priors[static_cast<std::size_t>(i)] = p_top * std::pow(i + 1.0, -exponent);
    return priors;
}

NetworkStructure demo_structure() {
    return NetworkStructure::from_edges(
        2, 5, {{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {1, 3}, {1, 4}});
}

NoisyOrParameters demo_parameters() {
    NoisyOrParameters params;
    params.priors = {0.3, 0.4};
    params.failures = {0.2, 0.5, 0.6, 0.3, 0.7, 0.25, 0.5};
    params.leaks.assign(5, 0.0);
    return params;
}

NetworkStructure dense_demo_structure() {
    return NetworkStructure::from_edges(
        2, 5, {{0, 0}, {0, 1}, {0, 2}, {0, 3}, {1, 1}, {1, 2}, {1, 3}, {1, 4}});
}

}  // namespace noisyor
