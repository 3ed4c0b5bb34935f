#include "noisyor/em.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "noisyor/rng.hpp"

namespace noisyor {

namespace {

/// Compensated accumulator: iteration-to-iteration log-likelihood comparisons
/// sit near machine precision, so plain summation order noise would show up as
/// spurious decreases.
struct KahanSum {
    double sum = 0.0;
    double carry = 0.0;

    void add(double value) {
        const double y = value - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
};

struct ConfigTables {
    std::size_t configs = 0;
    std::vector<double> log_prior;  // per config
    std::vector<double> absent;     // configs x m: q_j(d) = P(s_j = 0 | d)
    std::vector<double> log_absent;
    std::vector<double> log_present;
};

ConfigTables build_tables(const NetworkStructure& s, const NoisyOrParameters& params) {
    const int n = s.disease_count();
    const int m = s.symptom_count();
    ConfigTables tables;
    tables.configs = std::size_t{1} << n;
    tables.log_prior.assign(tables.configs, 0.0);
    tables.absent.assign(tables.configs * static_cast<std::size_t>(m), 0.0);
    tables.log_absent.assign(tables.configs * static_cast<std::size_t>(m), 0.0);
    tables.log_present.assign(tables.configs * static_cast<std::size_t>(m), 0.0);
    for (std::size_t d = 0; d < tables.configs; ++d) {
        double lp = 0.0;
        for (int i = 0; i < n; ++i) {
            const double p = params.priors[static_cast<std::size_t>(i)];
            lp += (d >> i) & 1 ? std::log(p) : std::log1p(-p);
        }
        tables.log_prior[d] = lp;
        for (int j = 0; j < m; ++j) {
            double q = 1.0 - params.leaks[static_cast<std::size_t>(j)];
            for (int i : s.parents(j))
                if ((d >> i) & 1)
                    q *= params.failures[static_cast<std::size_t>(s.edge_index(i, j))];
            const std::size_t idx = d * static_cast<std::size_t>(m) + static_cast<std::size_t>(j);
            tables.absent[idx] = q;
            tables.log_absent[idx] = q > 0.0 ? std::log(q)
                                             : -std::numeric_limits<double>::infinity();
            tables.log_present[idx] = q < 1.0 ? std::log1p(-q)
                                              : -std::numeric_limits<double>::infinity();
        }
    }
    return tables;
}

double row_loglik(const ConfigTables& tables, const std::uint8_t* row, int m,
                  std::vector<double>& scratch) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t d = 0; d < tables.configs; ++d) {
        double ll = tables.log_prior[d];
        const std::size_t base = d * static_cast<std::size_t>(m);
        for (int j = 0; j < m; ++j)
            ll += row[j] ? tables.log_present[base + static_cast<std::size_t>(j)]
                         : tables.log_absent[base + static_cast<std::size_t>(j)];
        scratch[d] = ll;
        best = std::max(best, ll);
    }
    if (!std::isfinite(best))
        return -std::numeric_limits<double>::infinity();
    double total = 0.0;
    for (std::size_t d = 0; d < tables.configs; ++d)
        total += std::exp(scratch[d] - best);
    return best + std::log(total);
}

}  // namespace

double loglik_exact(const NetworkStructure& s, const NoisyOrParameters& params,
                    const SampleBatch& batch, std::span<const double> weights) {
    require(s.disease_count() <= 20, ErrorCode::EnumerationCap,
            "exact likelihood enumerates 2^n configurations; n capped at 20");
    require(batch.m == s.symptom_count(), ErrorCode::WidthMismatch,
            "batch width does not match the structure");
    require(weights.empty() || weights.size() == batch.size(), ErrorCode::InvalidArgument,
            "weight count must match row count");
    const ConfigTables tables = build_tables(s, params);
    std::vector<double> scratch(tables.configs);
    KahanSum total;
    KahanSum weight_total;
    for (std::uint64_t r = 0; r < batch.size(); ++r) {
        const double w = weights.empty() ? 1.0 : weights[r];
        if (w == 0.0)
            continue;
        total.add(w * row_loglik(tables, batch.row(r), batch.m, scratch));
        weight_total.add(w);
    }
    return total.sum / weight_total.sum;
}

EmTrace em_fit(const NetworkStructure& s, const SampleBatch& batch,
               const NoisyOrParameters& init, const EmOptions& options,
               std::span<const double> weights) {
    const int n = s.disease_count();
    const int m = s.symptom_count();
    require(n <= options.enumeration_cap && n <= 20, ErrorCode::EnumerationCap,
            "exact EM enumerates 2^n configurations; n over the cap");
    require(batch.m == m, ErrorCode::WidthMismatch, "batch width does not match the structure");
    require(weights.empty() || weights.size() == batch.size(), ErrorCode::InvalidArgument,
            "weight count must match row count");

    EmTrace trace;
    trace.params = init;
    const std::size_t configs = std::size_t{1} << n;
    std::vector<double> posterior(configs);
    std::vector<double> scratch(configs);

    for (int iter = 0; iter < options.max_iters; ++iter) {
        const ConfigTables tables = build_tables(s, trace.params);

        // Accumulators for the expected complete-data statistics.
        KahanSum weight_total;
        std::vector<KahanSum> prior_num(static_cast<std::size_t>(n));
        std::vector<KahanSum> failure_num(s.edge_count());
        std::vector<KahanSum> leak_num(static_cast<std::size_t>(m));
        KahanSum loglik;

        for (std::uint64_t r = 0; r < batch.size(); ++r) {
            const double w = weights.empty() ? 1.0 : weights[r];
            if (w == 0.0)
                continue;
            const std::uint8_t* row = batch.row(r);
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t d = 0; d < configs; ++d) {
                double ll = tables.log_prior[d];
                const std::size_t base = d * static_cast<std::size_t>(m);
                for (int j = 0; j < m; ++j)
                    ll += row[j] ? tables.log_present[base + static_cast<std::size_t>(j)]
                                 : tables.log_absent[base + static_cast<std::size_t>(j)];
                scratch[d] = ll;
                best = std::max(best, ll);
            }
            double normalizer = 0.0;
            for (std::size_t d = 0; d < configs; ++d) {
                posterior[d] = std::isfinite(scratch[d]) ? std::exp(scratch[d] - best) : 0.0;
                normalizer += posterior[d];
            }
            loglik.add(w * (best + std::log(normalizer)));
            weight_total.add(w);

            for (std::size_t d = 0; d < configs; ++d) {
                const double gamma = w * posterior[d] / normalizer;
                if (gamma == 0.0)
                    continue;
                const std::size_t base = d * static_cast<std::size_t>(m);
                // Leak activations: the noise parent is present in every config.
                for (int j = 0; j < m; ++j) {
                    if (!row[j]) {
                        leak_num[static_cast<std::size_t>(j)].add(gamma);
                        continue;
                    }
                    const double q = tables.absent[base + static_cast<std::size_t>(j)];
                    const double f0 = 1.0 - trace.params.leaks[static_cast<std::size_t>(j)];
                    leak_num[static_cast<std::size_t>(j)].add(gamma * (f0 - q) / (1.0 - q));
                }
                for (int i = 0; i < n; ++i) {
                    if (!((d >> i) & 1))
                        continue;
                    prior_num[static_cast<std::size_t>(i)].add(gamma);
                    auto kids = s.children(i);
                    for (int j : kids) {
                        const auto e = static_cast<std::size_t>(s.edge_index(i, j));
                        if (!row[j]) {
                            failure_num[e].add(gamma);
                            continue;
                        }
                        const double q = tables.absent[base + static_cast<std::size_t>(j)];
                        failure_num[e].add(gamma * (trace.params.failures[e] - q) / (1.0 - q));
                    }
                }
            }
        }

        const double avg = loglik.sum / weight_total.sum;
        trace.avg_loglik.push_back(avg);
        if (trace.avg_loglik.size() >= 2) {
            const double gain = avg - trace.avg_loglik[trace.avg_loglik.size() - 2];
            if (gain < options.tol) {
                trace.converged = true;
                break;
            }
        }

        // M-step: closed-form conditional MLEs of the expected complete data.
        for (int i = 0; i < n; ++i) {
            const double responsibility = prior_num[static_cast<std::size_t>(i)].sum;
            trace.params.priors[static_cast<std::size_t>(i)] =
                responsibility / weight_total.sum;
            for (int j : s.children(i)) {
                const auto e = static_cast<std::size_t>(s.edge_index(i, j));
                if (responsibility > 0.0)
                    trace.params.failures[e] = failure_num[e].sum / responsibility;
            }
        }
        for (int j = 0; j < m; ++j)
            trace.params.leaks[static_cast<std::size_t>(j)] =
                1.0 - leak_num[static_cast<std::size_t>(j)].sum / weight_total.sum;
        ++trace.iterations;
    }

    // On convergence the loop broke before touching the parameters, so the
    // last trace entry already belongs to them. After an iteration-capped exit
    // the final M-step's value is still missing.
    if (!trace.converged)
        trace.avg_loglik.push_back(loglik_exact(s, trace.params, batch, weights));
    return trace;
}

EmTrace em_fit_best_of(const NetworkStructure& s, const SampleBatch& batch, int inits,
                       std::uint64_t seed, const EmOptions& options) {
    require(inits >= 1, ErrorCode::InvalidArgument, "need at least one initialization");
    EmTrace best;
    double best_ll = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < inits; ++k) {
        Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(k)));
        NoisyOrParameters init;
        init.priors.resize(static_cast<std::size_t>(s.disease_count()));
        for (auto& p : init.priors)
            p = rng.uniform(0.2, 0.8);
        init.failures.resize(s.edge_count());
        for (auto& f : init.failures)
            f = rng.uniform(0.2, 0.8);
        init.leaks.resize(static_cast<std::size_t>(s.symptom_count()));
        for (auto& leak : init.leaks)
            leak = rng.uniform(0.2, 0.8);
        EmTrace trace = em_fit(s, batch, init, options);
        if (trace.avg_loglik.back() > best_ll) {
            best_ll = trace.avg_loglik.back();
            best = std::move(trace);
        }
    }
    return best;
}

}  // namespace noisyor
