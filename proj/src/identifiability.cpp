#include "noisyor/identifiability.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <unordered_map>

#include "noisyor/decompose.hpp"
#include "noisyor/rng.hpp"

namespace noisyor {

namespace {

void enumerate_subsets(int m, int max_order, std::vector<std::vector<int>>& out) {
    std::vector<int> combo;
    for (int size = 1; size <= max_order; ++size) {
        combo.assign(static_cast<std::size_t>(size), 0);
        for (int b = 0; b < size; ++b)
            combo[static_cast<std::size_t>(b)] = b;
        if (size > m)
            break;
        for (;;) {
            out.push_back(combo);
            int b = size - 1;
            while (b >= 0 && combo[static_cast<std::size_t>(b)] == m - size + b)
                --b;
            if (b < 0)
                break;
            ++combo[static_cast<std::size_t>(b)];
            for (int c = b + 1; c < size; ++c)
                combo[static_cast<std::size_t>(c)] = combo[static_cast<std::size_t>(c - 1)] + 1;
        }
    }
}

}  // namespace

MomentMapSpec MomentMapSpec::build(const NetworkStructure& s, int max_order, bool include_leaks) {
    require(max_order >= 1 && max_order <= s.symptom_count(), ErrorCode::InvalidArgument,
            "moment order must lie in [1, m]");
    MomentMapSpec spec;
    spec.structure = s;
    spec.max_order = max_order;
    spec.include_leaks = include_leaks;
    enumerate_subsets(s.symptom_count(), max_order, spec.subsets);
    return spec;
}

std::vector<double> MomentMapSpec::pack(const NoisyOrParameters& params) const {
    std::vector<double> theta;
    theta.reserve(static_cast<std::size_t>(parameter_count()));
    theta.insert(theta.end(), params.priors.begin(), params.priors.end());
    theta.insert(theta.end(), params.failures.begin(), params.failures.end());
    if (include_leaks)
        theta.insert(theta.end(), params.leaks.begin(), params.leaks.end());
    return theta;
}

NoisyOrParameters MomentMapSpec::unpack(std::span<const double> theta) const {
    require(theta.size() == static_cast<std::size_t>(parameter_count()),
            ErrorCode::InvalidArgument, "parameter vector length mismatch");
    NoisyOrParameters params;
    const auto n = static_cast<std::size_t>(structure.disease_count());
    const std::size_t f = structure.edge_count();
    params.priors.assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(n));
    params.failures.assign(theta.begin() + static_cast<std::ptrdiff_t>(n),
                           theta.begin() + static_cast<std::ptrdiff_t>(n + f));
    if (include_leaks)
        params.leaks.assign(theta.begin() + static_cast<std::ptrdiff_t>(n + f), theta.end());
    else
        params.leaks.assign(static_cast<std::size_t>(structure.symptom_count()), 0.0);
    return params;
}

std::vector<double> moment_map(const MomentMapSpec& spec, const NoisyOrParameters& params) {
    std::vector<double> values;
    values.reserve(spec.subsets.size());
    for (const auto& subset : spec.subsets)
        values.push_back(negative_moment_exact(spec.structure, params, subset));
    return values;
}

IdentifiabilityVerdict check_identifiability(const NetworkStructure& s, int max_order,
                                             std::uint64_t seed, int trials,
                                             bool include_leaks) {
    require(trials >= 1, ErrorCode::InvalidArgument, "need at least one trial");
    const MomentMapSpec spec = MomentMapSpec::build(s, max_order, include_leaks);
    const int n_params = spec.parameter_count();
    const std::size_t n_constraints = spec.subsets.size();
    constexpr double kStep = 1e-6;
    constexpr double kRankTol = 1e-8;

    // Rows sorted by subset size: the order-k Jacobian is a row prefix.
    std::vector<std::size_t> rows_at_order(static_cast<std::size_t>(max_order) + 1, 0);
    for (std::size_t r = 0; r < n_constraints; ++r)
        for (int k = static_cast<int>(spec.subsets[r].size()); k <= max_order; ++k)
            ++rows_at_order[static_cast<std::size_t>(k)];

    IdentifiabilityVerdict verdict;
    verdict.per_order.resize(static_cast<std::size_t>(max_order));
    for (int k = 1; k <= max_order; ++k) {
        auto& entry = verdict.per_order[static_cast<std::size_t>(k - 1)];
        entry.order = k;
        entry.parameter_count = n_params;
    }

    for (int trial = 0; trial < trials; ++trial) {
        Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(trial)));
        std::vector<double> theta(static_cast<std::size_t>(n_params));
        for (auto& value : theta)
            value = rng.uniform(0.1, 0.9);

        Eigen::MatrixXd jacobian(static_cast<Eigen::Index>(n_constraints), n_params);
        std::vector<double> shifted = theta;
        for (int c = 0; c < n_params; ++c) {
            const auto ci = static_cast<std::size_t>(c);
            shifted[ci] = theta[ci] + kStep;
            const std::vector<double> hi = moment_map(spec, spec.unpack(shifted));
            shifted[ci] = theta[ci] - kStep;
            const std::vector<double> lo = moment_map(spec, spec.unpack(shifted));
            shifted[ci] = theta[ci];
            for (std::size_t r = 0; r < n_constraints; ++r)
                jacobian(static_cast<Eigen::Index>(r), c) = (hi[r] - lo[r]) / (2.0 * kStep);
        }

        for (int k = 1; k <= max_order; ++k) {
            const auto rows = static_cast<Eigen::Index>(rows_at_order[static_cast<std::size_t>(k)]);
            if (rows == 0)
                continue;
            Eigen::JacobiSVD<Eigen::MatrixXd> svd(jacobian.topRows(rows));
            const auto& sigma = svd.singularValues();
            int rank = 0;
            if (sigma.size() > 0) {
                const double threshold = kRankTol * sigma(0);
                for (Eigen::Index i = 0; i < sigma.size(); ++i)
                    if (sigma(i) > threshold)
                        ++rank;
            }
            auto& entry = verdict.per_order[static_cast<std::size_t>(k - 1)];
            entry.rank = std::max(entry.rank, rank);
            if (rank == n_params)
                entry.full_rank = true;
        }
    }

    for (const auto& entry : verdict.per_order) {
        if (entry.full_rank) {
            verdict.minimal_order = entry.order;
            break;
        }
    }
    return verdict;
}

// ---------------------------------------------------------------------------
// Clean-up grid search
// ---------------------------------------------------------------------------

namespace {

std::uint64_t subset_key(std::span<const int> ids) {
    std::uint64_t key = 0;
    for (std::size_t b = 0; b < ids.size(); ++b)
        key |= (static_cast<std::uint64_t>(ids[b]) + 1) << (21 * b);
    return key;
}

/// Resolved indices and scratch for evaluating grid points without lookups.
struct CleanupContext {
    const NetworkStructure& s;
    const ResidualObservation& obs;
    int parent_a;
    int parent_b;
    int anchor;
    std::vector<int> a_children;
    std::vector<int> b_children;
    std::array<int, 3> b_triplet{};
    int pair_anchor = -1;  // second parent's least-coupled child
    std::unordered_map<std::uint64_t, std::size_t> index;

    CleanupContext(const NetworkStructure& structure, const ResidualObservation& observed,
                   int a, int anchor_symptom)
        : s(structure), obs(observed), parent_a(a), parent_b(1 - a), anchor(anchor_symptom) {
        require(s.disease_count() == 2, ErrorCode::PreconditionViolation,
                "clean-up supports exactly two unlearned parents");
        require(a == 0 || a == 1, ErrorCode::IndexOutOfRange, "anchor parent must be 0 or 1");
        a_children.assign(s.children(parent_a).begin(), s.children(parent_a).end());
        b_children.assign(s.children(parent_b).begin(), s.children(parent_b).end());
        require(std::find(a_children.begin(), a_children.end(), anchor) != a_children.end() &&
                    !s.has_edge(parent_b, anchor),
                ErrorCode::NoValidAnchor,
                "anchor symptom must be a child of the anchor parent only");
        require(b_children.size() >= 3, ErrorCode::PreconditionViolation,
                "the second parent needs at least three children");
        // Prefer children the anchor parent does not touch: every division by
        // its influence propagates the grid point's error into the triplet.
        std::vector<int> ranked = b_children;
        std::stable_sort(ranked.begin(), ranked.end(), [&](int x, int y) {
            return s.has_edge(parent_a, x) < s.has_edge(parent_a, y);
        });
        for (std::size_t k = 0; k < 3; ++k)
            b_triplet[k] = ranked[k];
        std::sort(b_triplet.begin(), b_triplet.end());
        pair_anchor = ranked[0];
        for (std::size_t r = 0; r < obs.subsets.size(); ++r)
            index.emplace(subset_key(obs.subsets[r]), r);
    }

    double observed_moment(std::span<const int> ids) const {
        auto it = index.find(subset_key(ids));
        require(it != index.end(), ErrorCode::UnknownSet,
                "residual observation is missing a required subset");
        return obs.values[it->second];
    }
};

/// One grid point, fully evaluated: candidate parameters plus the moment
/// mismatch. nullopt when any learning step degenerates.
struct CleanupCandidate {
    NoisyOrParameters params;
    double objective = 0.0;
};

constexpr double kDegenTol = 1e-8;

std::optional<double> pair_solve(double p, double f_anchor, double m_anchor, double m_other,
                                 double m_both) {
    if (m_anchor <= 0.0 || m_other <= 0.0)
        return std::nullopt;
    const double ratio = m_both / (m_anchor * m_other);
    const double l = ratio * (1.0 - p + p * f_anchor);
    const double denominator = p * (l - f_anchor);
    if (std::abs(l - f_anchor) < kDegenTol || std::abs(denominator) < kDegenTol)
        return std::nullopt;
    return clip_param((1.0 - p) * (1.0 - l) / denominator);
}

std::optional<CleanupCandidate> evaluate_point(const CleanupContext& ctx, double p_a,
                                               double f_aa) {
    const NetworkStructure& s = ctx.s;
    NoisyOrParameters params;
    params.priors.assign(2, 0.0);
    params.failures.assign(s.edge_count(), 1.0);
    params.leaks.assign(static_cast<std::size_t>(s.symptom_count()), 0.0);
    params.priors[static_cast<std::size_t>(ctx.parent_a)] = p_a;

    auto set_failure = [&](int disease, int symptom, double value) {
        params.failures[static_cast<std::size_t>(s.edge_index(disease, symptom))] = value;
    };
    auto failure_of = [&](int disease, int symptom) {
        int e = s.edge_index(disease, symptom);
        return e < 0 ? 1.0 : params.failures[static_cast<std::size_t>(e)];
    };
    // Influence of the anchor parent on a subset, using candidate values.
    auto influence_a = [&](std::span<const int> ids) {
        double prod = 1.0;
        for (int j : ids)
            prod *= failure_of(ctx.parent_a, j);
        return 1.0 - p_a + p_a * prod;
    };

    // Anchor parent: the gridded failure, then its siblings through pairs
    // anchored at the private symptom (nothing else couples those pairs).
    set_failure(ctx.parent_a, ctx.anchor, f_aa);
    const int anchor_ids[1] = {ctx.anchor};
    const double m_anchor = ctx.observed_moment(anchor_ids);
    for (int j : ctx.a_children) {
        if (j == ctx.anchor)
            continue;
        const int single[1] = {j};
        int pair[2] = {std::min(ctx.anchor, j), std::max(ctx.anchor, j)};
        auto f = pair_solve(p_a, f_aa, m_anchor, ctx.observed_moment(single),
                            ctx.observed_moment(pair));
        if (!f)
            return std::nullopt;
        set_failure(ctx.parent_a, j, *f);
    }

    // Second parent: divide the anchor parent's influence out of the triplet
    // moments and decompose what remains.
    NegativeMoments nm;
    nm.ids.assign(ctx.b_triplet.begin(), ctx.b_triplet.end());
    nm.value.assign(8, 1.0);
    std::vector<int> subset;
    for (std::size_t mask = 1; mask < 8; ++mask) {
        subset.clear();
        for (std::size_t b = 0; b < 3; ++b)
            if (mask & (std::size_t{1} << b))
                subset.push_back(ctx.b_triplet[b]);
        const double inf = influence_a(subset);
        if (inf < 1e-9)
            return std::nullopt;
        nm.value[mask] = ctx.observed_moment(subset) / inf;
    }
    double p_b;
    try {
        JointTensor t = joint_from_negmoments(nm, 0.1);
        MixtureResult mix = decompose_222(t);
        NoisyOrTriplet learned = noisyor_from_mixture(mix);
        p_b = clip_param(learned.prior);
        for (std::size_t axis = 0; axis < 3; ++axis)
            set_failure(ctx.parent_b, ctx.b_triplet[axis], learned.failures[axis]);
    } catch (const NoisyOrError&) {
        return std::nullopt;
    }
    params.priors[static_cast<std::size_t>(ctx.parent_b)] = p_b;

    // Remaining children of the second parent via pairs against its least
    // coupled child, with the anchor parent divided out of both moments.
    const int t0 = ctx.pair_anchor;
    for (int x : ctx.b_children) {
        if (std::find(ctx.b_triplet.begin(), ctx.b_triplet.end(), x) != ctx.b_triplet.end())
            continue;
        const int single_t0[1] = {t0};
        const int single_x[1] = {x};
        int pair[2] = {std::min(t0, x), std::max(t0, x)};
        const double inf_t0 = influence_a(single_t0);
        const double inf_x = influence_a(single_x);
        const double inf_both = influence_a(pair);
        if (inf_t0 < 1e-9 || inf_x < 1e-9 || inf_both < 1e-9)
            return std::nullopt;
        auto f = pair_solve(p_b, failure_of(ctx.parent_b, t0),
                            ctx.observed_moment(single_t0) / inf_t0,
                            ctx.observed_moment(single_x) / inf_x,
                            ctx.observed_moment(pair) / inf_both);
        if (!f)
            return std::nullopt;
        set_failure(ctx.parent_b, x, *f);
    }

    // Leaks absorb whatever the two parents cannot explain per symptom.
    auto influence_b = [&](std::span<const int> ids) {
        double prod = 1.0;
        for (int j : ids)
            prod *= failure_of(ctx.parent_b, j);
        return 1.0 - p_b + p_b * prod;
    };
    for (int j = 0; j < s.symptom_count(); ++j) {
        const int single[1] = {j};
        const double expected = influence_a(single) * influence_b(single);
        if (expected < 1e-9)
            return std::nullopt;
        double f0 = ctx.observed_moment(single) / expected;
        f0 = std::clamp(f0, kParamFloor, 1.0);
        params.leaks[static_cast<std::size_t>(j)] = 1.0 - f0;
    }

    // Score: squared mismatch of every reconstructed moment of order <= 3.
    CleanupCandidate candidate;
    candidate.params = std::move(params);
    double objective = 0.0;
    for (std::size_t r = 0; r < ctx.obs.subsets.size(); ++r) {
        const auto& ids = ctx.obs.subsets[r];
        double leak_prod = 1.0;
        for (int j : ids)
            leak_prod *= 1.0 - candidate.params.leaks[static_cast<std::size_t>(j)];
        auto failure_prod = [&](int disease) {
            double prod = 1.0;
            for (int j : ids) {
                int e = s.edge_index(disease, j);
                if (e >= 0)
                    prod *= candidate.params.failures[static_cast<std::size_t>(e)];
            }
            return prod;
        };
        const double ia = 1.0 - p_a + p_a * failure_prod(ctx.parent_a);
        const double ib = 1.0 - p_b + p_b * failure_prod(ctx.parent_b);
        const double reconstructed = ia * ib * leak_prod;
        const double diff = reconstructed - ctx.obs.values[r];
        objective += diff * diff;
    }
    candidate.objective = objective;
    return candidate;
}

}  // namespace

ResidualObservation ResidualObservation::exact(const NetworkStructure& s,
                                               const NoisyOrParameters& params) {
    ResidualObservation obs;
    enumerate_subsets(s.symptom_count(), std::min(3, s.symptom_count()), obs.subsets);
    obs.values.reserve(obs.subsets.size());
    for (const auto& subset : obs.subsets)
        obs.values.push_back(negative_moment_exact(s, params, subset));
    return obs;
}

ResidualObservation ResidualObservation::from_source(const MomentSource& source,
                                                     const NetworkStructure& s) {
    ResidualObservation obs;
    enumerate_subsets(s.symptom_count(), std::min(3, s.symptom_count()), obs.subsets);
    obs.values.reserve(obs.subsets.size());
    for (const auto& subset : obs.subsets)
        obs.values.push_back(source.negmoments(subset).of_all());
    return obs;
}

StatRequest ResidualObservation::request_for(const NetworkStructure& s) {
    std::vector<std::vector<int>> subsets;
    enumerate_subsets(s.symptom_count(), std::min(3, s.symptom_count()), subsets);
    StatRequest request;
    for (auto& subset : subsets)
        request.add(std::move(subset));
    request.canonicalize();
    return request;
}

double cleanup_objective(const NetworkStructure& residual, const ResidualObservation& observed,
                         int parent_a, int anchor_symptom, double anchor_prior,
                         double anchor_failure) {
    CleanupContext ctx(residual, observed, parent_a, anchor_symptom);
    auto candidate = evaluate_point(ctx, anchor_prior, anchor_failure);
    return candidate ? candidate->objective : std::numeric_limits<double>::infinity();
}

AnchoredCleanup cleanup_best_anchor(const NetworkStructure& residual,
                                    const ResidualObservation& observed, double grid_step) {
    require(residual.disease_count() == 2, ErrorCode::PreconditionViolation,
            "clean-up supports exactly two unlearned parents");
    std::optional<AnchoredCleanup> best;
    for (int parent = 0; parent < 2; ++parent) {
        const int other = 1 - parent;
        int anchor = -1;
        for (int j : residual.children(parent)) {
            if (!residual.has_edge(other, j)) {
                anchor = j;
                break;
            }
        }
        if (anchor < 0 || residual.children(other).size() < 3)
            continue;
        AnchoredCleanup candidate;
        try {
            candidate.result = cleanup_grid_search(residual, observed, parent, anchor, grid_step);
        } catch (const NoisyOrError&) {
            continue;
        }
        candidate.parent = parent;
        candidate.anchor_symptom = anchor;
        if (!best || candidate.result.objective < best->result.objective)
            best = std::move(candidate);
    }
    require(best.has_value(), ErrorCode::NoValidAnchor,
            "no parent has a private child with three learnable siblings on the other side");
    return std::move(*best);
}

CleanupResult cleanup_grid_search(const NetworkStructure& residual,
                                  const ResidualObservation& observed, int parent_a,
                                  int anchor_symptom, double grid_step) {
    require(grid_step > 0.0 && grid_step < 1.0, ErrorCode::InvalidArgument,
            "grid step must lie in (0, 1)");
    CleanupContext ctx(residual, observed, parent_a, anchor_symptom);

    std::vector<double> grid;
    for (double value = grid_step; value < 1.0 - 1e-12; value += grid_step)
        grid.push_back(value);

    std::optional<CleanupResult> best;
    for (double p_a : grid) {
        for (double f_aa : grid) {
            auto candidate = evaluate_point(ctx, p_a, f_aa);
            if (!candidate)
                continue;
            if (!best || candidate->objective < best->objective) {
                best = CleanupResult{std::move(candidate->params), candidate->objective, p_a,
                                     f_aa};
            }
        }
    }
    require(best.has_value(), ErrorCode::GridSearchFailed,
            "no grid point produced a usable decomposition");
    return std::move(*best);
}

}  // namespace noisyor
