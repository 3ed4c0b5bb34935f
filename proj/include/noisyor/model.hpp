#pragma once

#include <span>
#include <utility>
#include <vector>

#include "noisyor/error.hpp"

namespace noisyor {

/// Sentinel index for the always-present noise parent.
inline constexpr int kNoiseParent = -1;

/// Bipartite disease -> symptom graph. An edge (i, j) exists exactly where the
/// failure probability is < 1; the noise parent is implicit on every symptom
/// and never appears as an edge.
class NetworkStructure {
public:
    NetworkStructure() = default;

    /// Builds adjacency from an edge list. Rejects out-of-range indices and
    /// duplicate edges.
    static NetworkStructure from_edges(int n, int m, std::vector<std::pair<int, int>> edges);

    int disease_count() const { return n_; }
    int symptom_count() const { return m_; }
    std::size_t edge_count() const { return edges_.size(); }

    std::span<const int> parents(int symptom) const;
    std::span<const int> children(int disease) const;

    bool has_edge(int disease, int symptom) const { return edge_index(disease, symptom) >= 0; }

    /// Canonical position of (disease, symptom) in the edge list (disease
    /// ascending, then symptom ascending), or -1. Failure vectors are aligned
    /// with this order.
    int edge_index(int disease, int symptom) const;

    std::span<const std::pair<int, int>> edges() const { return edges_; }

private:
    int n_ = 0;
    int m_ = 0;
    std::vector<std::pair<int, int>> edges_;
    std::vector<std::vector<int>> parents_;
    std::vector<std::vector<int>> children_;
    std::vector<int> edge_offset_;  // per disease, offset of its first edge
};

/// Priors, per-edge failures and per-symptom leaks of a noisy-or network.
/// Failures are stored only for edges (implicit 1 elsewhere); `failures` is
/// aligned with NetworkStructure::edges().
struct NoisyOrParameters {
    std::vector<double> priors;
    std::vector<double> failures;
    std::vector<double> leaks;

    double failure(const NetworkStructure& s, int disease, int symptom) const {
        int idx = s.edge_index(disease, symptom);
        return idx < 0 ? 1.0 : failures[static_cast<std::size_t>(idx)];
    }
};

/// Joint distribution over up to three binary symptoms. Cell index is the
/// binary outcome number with bit b corresponding to ids[b] (ids ascending).
struct JointTensor {
    std::vector<int> ids;
    std::vector<double> cell;

    int order() const { return static_cast<int>(ids.size()); }
};

/// Probability of joint absence for every subset of a symptom set. value[mask]
/// is the negative moment of {ids[b] : bit b of mask set}; value[0] == 1.
struct NegativeMoments {
    std::vector<int> ids;
    std::vector<double> value;

    double of_all() const { return value.back(); }
};

struct NetworkDiagnostics {
    double p_min = 0.0;
    double p_max = 0.0;
    double f_max = 0.0;
    double min_absence = 0.0;  // minimum over symptoms of Pr(S_j = 0)
    int max_in_degree = 0;     // excluding the noise parent
};

/// Influence of one parent on a symptom set: 1 - p + p * prod f. Pass
/// kNoiseParent for the noise parent, whose influence is prod (1 - leak).
double influence(const NetworkStructure& s, const NoisyOrParameters& params, int disease,
                 std::span<const int> symptoms);

/// Negative moment of a symptom set: product of influences over the noise
/// parent and every disease (non-parents contribute a factor of 1).
double negative_moment_exact(const NetworkStructure& s, const NoisyOrParameters& params,
                             std::span<const int> symptoms);

/// Negative moments of every subset of `symptoms` (ids must be ascending).
NegativeMoments negative_moments_exact(const NetworkStructure& s, const NoisyOrParameters& params,
                                       std::span<const int> symptoms);

/// Exact joint over at most three symptoms, via negative moments and the
/// inclusion-exclusion transform.
JointTensor joint_exact(const NetworkStructure& s, const NoisyOrParameters& params,
                        std::span<const int> symptoms);

/// Inclusion-exclusion: p(pattern) = sum over supersets V of the absent set Z
/// of (-1)^{|V|-|Z|} * M(V). Cells below -negative_cell_tol raise
/// NegativeTensorEntry; cells in [-tol, 0) are clamped to zero.
JointTensor joint_from_negmoments(const NegativeMoments& nm, double negative_cell_tol = 1e-9);

/// Marginalization companion: M(U) = total mass of cells where U is absent.
NegativeMoments joint_to_negmoments(const JointTensor& t);

NetworkDiagnostics diagnostics(const NetworkStructure& s, const NoisyOrParameters& params);

}  // namespace noisyor
