#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "noisyor/model.hpp"
#include "noisyor/moments.hpp"

namespace noisyor {

/// Fixed enumeration of a moment-constraint system: every symptom subset of
/// size <= max_order in canonical order (by size, then lexicographically), and
/// the parameter vector ordered priors, then edge failures, then leaks (leaks
/// optional).
struct MomentMapSpec {
    NetworkStructure structure;
    int max_order = 3;
    bool include_leaks = true;
    std::vector<std::vector<int>> subsets;

    static MomentMapSpec build(const NetworkStructure& s, int max_order, bool include_leaks);

    int parameter_count() const {
        return structure.disease_count() + static_cast<int>(structure.edge_count()) +
               (include_leaks ? structure.symptom_count() : 0);
    }

    std::vector<double> pack(const NoisyOrParameters& params) const;
    NoisyOrParameters unpack(std::span<const double> theta) const;
};

/// Negative moment of every listed subset, in spec order.
std::vector<double> moment_map(const MomentMapSpec& spec, const NoisyOrParameters& params);

struct OrderResult {
    int order = 0;
    int rank = 0;
    int parameter_count = 0;
    bool full_rank = false;
};

struct IdentifiabilityVerdict {
    std::vector<OrderResult> per_order;
    int minimal_order = -1;  // -1: not identifiable up to max_order
};

/// Local identifiability by Jacobian rank: draw random parameters in
/// [0.1, 0.9], differentiate the moment map by central finite differences
/// (step 1e-6), and count singular values above 1e-8 times the largest.
/// Full rank at order k in any trial certifies local identifiability at k.
IdentifiabilityVerdict check_identifiability(const NetworkStructure& s, int max_order,
                                             std::uint64_t seed, int trials,
                                             bool include_leaks = true);

/// Observed negative moments of every subset (sizes 1..3) of a residual
/// subnetwork's symptoms, in the canonical subset order of MomentMapSpec.
struct ResidualObservation {
    std::vector<std::vector<int>> subsets;
    std::vector<double> values;

    static ResidualObservation exact(const NetworkStructure& s, const NoisyOrParameters& params);
    static ResidualObservation from_source(const MomentSource& source,
                                           const NetworkStructure& s);
    /// The subsets a residual observation needs, as a collection request.
    static StatRequest request_for(const NetworkStructure& s);
};

struct CleanupResult {
    NoisyOrParameters params;
    double objective = 0.0;
    double anchor_prior = 0.0;
    double anchor_failure = 0.0;
};

/// Grid search for a residual subnetwork with exactly two unlearned parents.
/// For each (prior, failure) grid value of the anchor parent at its private
/// anchor symptom: learn the parent's remaining failures through pairwise
/// moments, divide its influence out, learn the other parent from a triplet of
/// its children, recover leaks, and score by the squared mismatch of every
/// reconstructed moment of order <= 3. Returns the argmin grid point's full
/// parameter set.
CleanupResult cleanup_grid_search(const NetworkStructure& residual,
                                  const ResidualObservation& observed, int parent_a,
                                  int anchor_symptom, double grid_step);

/// Objective value of a single grid point; infinity when the point fails to
/// decompose.
double cleanup_objective(const NetworkStructure& residual, const ResidualObservation& observed,
                         int parent_a, int anchor_symptom, double anchor_prior,
                         double anchor_failure);

struct AnchoredCleanup {
    CleanupResult result;
    int parent = -1;
    int anchor_symptom = -1;
};

/// Runs the grid search once per valid anchor (each parent owning a private
/// child) and keeps the run whose reconstruction matches the observed moments
/// best. The objective also flags which anchoring is well conditioned, so
/// this routinely beats committing to one side a priori.
AnchoredCleanup cleanup_best_anchor(const NetworkStructure& residual,
                                    const ResidualObservation& observed, double grid_step);

}  // namespace noisyor
