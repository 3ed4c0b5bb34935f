#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "noisyor/decompose.hpp"
#include "noisyor/moments.hpp"
#include "noisyor/scheduler.hpp"

namespace noisyor {

struct LearnerOptions {
    LearnerOptions() {
        // With finite samples the recovered probabilities routinely leave
        // [0, 1]; invalid estimates are clipped rather than failed, so only a
        // grossly inconsistent tensor aborts a step.
        decompose.range_tol = 1.0;
    }

    /// Adjusted empirical moments can produce mildly negative joint cells from
    /// sampling noise; cells below -negative_cell_tol abort the step instead.
    double negative_cell_tol = 0.1;
    double influence_floor = 1e-6;
    double pair_degeneracy_tol = 1e-8;
    DecomposeOptions decompose;
    /// When a triplet step fails, search for an alternate singly-coupled
    /// triplet for its unlearned targets before giving up.
    bool retry_alternates = false;
};

struct FailedStep {
    int round = 0;
    int index_in_round = 0;
    StepKind kind = StepKind::Triplet;
    int disease = -1;
    std::vector<int> symptoms;
    std::string error;
};

/// Secondary estimate of an already-learned parameter, kept for diagnostics
/// and never used.
struct AltEstimate {
    ParamId id;
    double value = 0.0;
    int round = 0;
};

struct EstimationReport {
    NoisyOrParameters params;  // defaults fill the unlearned slots
    std::vector<char> prior_learned;
    std::vector<char> failure_learned;
    std::vector<char> leak_learned;
    std::unordered_map<std::uint64_t, int> depth;
    std::unordered_map<std::uint64_t, std::pair<int, int>> source_step;  // round, index
    std::vector<FailedStep> failed_steps;
    std::vector<ParamId> unlearned;
    std::vector<AltEstimate> alternates;

    static EstimationReport empty(const NetworkStructure& s);

    bool is_learned(const ParamId& id, const NetworkStructure& s) const;
    void record(const ParamId& id, double value, int depth_value, int round, int index,
                const NetworkStructure& s);
    int depth_of(const ParamId& id) const {
        auto it = depth.find(id.key());
        return it == depth.end() ? -1 : it->second;
    }
};

/// Divides each subset's moment by the disease's influence on it, which equals
/// deleting the disease from the network when the moments are exact. The
/// failure span is aligned with nm.ids (1 for non-edges).
NegativeMoments remove_influence(const NegativeMoments& nm, double prior,
                                 std::span<const double> failures,
                                 double influence_floor = 1e-6);

/// Report-driven overload: looks up the disease's learned parameters, raising
/// PreconditionViolation when any needed one is missing.
NegativeMoments remove_influence(const NetworkStructure& s, const NegativeMoments& nm,
                                 int disease, const EstimationReport& report,
                                 double influence_floor = 1e-6);

/// One triplet extraction: query, adjust, transform, decompose, record.
/// Throws on failure; records new parameters at the step's depth.
void learn_triplet(const NetworkStructure& s, const MomentSource& source,
                   const ScheduleStep& step, EstimationReport& report,
                   const LearnerOptions& options = {});

/// One pair extraction via the pairwise moment ratio; learns the step's single
/// target failure from the anchor failure and the coupling disease's prior.
void learn_pair(const NetworkStructure& s, const MomentSource& source, const ScheduleStep& step,
                EstimationReport& report, const LearnerOptions& options = {});

/// Leak recovery: whatever the learned parents cannot account for in the
/// symptom's absence probability is the leak.
void learn_noise(const NetworkStructure& s, const MomentSource& source, int symptom,
                 EstimationReport& report, int depth_value = 0, int round = -1, int index = -1,
                 const LearnerOptions& options = {});

/// Runs every step in round order. Failed steps are recorded and execution
/// continues; the unlearned list is the schedule's unlearnable set plus any
/// failed targets.
EstimationReport execute_schedule(const NetworkStructure& s, const Schedule& schedule,
                                  const MomentSource& source, const LearnerOptions& options = {});

/// Total L1 distance over priors, edge failures and leaks. Both parameter sets
/// must have the structure's dimensions.
double l1_error(const NetworkStructure& s, const NoisyOrParameters& estimate,
                const NoisyOrParameters& truth);

/// Know-nothing reference point: noise-parent failures 1 (leaks 0), all other
/// priors and failures 0.5.
NoisyOrParameters uniform_baseline(const NetworkStructure& s);

/// The symptom sets a schedule's steps will query, canonicalized.
StatRequest schedule_request(const Schedule& schedule);

}  // namespace noisyor
