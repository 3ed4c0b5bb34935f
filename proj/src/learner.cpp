#include "noisyor/learner.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace noisyor {

EstimationReport EstimationReport::empty(const NetworkStructure& s) {
    EstimationReport report;
    report.params.priors.assign(static_cast<std::size_t>(s.disease_count()), 0.5);
    report.params.failures.assign(s.edge_count(), 0.5);
    report.params.leaks.assign(static_cast<std::size_t>(s.symptom_count()), 0.0);
    report.prior_learned.assign(static_cast<std::size_t>(s.disease_count()), 0);
    report.failure_learned.assign(s.edge_count(), 0);
    report.leak_learned.assign(static_cast<std::size_t>(s.symptom_count()), 0);
    return report;
}

bool EstimationReport::is_learned(const ParamId& id, const NetworkStructure& s) const {
    switch (id.kind) {
        case ParamKind::Prior:
            return prior_learned[static_cast<std::size_t>(id.i)] != 0;
        case ParamKind::Failure: {
            int e = s.edge_index(id.i, id.j);
            return e >= 0 && failure_learned[static_cast<std::size_t>(e)] != 0;
        }
        case ParamKind::Leak:
            return leak_learned[static_cast<std::size_t>(id.j)] != 0;
    }
    return false;
}

void EstimationReport::record(const ParamId& id, double value, int depth_value, int round,
                              int index, const NetworkStructure& s) {
    if (is_learned(id, s)) {
        alternates.push_back({id, value, round});
        return;
    }
    switch (id.kind) {
        case ParamKind::Prior:
            params.priors[static_cast<std::size_t>(id.i)] = value;
            prior_learned[static_cast<std::size_t>(id.i)] = 1;
            break;
        case ParamKind::Failure: {
            int e = s.edge_index(id.i, id.j);
            require(e >= 0, ErrorCode::StructureMismatch, "no edge for " + id.to_string());
            params.failures[static_cast<std::size_t>(e)] = value;
            failure_learned[static_cast<std::size_t>(e)] = 1;
            break;
        }
        case ParamKind::Leak:
            params.leaks[static_cast<std::size_t>(id.j)] = value;
            leak_learned[static_cast<std::size_t>(id.j)] = 1;
            break;
    }
    depth[id.key()] = depth_value;
    source_step[id.key()] = {round, index};
}

NegativeMoments remove_influence(const NegativeMoments& nm, double prior,
                                 std::span<const double> failures, double influence_floor) {
    require(failures.size() == nm.ids.size(), ErrorCode::InvalidArgument,
            "failure span must align with the moment ids");
    NegativeMoments out;
    out.ids = nm.ids;
    out.value.resize(nm.value.size());
    for (std::size_t mask = 0; mask < nm.value.size(); ++mask) {
        double prod = 1.0;
        for (std::size_t b = 0; b < failures.size(); ++b)
            if (mask & (std::size_t{1} << b))
                prod *= failures[b];
        const double inf = 1.0 - prior + prior * prod;
        require(inf >= influence_floor, ErrorCode::InfluenceUnderflow,
                "influence " + std::to_string(inf) + " below floor");
        out.value[mask] = nm.value[mask] / inf;
    }
    out.value[0] = 1.0;
    return out;
}

NegativeMoments remove_influence(const NetworkStructure& s, const NegativeMoments& nm,
                                 int disease, const EstimationReport& report,
                                 double influence_floor) {
    require(report.is_learned(ParamId::prior(disease), s), ErrorCode::PreconditionViolation,
            "adjustment needs unlearned " + ParamId::prior(disease).to_string());
    std::vector<double> failures(nm.ids.size(), 1.0);
    for (std::size_t b = 0; b < nm.ids.size(); ++b) {
        int e = s.edge_index(disease, nm.ids[b]);
        if (e < 0)
            continue;
        require(report.failure_learned[static_cast<std::size_t>(e)] != 0,
                ErrorCode::PreconditionViolation,
                "adjustment needs unlearned " +
                    ParamId::failure(disease, nm.ids[b]).to_string());
        failures[b] = report.params.failures[static_cast<std::size_t>(e)];
    }
    return remove_influence(nm, report.params.priors[static_cast<std::size_t>(disease)], failures,
                            influence_floor);
}

namespace {

NegativeMoments adjusted_moments(const NetworkStructure& s, const MomentSource& source,
                                 const ScheduleStep& step, const EstimationReport& report,
                                 const LearnerOptions& options) {
    NegativeMoments nm = source.negmoments(step.symptoms);
    for (int k : step.adjustments)
        nm = remove_influence(s, nm, k, report, options.influence_floor);
    return nm;
}

void apply_triplet(const NetworkStructure& s, const MomentSource& source,
                   const ScheduleStep& step, EstimationReport& report,
                   const LearnerOptions& options, int index_in_round) {
    NegativeMoments nm = adjusted_moments(s, source, step, report, options);
    JointTensor t = joint_from_negmoments(nm, options.negative_cell_tol);
    MixtureResult mix = decompose_222(t, options.decompose);
    NoisyOrTriplet learned = noisyor_from_mixture(mix);

    const int d = step.disease;
    report.record(ParamId::prior(d), clip_param(learned.prior), step.round, step.round,
                  index_in_round, s);
    for (std::size_t axis = 0; axis < 3; ++axis) {
        const int j = step.symptoms[axis];
        if (!s.has_edge(d, j))
            continue;
        report.record(ParamId::failure(d, j), learned.failures[axis], step.round, step.round,
                      index_in_round, s);
    }
}

}  // namespace

void learn_triplet(const NetworkStructure& s, const MomentSource& source,
                   const ScheduleStep& step, EstimationReport& report,
                   const LearnerOptions& options) {
    require(step.kind == StepKind::Triplet && step.symptoms.size() == 3,
            ErrorCode::InvalidArgument, "not a triplet step");
    apply_triplet(s, source, step, report, options, -1);
}

void learn_pair(const NetworkStructure& s, const MomentSource& source, const ScheduleStep& step,
                EstimationReport& report, const LearnerOptions& options) {
    require(step.kind == StepKind::Pair && step.symptoms.size() == 2, ErrorCode::InvalidArgument,
            "not a pair step");
    const int d = step.disease;
    const int anchor = step.anchor_symptom;
    const int target = step.symptoms[0] == anchor ? step.symptoms[1] : step.symptoms[0];
    require(report.is_learned(ParamId::prior(d), s) &&
                report.is_learned(ParamId::failure(d, anchor), s),
            ErrorCode::PreconditionViolation, "pair step needs the prior and anchor failure");

    NegativeMoments nm = adjusted_moments(s, source, step, report, options);
    const std::size_t anchor_bit = step.symptoms[0] == anchor ? 0 : 1;
    const double m_anchor = nm.value[std::size_t{1} << anchor_bit];
    const double m_target = nm.value[std::size_t{1} << (1 - anchor_bit)];
    const double m_both = nm.value[3];
    require(m_anchor > 0.0 && m_target > 0.0, ErrorCode::ZeroDenominator,
            "vanishing single-symptom moment");

    const double p = report.params.priors[static_cast<std::size_t>(d)];
    const double f_anchor =
        report.params.failures[static_cast<std::size_t>(s.edge_index(d, anchor))];
    // Off-coupling parents and the leak cancel in the ratio, leaving
    // L = I(d, {anchor, target}) / I(d, target).
    const double ratio = m_both / (m_anchor * m_target);
    const double l = ratio * (1.0 - p + p * f_anchor);
    const double denominator = p * (l - f_anchor);
    require(std::abs(l - f_anchor) >= options.pair_degeneracy_tol &&
                std::abs(denominator) >= options.pair_degeneracy_tol,
            ErrorCode::DegeneratePair, "pair equation is degenerate");
    const double f_target = (1.0 - p) * (1.0 - l) / denominator;
    report.record(ParamId::failure(d, target), clip_param(f_target), step.round, step.round, -1,
                  s);
}

void learn_noise(const NetworkStructure& s, const MomentSource& source, int symptom,
                 EstimationReport& report, int depth_value, int round, int index,
                 const LearnerOptions& options) {
    const int one[] = {symptom};
    NegativeMoments nm = source.negmoments(one);
    double prod = 1.0;
    for (int i : s.parents(symptom)) {
        require(report.is_learned(ParamId::prior(i), s) &&
                    report.is_learned(ParamId::failure(i, symptom), s),
                ErrorCode::PreconditionViolation,
                "leak of symptom " + std::to_string(symptom) + " needs disease " +
                    std::to_string(i) + " fully learned");
        const double p = report.params.priors[static_cast<std::size_t>(i)];
        const double f =
            report.params.failures[static_cast<std::size_t>(s.edge_index(i, symptom))];
        prod *= 1.0 - p + p * f;
    }
    require(prod >= options.influence_floor, ErrorCode::InfluenceUnderflow,
            "parent influence product underflows");
    double f0 = nm.value[1] / prod;
    f0 = std::clamp(f0, kParamFloor, 1.0);
    report.record(ParamId::leak(symptom), 1.0 - f0, depth_value, round, index, s);
}

namespace {

/// Optional robustness pass: look for another triplet that is singly-coupled
/// given what the report has actually learned so far.
bool retry_triplet(const NetworkStructure& s, const MomentSource& source,
                   const ScheduleStep& failed, EstimationReport& report,
                   const LearnerOptions& options) {
    const int d = failed.disease;
    auto kids = s.children(d);
    std::vector<int> known;
    for (int i = 0; i < s.disease_count(); ++i) {
        if (i == d || report.prior_learned[static_cast<std::size_t>(i)] == 0)
            continue;
        known.push_back(i);
    }
    for (std::size_t ai = 0; ai < kids.size(); ++ai) {
        for (std::size_t bi = ai + 1; bi < kids.size(); ++bi) {
            for (std::size_t ci = bi + 1; ci < kids.size(); ++ci) {
                int trip[3] = {kids[ai], kids[bi], kids[ci]};
                if (std::find(failed.symptoms.begin(), failed.symptoms.end(), trip[0]) !=
                        failed.symptoms.end() &&
                    std::find(failed.symptoms.begin(), failed.symptoms.end(), trip[1]) !=
                        failed.symptoms.end() &&
                    std::find(failed.symptoms.begin(), failed.symptoms.end(), trip[2]) !=
                        failed.symptoms.end())
                    continue;  // the schedule's own choice already failed
                ScheduleStep step;
                step.kind = StepKind::Triplet;
                step.disease = d;
                step.symptoms.assign(trip, trip + 3);
                step.round = failed.round;
                // Adjust every learned parent that still couples the triplet.
                std::unordered_map<int, int> touches;
                bool feasible = true;
                for (int j : step.symptoms)
                    for (int i : s.parents(j))
                        if (i != d)
                            ++touches[i];
                for (const auto& [i, count] : touches) {
                    if (count < 2)
                        continue;
                    bool ok = report.prior_learned[static_cast<std::size_t>(i)] != 0;
                    for (int j : step.symptoms) {
                        int e = s.edge_index(i, j);
                        if (e >= 0 && report.failure_learned[static_cast<std::size_t>(e)] == 0)
                            ok = false;
                    }
                    if (!ok) {
                        feasible = false;
                        break;
                    }
                    step.adjustments.push_back(i);
                }
                if (!feasible)
                    continue;
                std::sort(step.adjustments.begin(), step.adjustments.end());
                try {
                    apply_triplet(s, source, step, report, options, -1);
                    return true;
                } catch (const NoisyOrError&) {
                    continue;
                }
            }
        }
    }
    return false;
}

}  // namespace

EstimationReport execute_schedule(const NetworkStructure& s, const Schedule& schedule,
                                  const MomentSource& source, const LearnerOptions& options) {
    EstimationReport report = EstimationReport::empty(s);
    for (std::size_t r = 0; r < schedule.rounds.size(); ++r) {
        const auto& round = schedule.rounds[r];
        for (std::size_t k = 0; k < round.size(); ++k) {
            const ScheduleStep& step = round[k];
            try {
                switch (step.kind) {
                    case StepKind::Triplet:
                        apply_triplet(s, source, step, report, options, static_cast<int>(k));
                        break;
                    case StepKind::Pair:
                        learn_pair(s, source, step, report, options);
                        break;
                    case StepKind::Noise: {
                        const int j = step.symptoms[0];
                        const int d = schedule.depth_of(ParamId::leak(j));
                        learn_noise(s, source, j, report, d < 0 ? step.round : d,
                                    static_cast<int>(r), static_cast<int>(k), options);
                        break;
                    }
                }
            } catch (const NoisyOrError& e) {
                bool recovered = false;
                if (step.kind == StepKind::Triplet && options.retry_alternates)
                    recovered = retry_triplet(s, source, step, report, options);
                if (!recovered)
                    report.failed_steps.push_back({static_cast<int>(r), static_cast<int>(k),
                                                   step.kind, step.disease, step.symptoms,
                                                   e.what()});
            }
        }
    }
    // Unlearned = structurally unlearnable plus failed targets.
    std::set<ParamId> unlearned(schedule.unlearnable.begin(), schedule.unlearnable.end());
    for (const auto& round : schedule.rounds)
        for (const auto& step : round)
            for (const auto& id : step.targets)
                if (!report.is_learned(id, s))
                    unlearned.insert(id);
    report.unlearned.assign(unlearned.begin(), unlearned.end());
    // Schedule depths are authoritative for parameters learned by their own step.
    for (const auto& [key, d] : schedule.depth) {
        auto it = report.depth.find(key);
        if (it != report.depth.end())
            it->second = d;
    }
    return report;
}

double l1_error(const NetworkStructure& s, const NoisyOrParameters& estimate,
                const NoisyOrParameters& truth) {
    auto check = [&](const NoisyOrParameters& p) {
        require(p.priors.size() == static_cast<std::size_t>(s.disease_count()) &&
                    p.failures.size() == s.edge_count() &&
                    p.leaks.size() == static_cast<std::size_t>(s.symptom_count()),
                ErrorCode::StructureMismatch, "parameter vectors do not match the structure");
    };
    check(estimate);
    check(truth);
    double total = 0.0;
    for (std::size_t i = 0; i < estimate.priors.size(); ++i)
        total += std::abs(estimate.priors[i] - truth.priors[i]);
    for (std::size_t e = 0; e < estimate.failures.size(); ++e)
        total += std::abs(estimate.failures[e] - truth.failures[e]);
    for (std::size_t j = 0; j < estimate.leaks.size(); ++j)
        total += std::abs(estimate.leaks[j] - truth.leaks[j]);
    return total;
}

NoisyOrParameters uniform_baseline(const NetworkStructure& s) {
    NoisyOrParameters p;
    p.priors.assign(static_cast<std::size_t>(s.disease_count()), 0.5);
    p.failures.assign(s.edge_count(), 0.5);
    p.leaks.assign(static_cast<std::size_t>(s.symptom_count()), 0.0);
    return p;
}

StatRequest schedule_request(const Schedule& schedule) {
    StatRequest request;
    for (const auto& round : schedule.rounds)
        for (const auto& step : round)
            request.add(step.symptoms);
    request.canonicalize();
    return request;
}

}  // namespace noisyor
