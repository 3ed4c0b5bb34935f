#include "noisyor/scheduler.hpp"

#include <algorithm>
#include <set>

namespace noisyor {

std::string ParamId::to_string() const {
    switch (kind) {
        case ParamKind::Prior: return "p:" + std::to_string(i);
        case ParamKind::Failure: return "f:" + std::to_string(i) + ":" + std::to_string(j);
        case ParamKind::Leak: return "nu:" + std::to_string(j);
    }
    return "?";
}

ParamId ParamId::parse(const std::string& text) {
    std::size_t c1 = text.find(':');
    require(c1 != std::string::npos, ErrorCode::ParseError, "bad parameter id: " + text);
    const std::string head = text.substr(0, c1);
    try {
        if (head == "p")
            return prior(std::stoi(text.substr(c1 + 1)));
        if (head == "nu")
            return leak(std::stoi(text.substr(c1 + 1)));
        if (head == "f") {
            std::size_t c2 = text.find(':', c1 + 1);
            require(c2 != std::string::npos, ErrorCode::ParseError, "bad parameter id: " + text);
            return failure(std::stoi(text.substr(c1 + 1, c2 - c1 - 1)),
                           std::stoi(text.substr(c2 + 1)));
        }
    } catch (const NoisyOrError&) {
        throw;
    } catch (const std::exception&) {
    }
    fail(ErrorCode::ParseError, "bad parameter id: " + text);
}

const char* step_kind_name(StepKind kind) {
    switch (kind) {
        case StepKind::Triplet: return "TRIPLET";
        case StepKind::Pair: return "PAIR";
        case StepKind::Noise: return "NOISE";
    }
    return "?";
}

StepKind step_kind_parse(const std::string& name) {
    if (name == "TRIPLET")
        return StepKind::Triplet;
    if (name == "PAIR")
        return StepKind::Pair;
    if (name == "NOISE")
        return StepKind::Noise;
    fail(ErrorCode::ParseError, "bad step kind: " + name);
}

int Schedule::max_depth() const {
    int d = -1;
    for (const auto& [key, value] : depth)
        d = std::max(d, value);
    return d;
}

bool singly_coupled(const NetworkStructure& s, std::span<const int> symptoms, int disease,
                    std::span<const int> known) {
    require(!symptoms.empty(), ErrorCode::EmptySymptomSet, "empty symptom set");
    auto deleted = [&](int d) {
        return std::find(known.begin(), known.end(), d) != known.end();
    };
    if (deleted(disease))
        return false;
    for (int j : symptoms)
        if (!s.has_edge(disease, j))
            return false;
    // Count how many set members each surviving disease touches.
    std::unordered_map<int, int> touches;
    for (int j : symptoms)
        for (int i : s.parents(j))
            if (i != disease && !deleted(i) && ++touches[i] >= 2)
                return false;
    return true;
}

namespace {

/// Mutable learning state shared by the round loop.
struct BuildState {
    const NetworkStructure& s;
    // Committed (usable) parameters: updated only between rounds.
    std::vector<char> prior_known;
    std::vector<char> failure_known;  // per edge index
    // Learned-this-round parameters: usable only by later rounds.
    std::vector<char> prior_pending;
    std::vector<char> failure_pending;
    std::vector<ParamId> pending;
    std::unordered_map<std::uint64_t, int> depth;
    // Scratch for touch counting, epoch-invalidated.
    std::vector<int> touch_count;
    std::vector<int> touch_epoch;
    std::vector<int> touched;
    int epoch = 0;

    explicit BuildState(const NetworkStructure& structure)
        : s(structure),
          prior_known(static_cast<std::size_t>(structure.disease_count()), 0),
          failure_known(structure.edge_count(), 0),
          prior_pending(prior_known),
          failure_pending(failure_known),
          touch_count(static_cast<std::size_t>(structure.disease_count()), 0),
          touch_epoch(static_cast<std::size_t>(structure.disease_count()), -1) {}

    /// A disease can be adjusted away from `symptoms` when its prior and its
    /// failures into every touched symptom are committed.
    bool adjustable(int disease, std::span<const int> symptoms) const {
        if (!prior_known[static_cast<std::size_t>(disease)])
            return false;
        for (int j : symptoms) {
            int e = s.edge_index(disease, j);
            if (e >= 0 && !failure_known[static_cast<std::size_t>(e)])
                return false;
        }
        return true;
    }

    /// Diseases (other than `disease`) touching >= 2 of `symptoms`, sorted.
    /// Returns false when one of them cannot be adjusted away yet.
    bool collect_adjustments(std::span<const int> symptoms, int disease,
                             std::vector<int>& adjustments) {
        adjustments.clear();
        ++epoch;
        touched.clear();
        for (int j : symptoms) {
            for (int i : s.parents(j)) {
                if (i == disease)
                    continue;
                auto idx = static_cast<std::size_t>(i);
                if (touch_epoch[idx] != epoch) {
                    touch_epoch[idx] = epoch;
                    touch_count[idx] = 1;
                    touched.push_back(i);
                } else {
                    ++touch_count[idx];
                }
            }
        }
        for (int i : touched) {
            if (touch_count[static_cast<std::size_t>(i)] < 2)
                continue;  // single-symptom parents cancel in the conditional ratios
            if (!adjustable(i, symptoms))
                return false;
            adjustments.push_back(i);
        }
        std::sort(adjustments.begin(), adjustments.end());
        return true;
    }

    /// Depth a step inherits from the parameters it consumes (the max-plus-one
    /// recursion): adjustment parameters plus explicit extras such as a pair's
    /// anchor.
    int consumed_depth(std::span<const int> adjustments, std::span<const int> symptoms,
                       std::span<const ParamId> extra) const {
        int max_depth = -1;
        auto consider = [&](const ParamId& id) {
            auto it = depth.find(id.key());
            if (it != depth.end())
                max_depth = std::max(max_depth, it->second);
        };
        for (int k : adjustments) {
            consider(ParamId::prior(k));
            for (int j : symptoms)
                if (s.has_edge(k, j))
                    consider(ParamId::failure(k, j));
        }
        for (const auto& id : extra)
            consider(id);
        return max_depth;
    }
};

}  // namespace

Schedule find_schedule(const NetworkStructure& s, bool use_pairs) {
    Schedule schedule;
    BuildState state(s);
    const int n = s.disease_count();

    std::vector<int> adjustments;
    for (int round = 0;; ++round) {
        std::vector<ScheduleStep> steps;
        state.pending.clear();

        auto mark_pending = [&](const ParamId& id, int step_depth) {
            if (id.kind == ParamKind::Prior)
                state.prior_pending[static_cast<std::size_t>(id.i)] = 1;
            else
                state.failure_pending[static_cast<std::size_t>(s.edge_index(id.i, id.j))] = 1;
            state.pending.push_back(id);
            state.depth[id.key()] = step_depth;
            schedule.learned.push_back(id);
        };

        for (int i = 0; i < n; ++i) {
            auto kids = s.children(i);
            for (int a : kids) {
                const auto edge_a = static_cast<std::size_t>(s.edge_index(i, a));
                if (state.failure_known[edge_a] || state.failure_pending[edge_a])
                    continue;

                bool scheduled = false;
                // First suitable triplet: sibling pairs of `a` within
                // children(i), ascending.
                for (std::size_t bi = 0; bi < kids.size() && !scheduled; ++bi) {
                    if (kids[bi] == a)
                        continue;
                    for (std::size_t ci = bi + 1; ci < kids.size() && !scheduled; ++ci) {
                        if (kids[ci] == a)
                            continue;
                        int trip[3] = {a, kids[bi], kids[ci]};
                        std::sort(trip, trip + 3);
                        if (!state.collect_adjustments(trip, i, adjustments))
                            continue;
                        ScheduleStep step;
                        step.kind = StepKind::Triplet;
                        step.disease = i;
                        step.symptoms.assign(trip, trip + 3);
                        step.adjustments = adjustments;
                        step.round = round;
                        const int step_depth =
                            1 + state.consumed_depth(adjustments, step.symptoms, {});
                        if (!state.prior_known[static_cast<std::size_t>(i)] &&
                            !state.prior_pending[static_cast<std::size_t>(i)]) {
                            step.targets.push_back(ParamId::prior(i));
                            mark_pending(ParamId::prior(i), step_depth);
                        }
                        for (int j : step.symptoms) {
                            const auto e = static_cast<std::size_t>(s.edge_index(i, j));
                            if (state.failure_known[e] || state.failure_pending[e])
                                continue;
                            step.targets.push_back(ParamId::failure(i, j));
                            mark_pending(ParamId::failure(i, j), step_depth);
                        }
                        steps.push_back(std::move(step));
                        scheduled = true;
                    }
                }
                if (scheduled || !use_pairs)
                    continue;
                // Pair fallback: needs the prior and one sibling failure from
                // earlier rounds; other shared parents must be adjustable.
                if (!state.prior_known[static_cast<std::size_t>(i)])
                    continue;
                for (int anchor : kids) {
                    if (anchor == a ||
                        !state.failure_known[static_cast<std::size_t>(s.edge_index(i, anchor))])
                        continue;
                    int pair[2] = {std::min(anchor, a), std::max(anchor, a)};
                    if (!state.collect_adjustments(pair, i, adjustments))
                        continue;
                    ScheduleStep step;
                    step.kind = StepKind::Pair;
                    step.disease = i;
                    step.symptoms.assign(pair, pair + 2);
                    step.anchor_symptom = anchor;
                    step.adjustments = adjustments;
                    step.round = round;
                    const ParamId extra[] = {ParamId::prior(i), ParamId::failure(i, anchor)};
                    const int step_depth =
                        1 + state.consumed_depth(adjustments, step.symptoms, extra);
                    step.targets.push_back(ParamId::failure(i, a));
                    mark_pending(ParamId::failure(i, a), step_depth);
                    steps.push_back(std::move(step));
                    break;
                }
            }
        }

        if (steps.empty())
            break;  // converged: nothing new this round
        // Commit: pending parameters become usable from the next round on.
        for (const auto& id : state.pending) {
            if (id.kind == ParamKind::Prior)
                state.prior_known[static_cast<std::size_t>(id.i)] = 1;
            else
                state.failure_known[static_cast<std::size_t>(s.edge_index(id.i, id.j))] = 1;
        }
        schedule.rounds.push_back(std::move(steps));
    }

    // Noise pass: one step per symptom whose non-noise parents are fully
    // learned. Leak depth follows the same recursion over consumed parameters.
    std::vector<ScheduleStep> noise_steps;
    const int noise_round = static_cast<int>(schedule.rounds.size());
    for (int j = 0; j < s.symptom_count(); ++j) {
        auto parents = s.parents(j);
        bool ready = true;
        int consumed = -1;
        for (int i : parents) {
            if (!state.prior_known[static_cast<std::size_t>(i)] ||
                !state.failure_known[static_cast<std::size_t>(s.edge_index(i, j))]) {
                ready = false;
                break;
            }
            consumed = std::max(consumed, state.depth.at(ParamId::prior(i).key()));
            consumed = std::max(consumed, state.depth.at(ParamId::failure(i, j).key()));
        }
        if (!ready) {
            schedule.unlearnable.push_back(ParamId::leak(j));
            continue;
        }
        ScheduleStep step;
        step.kind = StepKind::Noise;
        step.disease = kNoiseParent;
        step.symptoms = {j};
        step.adjustments.assign(parents.begin(), parents.end());
        step.round = noise_round;
        step.targets.push_back(ParamId::leak(j));
        state.depth[ParamId::leak(j).key()] = parents.empty() ? 0 : consumed + 1;
        schedule.learned.push_back(ParamId::leak(j));
        noise_steps.push_back(std::move(step));
    }
    if (!noise_steps.empty())
        schedule.rounds.push_back(std::move(noise_steps));

    for (int i = 0; i < n; ++i)
        if (!state.prior_known[static_cast<std::size_t>(i)])
            schedule.unlearnable.push_back(ParamId::prior(i));
    for (std::size_t e = 0; e < s.edge_count(); ++e)
        if (!state.failure_known[e])
            schedule.unlearnable.push_back(
                ParamId::failure(s.edges()[e].first, s.edges()[e].second));
    std::sort(schedule.unlearnable.begin(), schedule.unlearnable.end());
    schedule.depth = std::move(state.depth);
    return schedule;
}

Certificate certificate(const Schedule& schedule) {
    Certificate cert;
    cert.identifiable = schedule.unlearnable.empty();
    cert.residual_parameters = schedule.unlearnable;
    std::set<int> parents;
    for (const auto& id : cert.residual_parameters)
        if (id.kind != ParamKind::Leak)
            parents.insert(id.i);
    cert.residual_parents.assign(parents.begin(), parents.end());
    return cert;
}

}  // namespace noisyor
