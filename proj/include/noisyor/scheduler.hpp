#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "noisyor/model.hpp"

namespace noisyor {

enum class ParamKind { Prior, Failure, Leak };

/// Identifier of one learnable parameter: a disease prior, an edge failure,
/// or a symptom leak.
struct ParamId {
    ParamKind kind;
    int i = -1;  // disease (Prior, Failure)
    int j = -1;  // symptom (Failure, Leak)

    static ParamId prior(int i) { return {ParamKind::Prior, i, -1}; }
    static ParamId failure(int i, int j) { return {ParamKind::Failure, i, j}; }
    static ParamId leak(int j) { return {ParamKind::Leak, -1, j}; }

    std::uint64_t key() const {
        return (static_cast<std::uint64_t>(kind) << 62) |
               (static_cast<std::uint64_t>(static_cast<std::uint32_t>(i + 1)) << 31) |
               static_cast<std::uint64_t>(static_cast<std::uint32_t>(j + 1));
    }
    bool operator==(const ParamId& o) const { return key() == o.key(); }
    bool operator<(const ParamId& o) const { return key() < o.key(); }

    std::string to_string() const;
    static ParamId parse(const std::string& text);
};

enum class StepKind { Triplet, Pair, Noise };

const char* step_kind_name(StepKind kind);
StepKind step_kind_parse(const std::string& name);

struct ScheduleStep {
    StepKind kind = StepKind::Triplet;
    int disease = -1;                // coupling disease; kNoiseParent for Noise
    std::vector<int> symptoms;       // ascending; 3 / 2 / 1 entries
    int anchor_symptom = -1;         // Pair only: symptom whose failure is already known
    std::vector<int> adjustments;    // diseases whose influence is divided out first
    int round = 0;
    std::vector<ParamId> targets;    // parameters this step is responsible for
};

/// Data-independent learning plan. Rounds only consume parameters committed by
/// strictly earlier rounds; `depth` follows the max-plus-one recursion over the
/// parameters a step consumes (0 when it consumes none).
struct Schedule {
    std::vector<std::vector<ScheduleStep>> rounds;
    std::vector<ParamId> learned;       // in learning order
    std::vector<ParamId> unlearnable;
    std::unordered_map<std::uint64_t, int> depth;

    int depth_of(const ParamId& id) const {
        auto it = depth.find(id.key());
        return it == depth.end() ? -1 : it->second;
    }
    int max_depth() const;
};

/// True iff, after deleting `known` from the graph, `disease` is a parent of
/// every symptom in the set and no other disease is a parent of two or more of
/// them. The noise parent never counts: it cannot act as a coupling parent.
bool singly_coupled(const NetworkStructure& s, std::span<const int> symptoms, int disease,
                    std::span<const int> known);

/// Greedy round construction: each round schedules every parameter learnable
/// from the parameters committed by earlier rounds, binding each target to the
/// first suitable triplet (then pair, when enabled) in ascending symptom
/// order. Converges when a round learns nothing; noise steps for symptoms
/// whose parents are fully learned form the final round.
Schedule find_schedule(const NetworkStructure& s, bool use_pairs);

struct Certificate {
    bool identifiable = false;
    std::vector<ParamId> residual_parameters;
    std::vector<int> residual_parents;
};

/// A complete schedule certifies unique identifiability from third-order
/// moments; otherwise the residual subnetwork is reported.
Certificate certificate(const Schedule& schedule);

}  // namespace noisyor
