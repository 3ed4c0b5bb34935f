#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "noisyor/model.hpp"
#include "noisyor/sampler.hpp"

namespace noisyor {

/// Deduplicated list of symptom sets (sizes 1..3) whose joint counts are to be
/// collected in a single pass.
struct StatRequest {
    std::vector<std::vector<int>> sets;

    /// Sorts the ids of a set, validates its size, and appends it.
    void add(std::vector<int> ids);

    /// Sorts the set list and drops duplicates. collect() requires this.
    void canonicalize();
};

/// Exact integer outcome counts for every requested set. Outcome index is the
/// binary number with bit b = value of the b-th id (ids ascending).
class StatStore {
public:
    StatStore() = default;

    static StatStore collect(const SampleBatch& batch, const StatRequest& request);
    static StatStore collect(const SampleBatch& batch, const StatRequest& request,
                             std::uint64_t row_begin, std::uint64_t row_end);

    /// Elementwise sum; requests must match exactly.
    static StatStore merge(const StatStore& a, const StatStore& b);

    std::uint64_t sample_count() const { return n_; }
    std::size_t set_count() const { return sets_.size(); }
    const std::vector<int>& set_ids(std::size_t k) const { return sets_[k]; }
    std::span<const std::uint64_t> set_counts(std::size_t k) const;

    bool contains(std::span<const int> ids) const;

    struct QueryResult {
        JointTensor tensor;
        NegativeMoments negmoments;
    };

    /// Empirical joint table (counts / N) and negative moments for a requested
    /// set. The table sums to exactly 1; negative moments come from integer
    /// subset sums, so merge order can never change them.
    QueryResult query(std::span<const int> ids) const;

    NegativeMoments negmoments(std::span<const int> ids) const;

    /// Reassembles a store from deserialized content.
    static StatStore from_raw(std::uint64_t n, std::vector<std::vector<int>> sets,
                              std::vector<std::vector<std::uint64_t>> counts);

private:
    std::size_t find(std::span<const int> ids) const;

    std::uint64_t n_ = 0;
    std::vector<std::vector<int>> sets_;
    std::vector<std::array<std::uint64_t, 8>> counts_;
    std::unordered_map<std::uint64_t, std::size_t> index_;
};

/// Read-side abstraction the learner works against: empirical counts and
/// analytically computed moments are interchangeable behind it.
class MomentSource {
public:
    virtual ~MomentSource() = default;
    /// Negative moments of every subset of `ids` (ascending, size 1..3).
    virtual NegativeMoments negmoments(std::span<const int> ids) const = 0;
};

class StoreMomentSource final : public MomentSource {
public:
    explicit StoreMomentSource(const StatStore& store) : store_(&store) {}
    NegativeMoments negmoments(std::span<const int> ids) const override {
        return store_->negmoments(ids);
    }

private:
    const StatStore* store_;
};

class ExactMomentSource final : public MomentSource {
public:
    ExactMomentSource(const NetworkStructure& s, const NoisyOrParameters& params)
        : s_(&s), params_(&params) {}
    NegativeMoments negmoments(std::span<const int> ids) const override {
        return negative_moments_exact(*s_, *params_, ids);
    }

private:
    const NetworkStructure* s_;
    const NoisyOrParameters* params_;
};

}  // namespace noisyor
