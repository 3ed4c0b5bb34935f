#include "noisyor/moments.hpp"

#include <algorithm>
#include <string>

namespace noisyor {

namespace {

std::uint64_t set_key(std::span<const int> ids) {
    // Three ids below 2^21 pack into one word.
    std::uint64_t key = 0;
    for (std::size_t b = 0; b < ids.size(); ++b)
        key |= (static_cast<std::uint64_t>(ids[b]) + 1) << (21 * b);
    return key;
}

std::string set_name(std::span<const int> ids) {
    std::string out = "{";
    for (std::size_t b = 0; b < ids.size(); ++b)
        out += (b ? "," : "") + std::to_string(ids[b]);
    return out + "}";
}

}  // namespace

void StatRequest::add(std::vector<int> ids) {
    std::sort(ids.begin(), ids.end());
    require(!ids.empty() && ids.size() <= 3, ErrorCode::InvalidArgument,
            "requested sets must have 1 to 3 symptoms");
    require(std::adjacent_find(ids.begin(), ids.end()) == ids.end(), ErrorCode::InvalidArgument,
            "duplicate symptom in requested set");
    sets.push_back(std::move(ids));
}

void StatRequest::canonicalize() {
    std::sort(sets.begin(), sets.end());
    sets.erase(std::unique(sets.begin(), sets.end()), sets.end());
}

StatStore StatStore::collect(const SampleBatch& batch, const StatRequest& request) {
    return collect(batch, request, 0, batch.size());
}

StatStore StatStore::collect(const SampleBatch& batch, const StatRequest& request,
                             std::uint64_t row_begin, std::uint64_t row_end) {
    require(row_begin <= row_end && row_end <= batch.size(), ErrorCode::InvalidArgument,
            "row range out of bounds");
    StatStore store;
    store.sets_ = request.sets;
    store.counts_.assign(store.sets_.size(), {});
    for (std::size_t k = 0; k < store.sets_.size(); ++k) {
        const auto& ids = store.sets_[k];
        require(std::is_sorted(ids.begin(), ids.end()) &&
                    std::adjacent_find(ids.begin(), ids.end()) == ids.end(),
                ErrorCode::InvalidArgument, "request not canonicalized: " + set_name(ids));
        for (int j : ids)
            require(j >= 0 && j < batch.m, ErrorCode::WidthMismatch,
                    "symptom " + std::to_string(j) + " outside row width " +
                        std::to_string(batch.m));
        auto [it, inserted] = store.index_.emplace(set_key(ids), k);
        require(inserted, ErrorCode::InvalidArgument, "duplicate set in request: " + set_name(ids));
    }
    // The one pass over the data: every row is touched exactly once however
    // many sets are tracked.
    for (std::uint64_t r = row_begin; r < row_end; ++r) {
        const std::uint8_t* row = batch.row(r);
        for (std::size_t k = 0; k < store.sets_.size(); ++k) {
            const auto& ids = store.sets_[k];
            std::size_t outcome = 0;
            for (std::size_t b = 0; b < ids.size(); ++b)
                outcome |= static_cast<std::size_t>(row[ids[b]] != 0) << b;
            ++store.counts_[k][outcome];
        }
    }
    store.n_ = row_end - row_begin;
    return store;
}

StatStore StatStore::merge(const StatStore& a, const StatStore& b) {
    require(a.sets_ == b.sets_, ErrorCode::RequestMismatch,
            "cannot merge stores with different requests");
    StatStore out = a;
    out.n_ += b.n_;
    for (std::size_t k = 0; k < out.counts_.size(); ++k)
        for (std::size_t c = 0; c < 8; ++c)
            out.counts_[k][c] += b.counts_[k][c];
    return out;
}

std::span<const std::uint64_t> StatStore::set_counts(std::size_t k) const {
    const std::size_t cells = std::size_t{1} << sets_[k].size();
    return {counts_[k].data(), cells};
}

bool StatStore::contains(std::span<const int> ids) const {
    return index_.find(set_key(ids)) != index_.end();
}

std::size_t StatStore::find(std::span<const int> ids) const {
    auto it = index_.find(set_key(ids));
    require(it != index_.end(), ErrorCode::UnknownSet, "set was not requested: " + set_name(ids));
    return it->second;
}

StatStore::QueryResult StatStore::query(std::span<const int> ids) const {
    require(n_ > 0, ErrorCode::EmptyStore, "store holds no samples");
    const std::size_t k = find(ids);
    QueryResult out;
    out.tensor.ids = sets_[k];
    const std::size_t cells = std::size_t{1} << sets_[k].size();
    out.tensor.cell.resize(cells);
    const double scale = 1.0 / static_cast<double>(n_);
    double total = 0.0;
    std::size_t largest = 0;
    for (std::size_t c = 0; c < cells; ++c) {
        out.tensor.cell[c] = static_cast<double>(counts_[k][c]) * scale;
        total += out.tensor.cell[c];
        if (counts_[k][c] > counts_[k][largest])
            largest = c;
    }
    // Rounding can leave the table within a few ulp of 1; fold the residual
    // into the largest cell so empirical tables sum to exactly 1.
    out.tensor.cell[largest] += 1.0 - total;
    out.negmoments = negmoments(ids);
    return out;
}

NegativeMoments StatStore::negmoments(std::span<const int> ids) const {
    require(n_ > 0, ErrorCode::EmptyStore, "store holds no samples");
    const std::size_t k = find(ids);
    NegativeMoments nm;
    nm.ids = sets_[k];
    const std::size_t masks = std::size_t{1} << sets_[k].size();
    nm.value.resize(masks);
    for (std::size_t mask = 0; mask < masks; ++mask) {
        std::uint64_t absent = 0;
        for (std::size_t outcome = 0; outcome < masks; ++outcome)
            if ((outcome & mask) == 0)
                absent += counts_[k][outcome];
        nm.value[mask] = static_cast<double>(absent) / static_cast<double>(n_);
    }
    return nm;
}

StatStore StatStore::from_raw(std::uint64_t n, std::vector<std::vector<int>> sets,
                              std::vector<std::vector<std::uint64_t>> counts) {
    require(sets.size() == counts.size(), ErrorCode::InvalidArgument,
            "set and count lists differ in length");
    StatStore store;
    store.n_ = n;
    store.sets_ = std::move(sets);
    store.counts_.assign(store.sets_.size(), {});
    for (std::size_t k = 0; k < store.sets_.size(); ++k) {
        const auto& ids = store.sets_[k];
        require(!ids.empty() && ids.size() <= 3 && std::is_sorted(ids.begin(), ids.end()),
                ErrorCode::ParseError, "malformed set " + set_name(ids));
        const std::size_t cells = std::size_t{1} << ids.size();
        require(counts[k].size() == cells, ErrorCode::ParseError,
                "count table size mismatch for " + set_name(ids));
        std::uint64_t total = 0;
        for (std::size_t c = 0; c < cells; ++c) {
            store.counts_[k][c] = counts[k][c];
            total += counts[k][c];
        }
        require(total == n, ErrorCode::ParseError, "count table does not sum to N");
        auto [it, inserted] = store.index_.emplace(set_key(ids), k);
        require(inserted, ErrorCode::ParseError, "duplicate set " + set_name(ids));
    }
    return store;
}

}  // namespace noisyor
