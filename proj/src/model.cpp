#include "noisyor/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

namespace noisyor {

NetworkStructure NetworkStructure::from_edges(int n, int m,
                                              std::vector<std::pair<int, int>> edges) {
    require(n >= 0 && m >= 0, ErrorCode::InvalidArgument, "negative node count");
    NetworkStructure s;
    s.n_ = n;
    s.m_ = m;
    std::sort(edges.begin(), edges.end());
    for (std::size_t k = 0; k < edges.size(); ++k) {
        auto [i, j] = edges[k];
        require(i >= 0 && i < n, ErrorCode::IndexOutOfRange,
                "disease index " + std::to_string(i));
        require(j >= 0 && j < m, ErrorCode::IndexOutOfRange,
                "symptom index " + std::to_string(j));
        require(k == 0 || edges[k] != edges[k - 1], ErrorCode::InvalidArgument,
                "duplicate edge (" + std::to_string(i) + "," + std::to_string(j) + ")");
    }
    s.edges_ = std::move(edges);
    s.parents_.resize(static_cast<std::size_t>(m));
    s.children_.resize(static_cast<std::size_t>(n));
    s.edge_offset_.assign(static_cast<std::size_t>(n) + 1, 0);
    for (auto [i, j] : s.edges_) {
        s.parents_[static_cast<std::size_t>(j)].push_back(i);
        s.children_[static_cast<std::size_t>(i)].push_back(j);
    }
    for (auto& p : s.parents_)
        std::sort(p.begin(), p.end());
    std::size_t offset = 0;
    for (int i = 0; i < n; ++i) {
        s.edge_offset_[static_cast<std::size_t>(i)] = static_cast<int>(offset);
        offset += s.children_[static_cast<std::size_t>(i)].size();
    }
    s.edge_offset_[static_cast<std::size_t>(n)] = static_cast<int>(offset);
    return s;
}

std::span<const int> NetworkStructure::parents(int symptom) const {
    require(symptom >= 0 && symptom < m_, ErrorCode::IndexOutOfRange,
            "symptom index " + std::to_string(symptom));
    return parents_[static_cast<std::size_t>(symptom)];
}

std::span<const int> NetworkStructure::children(int disease) const {
    require(disease >= 0 && disease < n_, ErrorCode::IndexOutOfRange,
            "disease index " + std::to_string(disease));
    return children_[static_cast<std::size_t>(disease)];
}

int NetworkStructure::edge_index(int disease, int symptom) const {
    if (disease < 0 || disease >= n_)
        return -1;
    const auto& kids = children_[static_cast<std::size_t>(disease)];
    auto it = std::lower_bound(kids.begin(), kids.end(), symptom);
    if (it == kids.end() || *it != symptom)
        return -1;
    return edge_offset_[static_cast<std::size_t>(disease)] +
           static_cast<int>(it - kids.begin());
}

double influence(const NetworkStructure& s, const NoisyOrParameters& params, int disease,
                 std::span<const int> symptoms) {
    require(!symptoms.empty(), ErrorCode::EmptySymptomSet, "influence of empty set");
    if (disease == kNoiseParent) {
        double prod = 1.0;
        for (int j : symptoms) {
            require(j >= 0 && j < s.symptom_count(), ErrorCode::IndexOutOfRange,
                    "symptom index " + std::to_string(j));
            prod *= 1.0 - params.leaks[static_cast<std::size_t>(j)];
        }
        return prod;
    }
    require(disease >= 0 && disease < s.disease_count(), ErrorCode::IndexOutOfRange,
            "disease index " + std::to_string(disease));
    double prod = 1.0;
    for (int j : symptoms)
        prod *= params.failure(s, disease, j);
    double p = params.priors[static_cast<std::size_t>(disease)];
    return 1.0 - p + p * prod;
}

double negative_moment_exact(const NetworkStructure& s, const NoisyOrParameters& params,
                             std::span<const int> symptoms) {
    require(!symptoms.empty(), ErrorCode::EmptySymptomSet, "negative moment of empty set");
    double value = influence(s, params, kNoiseParent, symptoms);
    // Only parents of some symptom in the set contribute a factor != 1.
    for (int j : symptoms) {
        for (int i : s.parents(j)) {
            // Count each disease once: attribute it to its first symptom in the set.
            bool first = true;
            for (int j2 : symptoms) {
                if (j2 == j)
                    break;
                if (s.has_edge(i, j2)) {
                    first = false;
                    break;
                }
            }
            if (first)
                value *= influence(s, params, i, symptoms);
        }
    }
    return value;
}

NegativeMoments negative_moments_exact(const NetworkStructure& s, const NoisyOrParameters& params,
                                       std::span<const int> symptoms) {
    require(!symptoms.empty(), ErrorCode::EmptySymptomSet, "negative moments of empty set");
    NegativeMoments nm;
    nm.ids.assign(symptoms.begin(), symptoms.end());
    const std::size_t masks = std::size_t{1} << symptoms.size();
    nm.value.assign(masks, 1.0);
    std::vector<int> subset;
    for (std::size_t mask = 1; mask < masks; ++mask) {
        subset.clear();
        for (std::size_t b = 0; b < symptoms.size(); ++b)
            if (mask & (std::size_t{1} << b))
                subset.push_back(symptoms[b]);
        nm.value[mask] = negative_moment_exact(s, params, subset);
    }
    return nm;
}

JointTensor joint_exact(const NetworkStructure& s, const NoisyOrParameters& params,
                        std::span<const int> symptoms) {
    require(symptoms.size() >= 1 && symptoms.size() <= 3, ErrorCode::TensorOrderCap,
            "joint tensors are capped at order 3");
    return joint_from_negmoments(negative_moments_exact(s, params, symptoms), 1e-9);
}

JointTensor joint_from_negmoments(const NegativeMoments& nm, double negative_cell_tol) {
    const std::size_t k = nm.ids.size();
    require(k >= 1 && k <= 3, ErrorCode::TensorOrderCap, "joint tensors are capped at order 3");
    require(nm.value.size() == (std::size_t{1} << k), ErrorCode::InvalidArgument,
            "negative moments must cover the full power set");
    JointTensor t;
    t.ids = nm.ids;
    const std::size_t cells = std::size_t{1} << k;
    t.cell.assign(cells, 0.0);
    const std::size_t full = cells - 1;
    for (std::size_t pattern = 0; pattern < cells; ++pattern) {
        const std::size_t absent = full & ~pattern;
        double sum = 0.0;
        // Supersets of `absent` are absent | w for w a subset of `pattern`.
        std::size_t w = pattern;
        for (;;) {
            const int sign = (std::popcount(w) & 1) ? -1 : 1;
            sum += sign * nm.value[absent | w];
            if (w == 0)
                break;
            w = (w - 1) & pattern;
        }
        if (sum < 0.0) {
            require(sum >= -negative_cell_tol, ErrorCode::NegativeTensorEntry,
                    "joint cell " + std::to_string(pattern) + " = " + std::to_string(sum));
            sum = 0.0;
        }
        t.cell[pattern] = sum;
    }
    return t;
}

NegativeMoments joint_to_negmoments(const JointTensor& t) {
    const std::size_t k = t.ids.size();
    require(k >= 1 && k <= 3, ErrorCode::TensorOrderCap, "joint tensors are capped at order 3");
    require(t.cell.size() == (std::size_t{1} << k), ErrorCode::InvalidArgument,
            "tensor cell count mismatch");
    NegativeMoments nm;
    nm.ids = t.ids;
    const std::size_t masks = std::size_t{1} << k;
    nm.value.assign(masks, 0.0);
    for (std::size_t mask = 0; mask < masks; ++mask) {
        double sum = 0.0;
        for (std::size_t pattern = 0; pattern < masks; ++pattern)
            if ((pattern & mask) == 0)
                sum += t.cell[pattern];
        nm.value[mask] = sum;
    }
    nm.value[0] = 1.0;
    return nm;
}

NetworkDiagnostics diagnostics(const NetworkStructure& s, const NoisyOrParameters& params) {
    NetworkDiagnostics d;
    d.p_min = 1.0;
    d.p_max = 0.0;
    for (double p : params.priors) {
        d.p_min = std::min(d.p_min, p);
        d.p_max = std::max(d.p_max, p);
    }
    d.f_max = 0.0;
    for (double f : params.failures)
        d.f_max = std::max(d.f_max, f);
    d.min_absence = 1.0;
    d.max_in_degree = 0;
    for (int j = 0; j < s.symptom_count(); ++j) {
        const int one[] = {j};
        d.min_absence = std::min(d.min_absence, negative_moment_exact(s, params, one));
        d.max_in_degree = std::max(d.max_in_degree, static_cast<int>(s.parents(j).size()));
    }
    return d;
}

}  // namespace noisyor
