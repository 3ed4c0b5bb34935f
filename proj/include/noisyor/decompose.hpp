#pragma once

#include <array>

#include "noisyor/model.hpp"

namespace noisyor {

/// Two-component product mixture recovered from a 2x2x2 joint table. cond0 and
/// cond1 hold the per-axis absence probabilities p(S = 0 | Z); component 0 is
/// the one with the larger conditional probability of all three symptoms being
/// absent, matching the noisy-or ordering of the states.
struct MixtureResult {
    double prior = 0.0;              // p(Z = 1)
    std::array<double, 3> cond0{};   // p(S_axis = 0 | Z = 0)
    std::array<double, 3> cond1{};   // p(S_axis = 0 | Z = 1)
    int slice_axis = 0;              // axis used for the matrix pencil

    /// Rank-1 conditional tensor p(s_0, s_1, s_2 | Z = z).
    JointTensor conditional_tensor(int z, const std::vector<int>& ids) const;
};

struct DecomposeOptions {
    double eigen_gap_tol = 1e-6;   // |lambda1 - lambda2| below this is degenerate
    double condition_limit = 1e6;  // reject slices with worse 2x2 condition numbers
    double range_tol = 1e-3;       // probabilities outside [-tol, 1+tol] are errors
};

/// Closed-form decomposition of a normalized 2x2x2 tensor generated by a
/// two-component product mixture: slice into a 2x2 matrix pencil, read the
/// component ratios off its eigenvalues, and split the rank-1 remainders.
/// Slicing axes are tried in ascending order; the first whose slice is well
/// conditioned and whose eigenvalue gap clears the tolerance wins.
///
/// Throws SingularSlice, DegenerateEigen or OutOfRange.
MixtureResult decompose_222(const JointTensor& t, const DecomposeOptions& options = {});

struct NoisyOrTriplet {
    double prior = 0.0;
    std::array<double, 3> failures{};
};

/// Mixture-to-noisy-or conversion: the coupling disease's prior is the mixture
/// prior and each failure is the ratio cond1/cond0 of absence probabilities,
/// clipped to [1e-6, 1 - 1e-6].
NoisyOrTriplet noisyor_from_mixture(const MixtureResult& mix);

inline constexpr double kParamFloor = 1e-6;
inline constexpr double kParamCeil = 1.0 - 1e-6;

inline double clip_param(double value) {
    return value < kParamFloor ? kParamFloor : (value > kParamCeil ? kParamCeil : value);
}

}  // namespace noisyor
