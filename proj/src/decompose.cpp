#include "noisyor/decompose.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace noisyor {

JointTensor MixtureResult::conditional_tensor(int z, const std::vector<int>& ids) const {
    require(z == 0 || z == 1, ErrorCode::InvalidArgument, "component must be 0 or 1");
    require(ids.size() == 3, ErrorCode::InvalidArgument, "need three symptom ids");
    const auto& cond = z == 0 ? cond0 : cond1;
    JointTensor t;
    t.ids = ids;
    t.cell.resize(8);
    for (std::size_t pattern = 0; pattern < 8; ++pattern) {
        double p = 1.0;
        for (int axis = 0; axis < 3; ++axis)
            p *= (pattern >> axis) & 1 ? 1.0 - cond[static_cast<std::size_t>(axis)]
                                       : cond[static_cast<std::size_t>(axis)];
        t.cell[pattern] = p;
    }
    return t;
}

namespace {

struct Mat2 {
    double a, b, c, d;  // row-major [[a, b], [c, d]]

    double det() const { return a * d - b * c; }
    double trace() const { return a + d; }

    /// Ratio of singular values, +inf for a singular matrix.
    double condition() const {
        const double f = a * a + b * b + c * c + d * d;
        const double det2 = det() * det();
        const double disc = std::max(f * f - 4.0 * det2, 0.0);
        const double s_max2 = 0.5 * (f + std::sqrt(disc));
        const double s_min2 = 0.5 * (f - std::sqrt(disc));
        if (s_min2 <= 0.0)
            return std::numeric_limits<double>::infinity();
        return std::sqrt(s_max2 / s_min2);
    }
};

/// Splits a (near) rank-1 2x2 matrix into u v^T, pivoting on the entry of
/// largest magnitude so the divisions stay away from zero.
void split_rank1(const Mat2& m, double u[2], double v[2]) {
    const double entries[2][2] = {{m.a, m.b}, {m.c, m.d}};
    int pr = 0, pc = 0;
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c)
            if (std::abs(entries[r][c]) > std::abs(entries[pr][pc])) {
                pr = r;
                pc = c;
            }
    const double pivot = entries[pr][pc];
    if (pivot == 0.0) {
        u[0] = u[1] = v[0] = v[1] = 0.0;
        return;
    }
    v[0] = entries[pr][0];
    v[1] = entries[pr][1];
    u[pr] = 1.0;
    u[1 - pr] = entries[1 - pr][pc] / pivot;
}

struct AxisAttempt {
    bool usable = false;
    ErrorCode blocker = ErrorCode::SingularSlice;
    double lambda1 = 0.0, lambda2 = 0.0;
    double error_score = 0.0;  // roundoff estimate: kappa^2 eps + eps / gap
    Mat2 x1{}, x2{};
};

/// A rank-1 tensor (single component, or a product of independent marginals)
/// has rank-1 unfoldings along every axis.
bool near_rank1(const JointTensor& t) {
    for (int axis = 0; axis < 3; ++axis) {
        double r0[4], r1[4];
        int k = 0;
        for (std::size_t pattern = 0; pattern < 8; ++pattern) {
            if ((pattern >> axis) & 1)
                continue;
            r0[k] = t.cell[pattern];
            r1[k] = t.cell[pattern | (std::size_t{1} << axis)];
            ++k;
        }
        for (int i = 0; i < 4; ++i)
            for (int j = i + 1; j < 4; ++j)
                if (std::abs(r0[i] * r1[j] - r0[j] * r1[i]) > 1e-9)
                    return false;
    }
    return true;
}

/// Gauss-Newton polish of the seven mixture parameters against the observed
/// cells. The pencil initializer is accurate to eps over the slice's
/// conditioning; a couple of refinement steps push the error down to the
/// problem's own conditioning, which the 1e-9 recovery contract needs when
/// two components nearly coincide on one axis.
void refine_mixture(const JointTensor& t, double& prior, std::array<double, 3>& cond0,
                    std::array<double, 3>& cond1) {
    using Vec7 = Eigen::Matrix<double, 7, 1>;
    auto pack = [&]() {
        Vec7 theta;
        theta << prior, cond0[0], cond0[1], cond0[2], cond1[0], cond1[1], cond1[2];
        return theta;
    };
    auto residual_norm = [&](const Vec7& theta, Eigen::Matrix<double, 8, 1>& r,
                             Eigen::Matrix<double, 8, 7>* jacobian) {
        for (std::size_t pattern = 0; pattern < 8; ++pattern) {
            double p0 = 1.0, p1 = 1.0;
            for (int a = 0; a < 3; ++a) {
                const bool present = (pattern >> a) & 1;
                p0 *= present ? 1.0 - theta(1 + a) : theta(1 + a);
                p1 *= present ? 1.0 - theta(4 + a) : theta(4 + a);
            }
            const auto row = static_cast<Eigen::Index>(pattern);
            r(row) = (1.0 - theta(0)) * p0 + theta(0) * p1 - t.cell[pattern];
            if (!jacobian)
                continue;
            (*jacobian)(row, 0) = p1 - p0;
            for (int a = 0; a < 3; ++a) {
                const bool present = (pattern >> a) & 1;
                const double f0 = present ? 1.0 - theta(1 + a) : theta(1 + a);
                const double f1 = present ? 1.0 - theta(4 + a) : theta(4 + a);
                const double sign = present ? -1.0 : 1.0;
                (*jacobian)(row, 1 + a) =
                    f0 == 0.0 ? 0.0 : (1.0 - theta(0)) * sign * p0 / f0;
                (*jacobian)(row, 4 + a) = f1 == 0.0 ? 0.0 : theta(0) * sign * p1 / f1;
            }
        }
        return r.norm();
    };

    Vec7 theta = pack();
    Eigen::Matrix<double, 8, 1> r;
    Eigen::Matrix<double, 8, 7> jacobian;
    Vec7 best = theta;
    double best_norm = residual_norm(theta, r, &jacobian);
    for (int iter = 0; iter < 4 && best_norm > 1e-15; ++iter) {
        const Eigen::Matrix<double, 7, 7> gram = jacobian.transpose() * jacobian;
        const Vec7 step = gram.ldlt().solve(-jacobian.transpose() * r);
        if (!step.allFinite())
            break;
        theta += step;
        for (int k = 0; k < 7; ++k)
            theta(k) = std::clamp(theta(k), 0.0, 1.0);
        const double norm = residual_norm(theta, r, &jacobian);
        if (norm >= best_norm)
            break;
        best_norm = norm;
        best = theta;
    }
    prior = best(0);
    for (int a = 0; a < 3; ++a) {
        cond0[static_cast<std::size_t>(a)] = best(1 + a);
        cond1[static_cast<std::size_t>(a)] = best(4 + a);
    }
}

AxisAttempt try_axis(const JointTensor& t, int axis, const DecomposeOptions& options) {
    AxisAttempt attempt;
    const int other[2] = {axis == 0 ? 1 : 0, axis == 2 ? 1 : 2};
    auto cell = [&](std::size_t va, std::size_t vb, std::size_t vc) {
        const std::size_t pattern = (va << axis) | (vb << other[0]) | (vc << other[1]);
        return t.cell[pattern];
    };
    attempt.x1 = {cell(0, 0, 0), cell(0, 0, 1), cell(0, 1, 0), cell(0, 1, 1)};
    attempt.x2 = {cell(1, 0, 0), cell(1, 0, 1), cell(1, 1, 0), cell(1, 1, 1)};

    const double det1 = attempt.x1.det();
    if (det1 == 0.0 || attempt.x1.condition() > options.condition_limit) {
        attempt.blocker = ErrorCode::SingularSlice;
        return attempt;
    }
    // Y = X2 * X1^{-1}; its eigenvalues are the per-component odds
    // p(s_axis=1|z) / p(s_axis=0|z).
    const Mat2 inv1 = {attempt.x1.d / det1, -attempt.x1.b / det1, -attempt.x1.c / det1,
                       attempt.x1.a / det1};
    const Mat2 y = {attempt.x2.a * inv1.a + attempt.x2.b * inv1.c,
                    attempt.x2.a * inv1.b + attempt.x2.b * inv1.d,
                    attempt.x2.c * inv1.a + attempt.x2.d * inv1.c,
                    attempt.x2.c * inv1.b + attempt.x2.d * inv1.d};
    const double tr = y.trace();
    const double disc = tr * tr - 4.0 * y.det();
    if (disc < 0.0) {
        attempt.blocker = ErrorCode::DegenerateEigen;
        return attempt;
    }
    const double root = std::sqrt(disc);
    attempt.lambda1 = 0.5 * (tr + root);
    attempt.lambda2 = 0.5 * (tr - root);
    const double gap = std::abs(attempt.lambda1 - attempt.lambda2);
    if (gap < options.eigen_gap_tol) {
        attempt.blocker = ErrorCode::DegenerateEigen;
        return attempt;
    }
    // Pessimistic roundoff model (quadratic in the condition number): the
    // eigenvalue error feeds through the rank-1 split with another
    // conditioning factor.
    constexpr double kEps = 2.2e-16;
    const double kappa = attempt.x1.condition();
    attempt.error_score = kappa * kappa * kEps + kEps / gap;
    attempt.usable = true;
    return attempt;
}

}  // namespace

MixtureResult decompose_222(const JointTensor& t, const DecomposeOptions& options) {
    require(t.order() == 3 && t.cell.size() == 8, ErrorCode::TensorOrderCap,
            "decompose_222 needs a 2x2x2 tensor");

    // Pick the usable axis with the smallest roundoff estimate. A slice whose
    // rows are nearly parallel squares its condition number into the result,
    // so "first acceptable" is not good enough for 1e-9 recovery.
    AxisAttempt chosen;
    int axis = -1;
    ErrorCode blocker = ErrorCode::SingularSlice;
    for (int candidate = 0; candidate < 3; ++candidate) {
        AxisAttempt attempt = try_axis(t, candidate, options);
        if (attempt.usable) {
            if (axis < 0 || attempt.error_score < chosen.error_score) {
                chosen = attempt;
                axis = candidate;
            }
            continue;
        }
        // An eigenvalue problem that formed but degenerated is more
        // informative than an unusable slice.
        if (attempt.blocker == ErrorCode::DegenerateEigen)
            blocker = ErrorCode::DegenerateEigen;
    }
    if (axis < 0) {
        if (blocker == ErrorCode::SingularSlice && near_rank1(t))
            blocker = ErrorCode::DegenerateEigen;
        fail(blocker, blocker == ErrorCode::DegenerateEigen
                          ? "tensor is (near) rank 1: a single mixture component"
                          : "no slice with acceptable conditioning");
    }

    // Rank-1 remainders of the pencil: M_z = (X2 - lambda_other * X1) scaled
    // by the eigenvalue gap. Component z's unnormalized tensor is
    // u_z (x) v_z (x) (1, lambda_z).
    const double gap = chosen.lambda1 - chosen.lambda2;
    auto remainder = [&](double lambda_other, double sign_scale) {
        Mat2 m{};
        m.a = (chosen.x2.a - lambda_other * chosen.x1.a) * sign_scale;
        m.b = (chosen.x2.b - lambda_other * chosen.x1.b) * sign_scale;
        m.c = (chosen.x2.c - lambda_other * chosen.x1.c) * sign_scale;
        m.d = (chosen.x2.d - lambda_other * chosen.x1.d) * sign_scale;
        return m;
    };
    const Mat2 m1 = remainder(chosen.lambda2, 1.0 / gap);
    const Mat2 m2 = remainder(chosen.lambda1, -1.0 / gap);

    double u[2][2], v[2][2];
    split_rank1(m1, u[0], v[0]);
    split_rank1(m2, u[1], v[1]);
    const double lambda[2] = {chosen.lambda1, chosen.lambda2};

    const int other[2] = {axis == 0 ? 1 : 0, axis == 2 ? 1 : 2};
    double mass[2];
    double cond[2][3];  // absence probability per component per tensor axis
    for (int z = 0; z < 2; ++z) {
        const double su = u[z][0] + u[z][1];
        const double sv = v[z][0] + v[z][1];
        mass[z] = su * sv * (1.0 + lambda[z]);
        const bool degenerate = su == 0.0 || sv == 0.0 || 1.0 + lambda[z] == 0.0;
        cond[z][axis] = degenerate ? -1.0 : 1.0 / (1.0 + lambda[z]);
        cond[z][other[0]] = degenerate ? -1.0 : u[z][0] / su;
        cond[z][other[1]] = degenerate ? -1.0 : v[z][0] / sv;
    }

    const double total = mass[0] + mass[1];
    require(std::isfinite(total) && std::abs(total) > 1e-12, ErrorCode::OutOfRange,
            "component masses do not sum to a usable total");

    // Label so that component 0 has the larger conditional probability of all
    // symptoms absent.
    const double absent0 = cond[0][0] * cond[0][1] * cond[0][2];
    const double absent1 = cond[1][0] * cond[1][1] * cond[1][2];
    const int z0 = absent0 >= absent1 ? 0 : 1;
    const int z1 = 1 - z0;

    MixtureResult result;
    result.slice_axis = axis;
    result.prior = mass[z1] / total;

    const double lo = -options.range_tol;
    const double hi = 1.0 + options.range_tol;
    auto checked = [&](double value, const char* what) {
        require(std::isfinite(value) && value >= lo && value <= hi, ErrorCode::OutOfRange,
                std::string(what) + " = " + std::to_string(value) + " outside [0, 1]");
        return std::clamp(value, 0.0, 1.0);
    };
    result.prior = checked(result.prior, "mixture prior");
    for (int a = 0; a < 3; ++a) {
        result.cond0[static_cast<std::size_t>(a)] = checked(cond[z0][a], "conditional");
        result.cond1[static_cast<std::size_t>(a)] = checked(cond[z1][a], "conditional");
    }
    refine_mixture(t, result.prior, result.cond0, result.cond1);
    return result;
}

NoisyOrTriplet noisyor_from_mixture(const MixtureResult& mix) {
    NoisyOrTriplet out;
    out.prior = clip_param(mix.prior);
    for (std::size_t a = 0; a < 3; ++a) {
        require(mix.cond0[a] > 1e-12, ErrorCode::ZeroDenominator,
                "absence probability for Z=0 vanishes on axis " + std::to_string(a));
        out.failures[a] = clip_param(mix.cond1[a] / mix.cond0[a]);
    }
    return out;
}

}  // namespace noisyor
