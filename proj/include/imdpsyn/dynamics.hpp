#pragma once

#include "imdpsyn/geometry.hpp"
#include "imdpsyn/noise.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace imdpsyn {

/// Discrete-time stochastic linear system x+ = A x + B u + eta, u constrained
/// to the polytope input_set.
struct LinearSystem {
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
    int state_dim = 0;
    int input_dim = 0;
    HalfspacePolytope input_set;
    NoiseSource noise;
    int group_steps = 1;  // 1 for the plain system; m after group_dynamics
};

/// Closed-loop system under u = -K x + u' with abstract input set U'.
struct StabilizedSystem {
    LinearSystem base;
    Eigen::MatrixXd K;
    Eigen::MatrixXd A_cl;
    HalfspacePolytope abstract_input_set;
};

struct LQRWeights {
    Eigen::MatrixXd Q;
    Eigen::MatrixXd R;
};

inline double spectral_radius(const Eigen::MatrixXd& M) {
    return Eigen::EigenSolver<Eigen::MatrixXd>(M, /*computeEigenvectors=*/false)
        .eigenvalues()
        .cwiseAbs()
        .maxCoeff();
}

inline bool is_invertible(const Eigen::MatrixXd& M) {
    return M.rows() == M.cols() && Eigen::FullPivLU<Eigen::MatrixXd>(M).isInvertible();
}

/// Kalman rank test: rank [B AB ... A^(n-1)B] == n, with singular values below
/// 1e-9 * sigma_max treated as zero.
inline bool check_controllability(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    if (A.rows() != A.cols() || B.rows() != A.rows())
        throw std::invalid_argument("check_controllability: incompatible dimensions");
    const Eigen::Index n = A.rows();
    const Eigen::Index p = B.cols();
    Eigen::MatrixXd ctrb(n, n * p);
    Eigen::MatrixXd AkB = B;
    for (Eigen::Index k = 0; k < n; ++k) {
        ctrb.middleCols(k * p, p) = AkB;
        AkB = A * AkB;
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(ctrb);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) == 0.0) return false;
    const double thresh = 1e-9 * sv(0);
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > thresh) ++rank;
    return rank == n;
}

/** Infinite-horizon discrete Riccati solution by fixed-point iteration.
 *
 * Iterates P <- Q + A'PA - A'PB (R + B'PB)^-1 B'PA from P0 = Q until the
 * max-norm update falls below 1e-10 (at most 1e5 iterations), then returns
 * (P, K) with K = (R + B'PB)^-1 B'PA. The closed loop A - BK must be stable.
 */
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> solve_dare(const Eigen::MatrixXd& A,
                                                              const Eigen::MatrixXd& B,
                                                              const LQRWeights& weights) {
    if (A.rows() != A.cols() || B.rows() != A.rows())
        throw std::invalid_argument("solve_dare: incompatible A/B dimensions");
    if (weights.Q.rows() != A.rows() || weights.Q.cols() != A.cols())
        throw std::invalid_argument("solve_dare: Q must be n x n");
    if (weights.R.rows() != B.cols() || weights.R.cols() != B.cols())
        throw std::invalid_argument("solve_dare: R must be p x p");

    constexpr double tol = 1e-10;
    constexpr int max_iter = 100000;
    Eigen::MatrixXd P = weights.Q;
    for (int it = 0; it < max_iter; ++it) {
        const Eigen::MatrixXd BtPB = weights.R + B.transpose() * P * B;
        const Eigen::FullPivLU<Eigen::MatrixXd> lu(BtPB);
        if (!lu.isInvertible())
            throw std::runtime_error("solve_dare: R + B'PB is singular");
        const Eigen::MatrixXd K = lu.solve(B.transpose() * P * A);
        const Eigen::MatrixXd Pn = weights.Q + A.transpose() * P * (A - B * K);
        const double delta = (Pn - P).cwiseAbs().maxCoeff();
        P = Pn;
        if (delta < tol) {
            const Eigen::MatrixXd Kf =
                Eigen::FullPivLU<Eigen::MatrixXd>(weights.R + B.transpose() * P * B)
                    .solve(B.transpose() * P * A);
            if (spectral_radius(A - B * Kf) >= 1.0)
                throw std::runtime_error("solve_dare: converged gain does not stabilize the system");
            return {P, Kf};
        }
    }
    throw std::runtime_error("solve_dare: no convergence within 100000 iterations");
}

/// Outcome of the gain admissibility check. ok() is true when -K v lies in U
/// for every vertex v of the state region and A - BK is invertible.
struct GainValidation {
    bool admissible = false;
    std::string message;

    bool ok() const { return admissible; }
};

inline GainValidation validate_gain(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                    const Eigen::MatrixXd& K, const HyperRectangle& state_region,
                                    const HalfspacePolytope& input_set) {
    if (K.cols() != state_region.dim() || K.rows() != input_set.dim())
        throw std::invalid_argument("validate_gain: gain dimensions do not match state region / input set");
    GainValidation v;
    const std::uint64_t nverts = std::uint64_t{1} << state_region.dim();
    for (std::uint64_t m = 0; m < nverts; ++m) {
        const Eigen::VectorXd vert = state_region.vertex(m);
        if (!contains_point(input_set, -K * vert)) {
            std::string coords;
            for (Eigen::Index i = 0; i < vert.size(); ++i)
                coords += (i ? ", " : "") + std::to_string(vert(i));
            v.message = "stabilizing gain drives the input outside the admissible set at state-region vertex ("
                        + coords + ")";
            return v;
        }
    }
    if (!is_invertible(A - B * K)) {
        v.message = "closed-loop matrix A - BK is singular";
        return v;
    }
    v.admissible = true;
    return v;
}

/** m-step grouping for under-actuated systems.
 *
 * Produces x_{k+m} = A^m x_k + [A^(m-1)B ... AB B] (u_k, ..., u_{k+m-1}) + lumped
 * noise, with the input set stacked blockwise. Requires m * p == n so the
 * grouped input matrix is square, and the result must be invertible.
 */
inline LinearSystem group_dynamics(const LinearSystem& sys, int m) {
    if (m < 1) throw std::invalid_argument("group_dynamics: m must be >= 1");
    if (m == 1) return sys;
    if (m * sys.input_dim != sys.state_dim)
        throw std::invalid_argument("group_dynamics: m * input_dim ("
                                    + std::to_string(m * sys.input_dim)
                                    + ") must equal state_dim (" + std::to_string(sys.state_dim) + ")");

    const int n = sys.state_dim;
    const int p = sys.input_dim;
    LinearSystem g;
    g.state_dim = n;
    g.input_dim = n;  // m * p
    g.group_steps = sys.group_steps * m;

    // A^m and [A^(m-1)B ... AB B]
    g.B = Eigen::MatrixXd(n, n);
    Eigen::MatrixXd AkB = sys.B;
    for (int j = m - 1; j >= 0; --j) {
        g.B.middleCols(j * p, p) = AkB;
        AkB = sys.A * AkB;
    }
    g.A = Eigen::MatrixXd::Identity(n, n);
    for (int j = 0; j < m; ++j) g.A = sys.A * g.A;

    if (!is_invertible(g.B))
        throw std::invalid_argument("group_dynamics: grouped input matrix is singular");

    // block-diagonal stacking of U
    const Eigen::Index q = sys.input_set.rows();
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(q * m, n);
    Eigen::VectorXd d(q * m);
    for (int j = 0; j < m; ++j) {
        C.block(j * q, j * p, q, p) = sys.input_set.constraint_matrix;
        d.segment(j * q, q) = sys.input_set.offset;
    }
    g.input_set = HalfspacePolytope(std::move(C), std::move(d));
    g.noise = NoiseSource::grouped(sys.noise, sys.A, m);
    return g;
}

/** Wraps a validated stabilizing gain around the (possibly grouped) system.
 *
 * Preconditions: validate_gain passed for the configured state region, the
 * abstract input set contains the origin, and A - BK is invertible.
 */
inline StabilizedSystem make_stabilized(const LinearSystem& sys, const Eigen::MatrixXd& K,
                                        HalfspacePolytope abstract_input_set,
                                        const HyperRectangle& state_region) {
    const GainValidation v = validate_gain(sys.A, sys.B, K, state_region, sys.input_set);
    if (!v.ok()) throw std::invalid_argument("make_stabilized: " + v.message);
    if (abstract_input_set.dim() != sys.input_dim)
        throw std::invalid_argument("make_stabilized: abstract input set dimension mismatch");
    if (!contains_point(abstract_input_set, Eigen::VectorXd::Zero(sys.input_dim)))
        throw std::invalid_argument("make_stabilized: abstract input set must contain the origin");
    StabilizedSystem s;
    s.base = sys;
    s.K = K;
    s.A_cl = sys.A - sys.B * K;
    s.abstract_input_set = std::move(abstract_input_set);
    return s;
}

}  // namespace imdpsyn
