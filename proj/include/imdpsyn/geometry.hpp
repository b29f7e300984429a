#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace imdpsyn {

/// Tolerance used for all halfspace membership tests. Boundary points are
/// inside; this keeps containment decisions stable when partition faces
/// coincide with backward-set faces.
inline constexpr double kGeomTol = 1e-9;

/** Convex polytope in halfspace representation, {x : C x <= d}.
 *
 * The representation may be empty or unbounded; no normalization is applied
 * to the rows. Rows must not be identically zero.
 */
struct HalfspacePolytope {
    Eigen::MatrixXd constraint_matrix;  // q x n
    Eigen::VectorXd offset;             // q

    HalfspacePolytope() = default;

    HalfspacePolytope(Eigen::MatrixXd C, Eigen::VectorXd d)
        : constraint_matrix(std::move(C)), offset(std::move(d)) {
        if (constraint_matrix.rows() != offset.size())
            throw std::invalid_argument("HalfspacePolytope: row count of constraint matrix ("
                                        + std::to_string(constraint_matrix.rows())
                                        + ") does not match offset size ("
                                        + std::to_string(offset.size()) + ")");
        for (Eigen::Index i = 0; i < constraint_matrix.rows(); ++i) {
            if (constraint_matrix.row(i).cwiseAbs().maxCoeff() == 0.0)
                throw std::invalid_argument("HalfspacePolytope: constraint row "
                                            + std::to_string(i) + " is identically zero");
        }
    }

    /// Axis-aligned box [lower_i, upper_i] as 2n halfspaces (x_i <= u_i, -x_i <= -l_i).
    static HalfspacePolytope box(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
        if (lower.size() != upper.size())
            throw std::invalid_argument("HalfspacePolytope::box: dimension mismatch");
        const Eigen::Index n = lower.size();
        Eigen::MatrixXd C = Eigen::MatrixXd::Zero(2 * n, n);
        Eigen::VectorXd d(2 * n);
        for (Eigen::Index i = 0; i < n; ++i) {
            C(2 * i, i) = 1.0;
            d(2 * i) = upper(i);
            C(2 * i + 1, i) = -1.0;
            d(2 * i + 1) = -lower(i);
        }
        return HalfspacePolytope(std::move(C), std::move(d));
    }

    /// Polytope with no constraints (all of R^n); used for an unconstrained
    /// abstract input set.
    static HalfspacePolytope unconstrained(Eigen::Index n) {
        HalfspacePolytope p;
        p.constraint_matrix = Eigen::MatrixXd::Zero(0, n);
        p.offset = Eigen::VectorXd::Zero(0);
        return p;
    }

    Eigen::Index dim() const { return constraint_matrix.cols(); }
    Eigen::Index rows() const { return constraint_matrix.rows(); }
};

/// Axis-aligned hyperrectangle. Degenerate intervals (lower_i == upper_i) are
/// allowed and behave as lower-dimensional boxes.
struct HyperRectangle {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;

    HyperRectangle() = default;

    HyperRectangle(Eigen::VectorXd lo, Eigen::VectorXd up)
        : lower(std::move(lo)), upper(std::move(up)) {
        if (lower.size() != upper.size())
            throw std::invalid_argument("HyperRectangle: dimension mismatch");
        for (Eigen::Index i = 0; i < lower.size(); ++i)
            if (!(lower(i) <= upper(i)))
                throw std::invalid_argument("HyperRectangle: lower(" + std::to_string(i)
                                            + ") exceeds upper");
    }

    Eigen::Index dim() const { return lower.size(); }
    Eigen::VectorXd center() const { return 0.5 * (lower + upper); }

    /// Vertex with index mask in [0, 2^n); bit i selects upper(i).
    Eigen::VectorXd vertex(std::uint64_t mask) const {
        Eigen::VectorXd v = lower;
        for (Eigen::Index i = 0; i < dim(); ++i)
            if ((mask >> i) & 1u) v(i) = upper(i);
        return v;
    }
};

/// Inclusive membership test: C x <= d + tol row-wise.
inline bool contains_point(const HalfspacePolytope& p, const Eigen::VectorXd& x,
                           double tol = kGeomTol) {
    if (x.size() != p.dim())
        throw std::invalid_argument("contains_point: point dimension "
                                    + std::to_string(x.size()) + " does not match polytope "
                                    + std::to_string(p.dim()));
    if (p.rows() == 0) return true;
    return ((p.constraint_matrix * x - p.offset).array() <= tol).all();
}

/** Exact containment of a hyperrectangle in a convex polytope.
 *
 * All 2^n vertices are tested; by convexity this decides containment of the
 * whole rectangle. Dimension is capped to keep vertex enumeration bounded.
 */
inline bool rect_inside_polytope(const HyperRectangle& r, const HalfspacePolytope& p,
                                 double tol = kGeomTol) {
    if (r.dim() != p.dim())
        throw std::invalid_argument("rect_inside_polytope: dimension mismatch");
    if (r.dim() > 12)
        throw std::invalid_argument("rect_inside_polytope: dimension "
                                    + std::to_string(r.dim()) + " exceeds vertex-enumeration cap of 12");
    const std::uint64_t nverts = std::uint64_t{1} << r.dim();
    for (std::uint64_t m = 0; m < nverts; ++m)
        if (!contains_point(p, r.vertex(m), tol)) return false;
    return true;
}

/** Preimage of a polytope under the affine map x -> M x + b.
 *
 * Returns {x : C (M x + b) <= d} = (C M, d - C b). Rows of C M may become
 * zero for rank-deficient M; that is rejected by the polytope constructor.
 */
inline HalfspacePolytope affine_preimage(const HalfspacePolytope& p, const Eigen::MatrixXd& M,
                                         const Eigen::VectorXd& b) {
    if (M.rows() != p.dim() || b.size() != p.dim())
        throw std::invalid_argument("affine_preimage: map output dimension does not match polytope");
    return HalfspacePolytope(p.constraint_matrix * M, p.offset - p.constraint_matrix * b);
}

}  // namespace imdpsyn
