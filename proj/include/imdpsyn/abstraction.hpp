#pragma once

#include "imdpsyn/dynamics.hpp"
#include "imdpsyn/geometry.hpp"
#include "imdpsyn/partition.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace imdpsyn {

using ActionId = std::int32_t;

/** Family of backward reachable sets sharing one constraint matrix.
 *
 * Every backward set of a run is the preimage of the same input polytope under
 * a map that depends on the target point only through the offset:
 *     R^-1(d) = { x : C x <= base + W d }.
 * Keeping (C, W, base) once and materializing per-action offsets makes the
 * region-containment sweep a dense matrix comparison instead of a polytope
 * rebuild per action.
 */
struct BackwardFamily {
    Eigen::MatrixXd constraint;   // rows x n
    Eigen::MatrixXd target_gain;  // rows x n, offset(d) = base_offset + target_gain * d
    Eigen::VectorXd base_offset;

    Eigen::VectorXd offset(const Eigen::VectorXd& d) const { return base_offset + target_gain * d; }

    HalfspacePolytope polytope(const Eigen::VectorXd& d) const {
        return HalfspacePolytope(constraint, offset(d));
    }
};

/// Open-loop family: {x : G B^-1 (d - A x) <= g}.
inline BackwardFamily backward_family_single(const LinearSystem& sys) {
    if (!is_invertible(sys.B))
        throw std::invalid_argument("backward sets require an invertible input matrix");
    const Eigen::MatrixXd Binv = sys.B.inverse();
    const Eigen::MatrixXd GBinv = sys.input_set.constraint_matrix * Binv;
    BackwardFamily f;
    f.constraint = -(GBinv * sys.A);
    f.target_gain = -GBinv;
    f.base_offset = sys.input_set.offset;
    return f;
}

/** Closed-loop family for the two-layer scheme.
 *
 * With u'(x) = B^-1 (d - A_cl x), conjoins the total-input constraint
 * G(-K x + u'(x)) <= g with the abstract-input constraint G' u'(x) <= h'.
 * With K = 0 and an unconstrained U' this reproduces the open-loop family
 * rows bit for bit.
 */
inline BackwardFamily backward_family_two_layer(const StabilizedSystem& ssys) {
    const LinearSystem& sys = ssys.base;
    if (!is_invertible(sys.B))
        throw std::invalid_argument("backward sets require an invertible input matrix");
    if (!is_invertible(ssys.A_cl))
        throw std::invalid_argument("two-layer backward sets require an invertible closed-loop matrix");
    const Eigen::MatrixXd Binv = sys.B.inverse();
    const Eigen::MatrixXd GBinv = sys.input_set.constraint_matrix * Binv;
    const Eigen::MatrixXd GpBinv = ssys.abstract_input_set.constraint_matrix * Binv;
    const Eigen::Index q = sys.input_set.rows();
    const Eigen::Index qp = ssys.abstract_input_set.rows();
    const Eigen::Index n = sys.state_dim;

    BackwardFamily f;
    f.constraint.resize(q + qp, n);
    f.target_gain.resize(q + qp, n);
    f.base_offset.resize(q + qp);
    f.constraint.topRows(q) =
        -(GBinv * ssys.A_cl) - sys.input_set.constraint_matrix * ssys.K;
    f.target_gain.topRows(q) = -GBinv;
    f.base_offset.head(q) = sys.input_set.offset;
    if (qp > 0) {
        f.constraint.bottomRows(qp) = -(GpBinv * ssys.A_cl);
        f.target_gain.bottomRows(qp) = -GpBinv;
        f.base_offset.tail(qp) = ssys.abstract_input_set.offset;
    }
    return f;
}

inline HalfspacePolytope backward_set_single(const LinearSystem& sys, const Eigen::VectorXd& d) {
    return backward_family_single(sys).polytope(d);
}

inline HalfspacePolytope backward_set_two_layer(const StabilizedSystem& ssys,
                                                const Eigen::VectorXd& d) {
    return backward_family_two_layer(ssys).polytope(d);
}

/// One abstract action per non-sink region, targeting the region center.
struct ActionSet {
    std::vector<Eigen::VectorXd> targets;
    BackwardFamily family;
    // enabled[s] lists the action ids whose backward set contains region s,
    // ascending; the sink entry is always empty.
    std::vector<std::vector<ActionId>> enabled;

    std::size_t action_count() const { return targets.size(); }

    std::int64_t enabled_pair_count() const {
        std::int64_t total = 0;
        for (const auto& row : enabled) total += static_cast<std::int64_t>(row.size());
        return total;
    }
};

/// Spec-level containment sweep over explicit polytopes (one per action).
inline std::vector<std::vector<ActionId>> enabled_actions(
    const Partition& part, const std::vector<HalfspacePolytope>& backward_sets) {
    std::vector<std::vector<ActionId>> enabled(part.location_count());
    for (LocationId s = 0; s < part.region_count(); ++s) {
        const HyperRectangle r = part.region(s);
        for (std::size_t a = 0; a < backward_sets.size(); ++a)
            if (rect_inside_polytope(r, backward_sets[a]))
                enabled[s].push_back(static_cast<ActionId>(a));
    }
    return enabled;
}

/** Builds the action set for a backward family.
 *
 * Containment of region s in R^-1(d_a) is equivalent to
 *     max over vertices v of s of (C v)_i  <=  offset(d_a)_i   for all rows i,
 * so the per-region vertex maxima are computed once and compared against every
 * action's offset vector.
 */
inline ActionSet build_action_set(const Partition& part, BackwardFamily family) {
    ActionSet as;
    as.family = std::move(family);
    const Eigen::Index rows = as.family.constraint.rows();
    const LocationId nreg = part.region_count();

    as.targets.reserve(nreg);
    for (LocationId a = 0; a < nreg; ++a) as.targets.push_back(part.region_center(a));

    as.enabled.assign(part.location_count(), {});
    if (rows == 0) {
        // unconstrained family: every action enabled in every region
        for (LocationId s = 0; s < nreg; ++s) {
            as.enabled[s].resize(nreg);
            for (LocationId a = 0; a < nreg; ++a) as.enabled[s][a] = static_cast<ActionId>(a);
        }
        return as;
    }

    // per-region row maxima over the 2^n vertices
    Eigen::MatrixXd rowmax(nreg, rows);
    const std::uint64_t nverts = std::uint64_t{1} << part.dim();
    for (LocationId s = 0; s < nreg; ++s) {
        const HyperRectangle r = part.region(s);
        Eigen::RowVectorXd mx =
            (as.family.constraint * r.vertex(0)).transpose();
        for (std::uint64_t m = 1; m < nverts; ++m)
            mx = mx.cwiseMax((as.family.constraint * r.vertex(m)).transpose());
        rowmax.row(s) = mx;
    }

    Eigen::MatrixXd offsets(nreg, rows);
    for (LocationId a = 0; a < nreg; ++a) offsets.row(a) = as.family.offset(as.targets[a]).transpose();

    for (LocationId s = 0; s < nreg; ++s) {
        for (LocationId a = 0; a < nreg; ++a) {
            bool ok = true;
            for (Eigen::Index i = 0; i < rows; ++i) {
                if (rowmax(s, i) > offsets(a, i) + kGeomTol) {
                    ok = false;
                    break;
                }
            }
            if (ok) as.enabled[s].push_back(static_cast<ActionId>(a));
        }
    }
    return as;
}

/// Goal and unsafe location labels. Disjoint by construction.
struct LabelSets {
    std::set<LocationId> goal;
    std::set<LocationId> unsafe;
};

/** Labels partition locations against unions of axis-aligned boxes.
 *
 * A region is a goal location iff it is contained in some goal box (closed
 * containment); it is unsafe iff its interior overlaps some avoid box. Shared
 * faces do not make a region unsafe. The sink is unsafe iff avoid_complement.
 * A location qualifying as both goal and unsafe is an error.
 */
inline LabelSets label_locations(const Partition& part,
                                 const std::vector<HyperRectangle>& goal_boxes,
                                 const std::vector<HyperRectangle>& avoid_boxes,
                                 bool avoid_complement) {
    LabelSets labels;
    for (LocationId s = 0; s < part.region_count(); ++s) {
        const HyperRectangle r = part.region(s);
        bool is_goal = false;
        for (const auto& g : goal_boxes) {
            if (g.dim() != part.dim())
                throw std::invalid_argument("label_locations: goal box dimension mismatch");
            bool inside = true;
            for (Eigen::Index i = 0; i < part.dim(); ++i)
                if (r.lower(i) < g.lower(i) - kGeomTol || r.upper(i) > g.upper(i) + kGeomTol) {
                    inside = false;
                    break;
                }
            if (inside) {
                is_goal = true;
                break;
            }
        }
        bool is_unsafe = false;
        for (const auto& u : avoid_boxes) {
            if (u.dim() != part.dim())
                throw std::invalid_argument("label_locations: avoid box dimension mismatch");
            bool overlaps = true;
            for (Eigen::Index i = 0; i < part.dim(); ++i) {
                const double lo = std::max(r.lower(i), u.lower(i));
                const double hi = std::min(r.upper(i), u.upper(i));
                if (hi - lo <= kGeomTol) {  // empty or face-only contact
                    overlaps = false;
                    break;
                }
            }
            if (overlaps) {
                is_unsafe = true;
                break;
            }
        }
        if (is_goal && is_unsafe)
            throw std::invalid_argument("label_locations: location " + std::to_string(s)
                                        + " matches both a goal box and an avoid box");
        if (is_goal) labels.goal.insert(s);
        if (is_unsafe) labels.unsafe.insert(s);
    }
    if (avoid_complement) labels.unsafe.insert(part.sink_id());
    return labels;
}

}  // namespace imdpsyn
