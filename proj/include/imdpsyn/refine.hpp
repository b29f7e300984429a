#pragma once

#include "imdpsyn/dynamics.hpp"
#include "imdpsyn/imdp.hpp"
#include "imdpsyn/partition.hpp"
#include "imdpsyn/scenario.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace imdpsyn {

/// Continuous reach-avoid property: goal and avoid sets as unions of boxes,
/// with the domain complement optionally unsafe.
struct ReachAvoidProperty {
    std::vector<HyperRectangle> goal_boxes;
    std::vector<HyperRectangle> avoid_boxes;
    bool avoid_complement = true;
    int horizon = 0;

    /// Goal membership is inclusive with tolerance; shared goal/avoid
    /// boundaries resolve to goal.
    bool in_goal(const Eigen::VectorXd& x) const {
        for (const auto& b : goal_boxes) {
            bool inside = true;
            for (Eigen::Index i = 0; i < b.dim(); ++i)
                if (x(i) < b.lower(i) - kGeomTol || x(i) > b.upper(i) + kGeomTol) {
                    inside = false;
                    break;
                }
            if (inside) return true;
        }
        return false;
    }

    bool in_avoid(const Eigen::VectorXd& x, const HyperRectangle& domain) const {
        for (const auto& b : avoid_boxes) {
            bool inside = true;
            for (Eigen::Index i = 0; i < b.dim(); ++i)
                if (x(i) < b.lower(i) || x(i) > b.upper(i)) {
                    inside = false;
                    break;
                }
            if (inside) return true;
        }
        if (avoid_complement) {
            for (Eigen::Index i = 0; i < domain.dim(); ++i)
                if (x(i) < domain.lower(i) || x(i) > domain.upper(i)) return true;
        }
        return false;
    }
};

/** Piecewise-affine realization of an iMDP policy.
 *
 * Single layer: u = B^-1 (d_a - A x). Two layer: u' = B^-1 (d_a - A_cl x) and
 * u = -K x + u'. In both modes the noiseless successor of a state where action
 * a is taken is exactly d_a.
 */
struct RefinedController {
    enum class Mode { kSingleLayer, kTwoLayer };

    Policy policy;
    Partition partition;
    std::vector<Eigen::VectorXd> targets;
    Mode mode = Mode::kSingleLayer;
    Eigen::MatrixXd effective_A;  // A in single-layer mode, A_cl in two-layer mode
    Eigen::MatrixXd B_inverse;
    Eigen::MatrixXd K;  // two-layer only
    HalfspacePolytope input_set;
    HalfspacePolytope abstract_input_set;  // two-layer only

    static RefinedController single_layer(Policy pol, Partition part,
                                          std::vector<Eigen::VectorXd> targets,
                                          const LinearSystem& sys) {
        RefinedController c;
        c.policy = std::move(pol);
        c.partition = std::move(part);
        c.targets = std::move(targets);
        c.mode = Mode::kSingleLayer;
        c.effective_A = sys.A;
        c.B_inverse = sys.B.inverse();
        c.input_set = sys.input_set;
        return c;
    }

    static RefinedController two_layer(Policy pol, Partition part,
                                       std::vector<Eigen::VectorXd> targets,
                                       const StabilizedSystem& ssys) {
        RefinedController c;
        c.policy = std::move(pol);
        c.partition = std::move(part);
        c.targets = std::move(targets);
        c.mode = Mode::kTwoLayer;
        c.effective_A = ssys.A_cl;
        c.B_inverse = ssys.base.B.inverse();
        c.K = ssys.K;
        c.input_set = ssys.base.input_set;
        c.abstract_input_set = ssys.abstract_input_set;
        return c;
    }
};

struct ControlDecision {
    bool ok = false;  // false: no enabled action at (location, step)
    Eigen::VectorXd input;           // total input u
    Eigen::VectorXd abstract_input;  // u' in two-layer mode, empty otherwise
    ActionId action = Policy::kNoAction;
};

/** Evaluates the refined feedback law at state x and time step k.
 *
 * Returns a failed decision if x maps to the sink or the policy has no action
 * there. Input admissibility is guaranteed by the enabling containment; a
 * violation indicates an abstraction bug and throws.
 */
inline ControlDecision refine_control(const RefinedController& ctrl, const Eigen::VectorXd& x,
                                      int k) {
    if (k < 0 || k >= ctrl.policy.horizon())
        throw std::invalid_argument("refine_control: time step out of range");
    ControlDecision dec;
    const LocationId s = ctrl.partition.locate(x);
    if (s == ctrl.partition.sink_id()) return dec;
    const ActionId a = ctrl.policy.at(s, k);
    if (a == Policy::kNoAction) return dec;
    dec.action = a;
    const Eigen::VectorXd& d = ctrl.targets[a];
    if (ctrl.mode == RefinedController::Mode::kSingleLayer) {
        dec.input = ctrl.B_inverse * (d - ctrl.effective_A * x);
        if (!contains_point(ctrl.input_set, dec.input))
            throw std::logic_error("refine_control: refined input escapes the admissible set");
    } else {
        dec.abstract_input = ctrl.B_inverse * (d - ctrl.effective_A * x);
        dec.input = -ctrl.K * x + dec.abstract_input;
        if (!contains_point(ctrl.input_set, dec.input))
            throw std::logic_error("refine_control: total input escapes the admissible set");
        if (!contains_point(ctrl.abstract_input_set, dec.abstract_input))
            throw std::logic_error("refine_control: abstract input escapes its admissible set");
    }
    dec.ok = true;
    return dec;
}

struct TrajectoryRecord {
    enum class Outcome { kSatisfied, kUnsafeHit, kTimeout, kNoEnabledAction };

    std::vector<Eigen::VectorXd> states;
    std::vector<Eigen::VectorXd> inputs;
    Outcome outcome = Outcome::kTimeout;
    std::optional<int> first_goal_step;
};

inline const char* outcome_name(TrajectoryRecord::Outcome o) {
    switch (o) {
        case TrajectoryRecord::Outcome::kSatisfied: return "satisfied";
        case TrajectoryRecord::Outcome::kUnsafeHit: return "unsafe-hit";
        case TrajectoryRecord::Outcome::kTimeout: return "timeout";
        case TrajectoryRecord::Outcome::kNoEnabledAction: return "no-enabled-action";
    }
    return "?";
}

/** Closed-loop rollout over the effective (possibly grouped) dynamics.
 *
 * At every step, goal membership is checked before unsafe membership
 * (including at k = 0); the run stops at the first decisive event. Noise draw
 * k of a run is sample(stream(seed, simulation tag), k).
 */
inline TrajectoryRecord simulate(const LinearSystem& sys, const RefinedController& ctrl,
                                 const ReachAvoidProperty& prop, const Eigen::VectorXd& x0,
                                 std::uint64_t seed) {
    TrajectoryRecord rec;
    const RandomStream stream(seed, kTagSimulation);
    Eigen::VectorXd x = x0;
    rec.states.push_back(x);
    const int H = prop.horizon;
    for (int k = 0;; ++k) {
        if (prop.in_goal(x)) {
            rec.outcome = TrajectoryRecord::Outcome::kSatisfied;
            rec.first_goal_step = k;
            return rec;
        }
        if (prop.in_avoid(x, ctrl.partition.domain())) {
            rec.outcome = TrajectoryRecord::Outcome::kUnsafeHit;
            return rec;
        }
        if (k == H) {
            rec.outcome = TrajectoryRecord::Outcome::kTimeout;
            return rec;
        }
        const ControlDecision dec = refine_control(ctrl, x, k);
        if (!dec.ok) {
            rec.outcome = TrajectoryRecord::Outcome::kNoEnabledAction;
            return rec;
        }
        rec.inputs.push_back(dec.input);
        const Eigen::VectorXd eta = sys.noise.sample(stream, static_cast<std::uint64_t>(k));
        x = sys.A * x + sys.B * dec.input + eta;
        rec.states.push_back(x);
    }
}

struct MonteCarloReport {
    std::int64_t runs = 0;
    std::int64_t success_count = 0;
    double empirical_rate = 0.0;
    double rate_lower = 0.0;
    double rate_upper = 1.0;
    double imdp_lower_bound = 0.0;
};

/// M independent rollouts with sub-seeds seed + i; the 99% two-sided rate
/// interval reuses the scenario binomial solvers with beta_side = 0.005.
inline MonteCarloReport monte_carlo(const LinearSystem& sys, const RefinedController& ctrl,
                                    const ReachAvoidProperty& prop, const Eigen::VectorXd& x0,
                                    std::int64_t runs, std::uint64_t seed,
                                    double imdp_lower_bound = 0.0) {
    if (runs < 1) throw std::invalid_argument("monte_carlo: runs must be >= 1");
    MonteCarloReport rep;
    rep.runs = runs;
    rep.imdp_lower_bound = imdp_lower_bound;
    for (std::int64_t i = 0; i < runs; ++i) {
        const TrajectoryRecord rec = simulate(sys, ctrl, prop, x0, seed + static_cast<std::uint64_t>(i));
        if (rec.outcome == TrajectoryRecord::Outcome::kSatisfied) ++rep.success_count;
    }
    rep.empirical_rate = static_cast<double>(rep.success_count) / static_cast<double>(runs);
    rep.rate_lower = binomial_lower(runs, rep.success_count, 0.005);
    rep.rate_upper = binomial_upper(runs, rep.success_count, 0.005);
    return rep;
}

}  // namespace imdpsyn
