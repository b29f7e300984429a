#pragma once

#include "imdpsyn/abstraction.hpp"
#include "imdpsyn/scenario.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace imdpsyn {

/** Interval MDP over partition locations.
 *
 * Transition intervals are shared per action (see IntervalTable); the enabled
 * map assigns actions to locations. Unsafe locations are absorbing by
 * construction of the value recursion, so no explicit self-loops are stored.
 */
struct IMDP {
    std::int64_t locations = 0;
    std::vector<std::vector<ActionId>> enabled;
    IntervalTable intervals;
    LabelSets labels;
    int horizon = 0;
    std::int64_t transition_count = 0;
};

/// V[t][s] for time-to-go t = 0..H.
struct ValueTable {
    std::vector<std::vector<double>> values;

    int horizon() const { return static_cast<int>(values.size()) - 1; }
    const std::vector<double>& at_horizon() const { return values.back(); }
};

/// Deterministic time-varying policy; kNoAction marks locations where no
/// action is defined (goal, unsafe, or nothing enabled).
struct Policy {
    static constexpr ActionId kNoAction = -1;
    std::vector<std::vector<ActionId>> action;  // [time step k][location]

    int horizon() const { return static_cast<int>(action.size()); }

    ActionId at(LocationId s, int k) const { return action[k][s]; }
};

inline IMDP assemble_imdp(const Partition& part, std::vector<std::vector<ActionId>> enabled,
                          IntervalTable intervals, LabelSets labels, int horizon) {
    if (horizon < 1) throw std::invalid_argument("assemble_imdp: horizon must be >= 1");
    if (static_cast<std::int64_t>(enabled.size()) != part.location_count())
        throw std::invalid_argument("assemble_imdp: enabled map size does not match location count");
    if (!enabled[part.sink_id()].empty())
        throw std::invalid_argument("assemble_imdp: sink location must have no enabled actions");

    IMDP m;
    m.locations = part.location_count();
    m.horizon = horizon;

    const auto nact = static_cast<ActionId>(intervals.rows.size());
    for (LocationId s = 0; s < static_cast<LocationId>(enabled.size()); ++s)
        for (ActionId a : enabled[s])
            if (a < 0 || a >= nact)
                throw std::invalid_argument("assemble_imdp: enabled action id out of range at location "
                                            + std::to_string(s));

    // Def-4 feasibility per action row
    for (std::size_t a = 0; a < intervals.rows.size(); ++a) {
        double sum_lo = 0.0, sum_hi = 0.0;
        for (const auto& e : intervals.rows[a]) {
            if (e.lower < -1e-12 || e.upper > 1.0 + 1e-12 || e.lower > e.upper + 1e-12)
                throw std::invalid_argument("assemble_imdp: malformed interval for action "
                                            + std::to_string(a));
            if (e.successor < 0 || e.successor >= m.locations)
                throw std::invalid_argument("assemble_imdp: successor id out of range for action "
                                            + std::to_string(a));
            sum_lo += e.lower;
            sum_hi += e.upper;
        }
        if (sum_lo > 1.0 + 1e-9 || sum_hi < 1.0 - 1e-9)
            throw std::invalid_argument("assemble_imdp: infeasible interval row for action "
                                        + std::to_string(a));
    }

    for (LocationId g : labels.goal)
        if (labels.unsafe.count(g))
            throw std::invalid_argument("assemble_imdp: location " + std::to_string(g)
                                        + " is labeled both goal and unsafe");

    std::int64_t transitions = 0;
    for (LocationId s = 0; s < static_cast<LocationId>(enabled.size()); ++s)
        for (ActionId a : enabled[s])
            transitions += static_cast<std::int64_t>(intervals.rows[a].size());
    m.transition_count = transitions;

    m.enabled = std::move(enabled);
    m.intervals = std::move(intervals);
    m.labels = std::move(labels);
    return m;
}

/** Worst-case expectation over the interval ambiguity set.
 *
 * Starts from the lower bounds and distributes the slack 1 - sum(lower) to
 * successors in ascending value order (ties by ascending location id), capping
 * each at its upper bound. The returned distribution attains the minimum.
 */
inline std::pair<double, std::vector<double>> inner_min_expectation(
    const std::vector<double>& values, const std::vector<IntervalEntry>& row) {
    const std::size_t k = row.size();
    std::vector<double> p(k);
    double slack = 1.0;
    for (std::size_t i = 0; i < k; ++i) {
        p[i] = row[i].lower;
        slack -= row[i].lower;
    }
    if (slack < -1e-9) throw std::invalid_argument("inner_min_expectation: infeasible row");
    if (slack < 0) slack = 0;

    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        const double vi = values[row[i].successor], vj = values[row[j].successor];
        if (vi != vj) return vi < vj;
        return row[i].successor < row[j].successor;
    });
    for (std::size_t idx : order) {
        if (slack <= 0) break;
        const double add = std::min(row[idx].upper - row[idx].lower, slack);
        p[idx] += add;
        slack -= add;
    }
    if (slack > 1e-9) throw std::invalid_argument("inner_min_expectation: infeasible row");
    double value = 0.0;
    for (std::size_t i = 0; i < k; ++i) value += p[i] * values[row[i].successor];
    return {value, std::move(p)};
}

/** Robust (max-min) time-bounded reach-avoid value iteration.
 *
 * V[0][s] = goal indicator; for t = 1..H, goal locations stay 1, unsafe stay
 * 0, locations without enabled actions stay 0, and otherwise
 *   V[t][s] = max over enabled a of inner_min_expectation(V[t-1], row(a)),
 * argmax ties resolved to the lowest action id. Because interval rows are
 * shared per action, each action's worst-case expectation is evaluated once
 * per layer. Policy(s, k) stores the argmax for time-to-go H - k.
 */
inline std::pair<ValueTable, Policy> robust_value_iteration(const IMDP& m) {
    const auto S = static_cast<std::size_t>(m.locations);
    const auto nact = m.intervals.rows.size();

    std::vector<char> is_goal(S, 0), is_unsafe(S, 0);
    for (LocationId s : m.labels.goal) is_goal[s] = 1;
    for (LocationId s : m.labels.unsafe) is_unsafe[s] = 1;

    ValueTable table;
    table.values.resize(m.horizon + 1, std::vector<double>(S, 0.0));
    for (std::size_t s = 0; s < S; ++s) table.values[0][s] = is_goal[s] ? 1.0 : 0.0;

    Policy policy;
    policy.action.resize(m.horizon, std::vector<ActionId>(S, Policy::kNoAction));

    // scratch for the per-action greedy minimization
    std::vector<std::size_t> order;
    std::vector<double> worst(nact);

    for (int t = 1; t <= m.horizon; ++t) {
        const auto& prev = table.values[t - 1];
        for (std::size_t a = 0; a < nact; ++a) {
            const auto& row = m.intervals.rows[a];
            order.resize(row.size());
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
                const double vi = prev[row[i].successor], vj = prev[row[j].successor];
                if (vi != vj) return vi < vj;
                return row[i].successor < row[j].successor;
            });
            double slack = 1.0;
            double value = 0.0;
            for (const auto& e : row) {
                slack -= e.lower;
                value += e.lower * prev[e.successor];
            }
            for (std::size_t idx : order) {
                if (slack <= 0) break;
                const auto& e = row[idx];
                const double add = std::min(e.upper - e.lower, slack);
                value += add * prev[e.successor];
                slack -= add;
            }
            worst[a] = value;
        }

        auto& cur = table.values[t];
        auto& pol = policy.action[m.horizon - t];
        for (std::size_t s = 0; s < S; ++s) {
            if (is_goal[s]) {
                cur[s] = 1.0;
                continue;
            }
            if (is_unsafe[s] || m.enabled[s].empty()) {
                cur[s] = 0.0;
                continue;
            }
            double best = -1.0;
            ActionId best_a = Policy::kNoAction;
            for (ActionId a : m.enabled[s]) {
                if (worst[a] > best) {
                    best = worst[a];
                    best_a = a;
                }
            }
            cur[s] = best;
            pol[s] = best_a;
        }
    }
    return {std::move(table), std::move(policy)};
}

}  // namespace imdpsyn
