#pragma once

#include "imdpsyn/noise.hpp"
#include "imdpsyn/partition.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace imdpsyn {

namespace detail {

/// log C(N, i) for i = 0..N, built incrementally.
inline std::vector<double> log_binomial_row(std::int64_t N) {
    std::vector<double> lc(static_cast<std::size_t>(N) + 1);
    lc[0] = 0.0;
    for (std::int64_t i = 0; i < N; ++i)
        lc[i + 1] = lc[i] + std::log(static_cast<double>(N - i)) - std::log(static_cast<double>(i + 1));
    return lc;
}

/// P[X >= c] for X ~ Binomial(N, p), summed in probability space with
/// log-space terms (safe for the tiny confidence levels used here).
inline double binom_tail_upper(const std::vector<double>& logc, std::int64_t N, std::int64_t c,
                               double p) {
    if (c <= 0) return 1.0;
    if (p <= 0.0) return 0.0;
    if (p >= 1.0) return 1.0;
    const double lp = std::log(p), l1p = std::log1p(-p);
    double sum = 0.0;
    for (std::int64_t i = c; i <= N; ++i)
        sum += std::exp(logc[i] + i * lp + (N - i) * l1p);
    return sum;
}

/// P[X <= c].
inline double binom_tail_lower(const std::vector<double>& logc, std::int64_t N, std::int64_t c,
                               double p) {
    if (c >= N) return 1.0;
    if (p <= 0.0) return 1.0;
    if (p >= 1.0) return 0.0;
    const double lp = std::log(p), l1p = std::log1p(-p);
    double sum = 0.0;
    for (std::int64_t i = 0; i <= c; ++i)
        sum += std::exp(logc[i] + i * lp + (N - i) * l1p);
    return sum;
}

inline void check_binomial_args(std::int64_t N, std::int64_t N_in, double beta_side) {
    if (N < 1) throw std::invalid_argument("binomial bound: N must be >= 1");
    if (N_in < 0 || N_in > N)
        throw std::invalid_argument("binomial bound: N_in must lie in [0, N]");
    if (!(beta_side > 0.0 && beta_side < 1.0))
        throw std::invalid_argument("binomial bound: beta_side must lie in (0, 1)");
}

}  // namespace detail

/** Lower probability bound: the p solving P[Binomial(N, p) >= N_in] = beta_side,
 * or 0 when N_in = 0. Solved by bisection on [0, 1] to 1e-9.
 */
inline double binomial_lower(std::int64_t N, std::int64_t N_in, double beta_side) {
    detail::check_binomial_args(N, N_in, beta_side);
    if (N_in == 0) return 0.0;
    const auto logc = detail::log_binomial_row(N);
    double lo = 0.0, hi = 1.0;
    while (hi - lo > 1e-9) {
        const double mid = 0.5 * (lo + hi);
        // P[X >= N_in] increases with p
        if (detail::binom_tail_upper(logc, N, N_in, mid) < beta_side)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

/// Upper probability bound: the p solving P[Binomial(N, p) <= N_in] = beta_side,
/// or 1 when N_in = N.
inline double binomial_upper(std::int64_t N, std::int64_t N_in, double beta_side) {
    detail::check_binomial_args(N, N_in, beta_side);
    if (N_in == N) return 1.0;
    const auto logc = detail::log_binomial_row(N);
    double lo = 0.0, hi = 1.0;
    while (hi - lo > 1e-9) {
        const double mid = 0.5 * (lo + hi);
        // P[X <= N_in] decreases with p
        if (detail::binom_tail_lower(logc, N, N_in, mid) > beta_side)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

/// Splits the complement of the overall confidence uniformly over all
/// probability intervals: beta = (1 - overall) / (actions * locations).
inline double confidence_budget(double overall, std::int64_t action_count,
                                std::int64_t location_count) {
    if (!(overall > 0.0 && overall < 1.0))
        throw std::invalid_argument("confidence_budget: overall confidence must lie in (0, 1)");
    if (action_count < 1 || location_count < 1)
        throw std::invalid_argument("confidence_budget: counts must be positive");
    return (1.0 - overall) / (static_cast<double>(action_count) * static_cast<double>(location_count));
}

/// Successor counts of one action: histogram of locate(d_a + delta_i) over the
/// sample set, indexed by location id (sink included).
inline std::vector<std::int64_t> count_successors(const Eigen::VectorXd& target,
                                                  const SampleSet& samples,
                                                  const Partition& part) {
    if (target.size() != part.dim())
        throw std::invalid_argument("count_successors: target dimension mismatch");
    std::vector<std::int64_t> counts(part.location_count(), 0);
    for (const auto& delta : samples.samples) ++counts[part.locate(target + delta)];
    return counts;
}

/// One probability interval entry of an action row.
struct IntervalEntry {
    LocationId successor;
    double lower;
    double upper;
};

/** Per-action transition-probability intervals.
 *
 * Rows depend only on the action (the successor distribution is d_a + eta,
 * identical from every location where the action is enabled). Successors
 * without samples get no entry; their possible mass is folded into the sink
 * row, which is always present.
 */
struct IntervalTable {
    std::vector<std::vector<IntervalEntry>> rows;  // indexed by action id
    double beta_per_interval = 0.0;
    std::int64_t sample_count = 0;
    std::int64_t interval_count = 0;
};

inline IntervalTable build_interval_table(const std::vector<Eigen::VectorXd>& targets,
                                          const SampleSet& samples, const Partition& part,
                                          double beta) {
    const auto N = static_cast<std::int64_t>(samples.size());
    if (N < 1) throw std::invalid_argument("build_interval_table: empty sample set");
    if (!(beta > 0.0 && beta < 1.0))
        throw std::invalid_argument("build_interval_table: beta must lie in (0, 1)");

    const double beta_side = beta / (2.0 * static_cast<double>(N));
    IntervalTable table;
    table.beta_per_interval = beta;
    table.sample_count = N;
    table.rows.resize(targets.size());

    // bounds depend on the count only; solve each count once
    std::unordered_map<std::int64_t, std::pair<double, double>> bound_cache;
    const auto bounds_for = [&](std::int64_t c) {
        auto it = bound_cache.find(c);
        if (it == bound_cache.end()) {
            it = bound_cache
                     .emplace(c, std::make_pair(binomial_lower(N, c, beta_side),
                                                binomial_upper(N, c, beta_side)))
                     .first;
        }
        return it->second;
    };

    for (std::size_t a = 0; a < targets.size(); ++a) {
        const auto counts = count_successors(targets[a], samples, part);
        auto& row = table.rows[a];
        std::int64_t counted = 0;
        for (LocationId s = 0; s < part.sink_id(); ++s) {
            if (counts[s] == 0) continue;
            counted += counts[s];
            const auto [lo, hi] = bounds_for(counts[s]);
            row.push_back({s, lo, hi});
        }
        const std::int64_t sink_count = N - counted;
        const auto [slo, shi] = bounds_for(sink_count);
        row.push_back({part.sink_id(), slo, shi});

        double sum_lo = 0.0, sum_hi = 0.0;
        for (const auto& e : row) {
            sum_lo += e.lower;
            sum_hi += e.upper;
        }
        if (sum_lo > 1.0 + 1e-9 || sum_hi < 1.0 - 1e-9)
            throw std::logic_error("build_interval_table: infeasible row for action "
                                   + std::to_string(a) + " (sum of lower bounds "
                                   + std::to_string(sum_lo) + ", upper " + std::to_string(sum_hi)
                                   + ")");
        table.interval_count += static_cast<std::int64_t>(row.size());
    }
    return table;
}

}  // namespace imdpsyn
