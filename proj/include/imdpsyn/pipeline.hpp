#pragma once

#include "imdpsyn/abstraction.hpp"
#include "imdpsyn/config.hpp"
#include "imdpsyn/dynamics.hpp"
#include "imdpsyn/imdp.hpp"
#include "imdpsyn/model_io.hpp"
#include "imdpsyn/refine.hpp"
#include "imdpsyn/scenario.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace imdpsyn {

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
};

struct RunReport {
    std::int64_t locations = 0;
    std::int64_t actions = 0;
    std::int64_t transition_count = 0;
    std::int64_t interval_count = 0;
    double beta = 0.0;
    double lower_bound = 0.0;  // V[H] at the nominal initial location
    double threshold = 0.0;
    bool certified = false;
    MonteCarloReport monte_carlo;
    std::vector<double> location_bounds;  // V[H] per location
    std::vector<StageTiming> timings;     // console diagnostics only, never written to report files
};

struct SimulationRun {
    std::uint64_t seed = 0;
    TrajectoryRecord::Outcome outcome = TrajectoryRecord::Outcome::kTimeout;
    std::optional<int> first_goal_step;
};

/// Everything a run produces, kept in memory for tests and report writing.
struct PipelineResult {
    LinearSystem effective;  // after optional grouping
    std::optional<StabilizedSystem> stabilized;
    Partition partition;
    ActionSet actions;
    IMDP imdp;
    ValueTable values;
    Policy policy;
    RefinedController controller;
    ReachAvoidProperty property;  // horizon in effective (grouped) steps
    Eigen::VectorXd nominal_initial_state;
    std::vector<SimulationRun> simulations;
    RunReport report;
};

/// The pieces needed to refine and execute a policy: effective dynamics,
/// optional stabilizer, partition, action targets and the continuous property.
struct ControlSurface {
    LinearSystem effective;
    std::optional<StabilizedSystem> stabilized;
    Partition partition;
    std::vector<Eigen::VectorXd> targets;
    ReachAvoidProperty property;  // horizon in effective (grouped) steps
};

namespace detail {

class StageClock {
  public:
    explicit StageClock(std::ostream* log) : log_(log) {}

    template <typename F>
    auto run(const std::string& name, std::vector<StageTiming>& timings, F&& f) {
        const auto t0 = std::chrono::steady_clock::now();
        if constexpr (std::is_void_v<decltype(f())>) {
            f();
            finish(name, timings, t0);
        } else {
            auto out = f();
            finish(name, timings, t0);
            return out;
        }
    }

  private:
    void finish(const std::string& name, std::vector<StageTiming>& timings,
                std::chrono::steady_clock::time_point t0) {
        const double dt =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        timings.push_back({name, dt});
        if (log_) (*log_) << "[" << name << "] " << dt << " s\n";
    }

    std::ostream* log_;
};

inline NoiseSource make_noise(const RunConfig& cfg) {
    if (cfg.noise.kind == NoiseSpec::Kind::kGaussian)
        return NoiseSource::gaussian(cfg.noise.mean, cfg.noise.covariance);
    return NoiseSource::from_file(cfg.noise.path, cfg.state_dim);
}

}  // namespace detail

/** Builds the control surface: validated effective dynamics after grouping,
 * the optional stabilizer, the partition with its action targets, and the
 * continuous property in effective steps.
 */
inline ControlSurface build_control_surface(const RunConfig& cfg, std::ostream* log = nullptr) {
    detail::StageClock clock(log);
    std::vector<StageTiming> timings;
    ControlSurface surf;

    const auto stage_fail = [](const std::string& stage, const std::string& what) {
        return std::runtime_error("[" + stage + "] " + what);
    };

    try {
        clock.run("dynamics", timings, [&] {
            LinearSystem base;
            base.A = cfg.A;
            base.B = cfg.B;
            base.state_dim = cfg.state_dim;
            base.input_dim = cfg.input_dim;
            base.input_set = cfg.input_set.build(cfg.input_dim);
            base.noise = detail::make_noise(cfg);
            surf.effective = cfg.grouping > 1 ? group_dynamics(base, cfg.grouping) : base;
            if (surf.effective.input_dim != surf.effective.state_dim
                || !is_invertible(surf.effective.B))
                throw std::invalid_argument(
                    "the effective input matrix must be square and invertible; choose a grouping "
                    "factor m with m * p = n");
        });
    } catch (const std::exception& e) {
        throw stage_fail("dynamics", e.what());
    }

    try {
        if (cfg.two_layer.enabled) {
            clock.run("stabilize", timings, [&] {
                Eigen::MatrixXd K;
                if (cfg.two_layer.gain.kind == GainSpec::Kind::kLqr) {
                    LQRWeights w{cfg.two_layer.gain.Q, cfg.two_layer.gain.R};
                    K = solve_dare(surf.effective.A, surf.effective.B, w).second;
                } else {
                    K = cfg.two_layer.gain.K;
                    if (K.rows() != surf.effective.input_dim || K.cols() != surf.effective.state_dim)
                        throw std::invalid_argument("explicit gain must be p x n for the effective system ("
                                                    + std::to_string(surf.effective.input_dim) + " x "
                                                    + std::to_string(surf.effective.state_dim) + ")");
                }
                // U' is given per base input and stacked blockwise, like U
                HalfspacePolytope uprime;
                if (cfg.two_layer.input_set_prime.unconstrained) {
                    uprime = HalfspacePolytope::unconstrained(surf.effective.input_dim);
                } else {
                    const HalfspacePolytope base_up = cfg.two_layer.input_set_prime.build(cfg.input_dim);
                    if (cfg.grouping == 1) {
                        uprime = base_up;
                    } else {
                        const Eigen::Index q = base_up.rows();
                        Eigen::MatrixXd C = Eigen::MatrixXd::Zero(q * cfg.grouping, surf.effective.input_dim);
                        Eigen::VectorXd d(q * cfg.grouping);
                        for (int j = 0; j < cfg.grouping; ++j) {
                            C.block(j * q, j * cfg.input_dim, q, cfg.input_dim) = base_up.constraint_matrix;
                            d.segment(j * q, q) = base_up.offset;
                        }
                        uprime = HalfspacePolytope(std::move(C), std::move(d));
                    }
                }
                surf.stabilized = make_stabilized(surf.effective, K, std::move(uprime), cfg.domain);
            });
        }
    } catch (const std::exception& e) {
        throw stage_fail("stabilize", e.what());
    }

    surf.partition = build_partition(cfg.domain, cfg.partition_counts);
    surf.targets.reserve(surf.partition.region_count());
    for (LocationId a = 0; a < surf.partition.region_count(); ++a)
        surf.targets.push_back(surf.partition.region_center(a));
    surf.property.goal_boxes = cfg.property.goal_boxes;
    surf.property.avoid_boxes = cfg.property.avoid_boxes;
    surf.property.avoid_complement = cfg.property.avoid_complement;
    surf.property.horizon = cfg.property.horizon / cfg.grouping;
    return surf;
}

/** Runs the full synthesis pipeline on a parsed configuration.
 *
 * Stage order: system assembly and validation, optional time-step grouping,
 * optional stabilization (gain + closed loop), partitioning, backward sets and
 * enabled actions, noise sampling, interval estimation, model assembly, robust
 * value iteration, controller refinement, Monte Carlo validation.
 *
 * Any stage failure throws with a stage-tagged message. Pass a stream to get
 * per-stage wall-clock diagnostics (not part of the written reports).
 */
inline PipelineResult run_pipeline(const RunConfig& cfg, std::ostream* log = nullptr) {
    detail::StageClock clock(log);
    PipelineResult res;
    auto& timings = res.report.timings;

    const auto stage_fail = [](const std::string& stage, const std::string& what) {
        return std::runtime_error("[" + stage + "] " + what);
    };

    ControlSurface surf = build_control_surface(cfg, log);
    res.effective = std::move(surf.effective);
    res.stabilized = std::move(surf.stabilized);
    res.partition = std::move(surf.partition);
    res.property = std::move(surf.property);
    const int effective_horizon = res.property.horizon;

    // backward sets + enabled actions
    try {
        clock.run("abstraction", timings, [&] {
            const BackwardFamily family = res.stabilized
                                              ? backward_family_two_layer(*res.stabilized)
                                              : backward_family_single(res.effective);
            res.actions = build_action_set(res.partition, family);
        });
    } catch (const std::exception& e) {
        throw stage_fail("abstraction", e.what());
    }

    // scenario estimation
    IntervalTable table;
    try {
        table = clock.run("estimate", timings, [&] {
            const SampleSet samples =
                SampleSet::draw(res.effective.noise, cfg.scenario.samples, cfg.simulate.seed);
            const double beta =
                confidence_budget(cfg.scenario.overall_confidence,
                                  static_cast<std::int64_t>(res.actions.action_count()),
                                  res.partition.location_count());
            return build_interval_table(res.actions.targets, samples, res.partition, beta);
        });
    } catch (const std::exception& e) {
        throw stage_fail("estimate", e.what());
    }

    // labels + model assembly
    try {
        clock.run("assemble", timings, [&] {
            LabelSets labels = label_locations(res.partition, cfg.property.goal_boxes,
                                               cfg.property.avoid_boxes, cfg.property.avoid_complement);
            res.imdp = assemble_imdp(res.partition, res.actions.enabled, std::move(table),
                                     std::move(labels), effective_horizon);
        });
    } catch (const std::exception& e) {
        throw stage_fail("assemble", e.what());
    }

    // robust value iteration
    try {
        clock.run("synthesize", timings, [&] {
            auto [values, policy] = robust_value_iteration(res.imdp);
            res.values = std::move(values);
            res.policy = std::move(policy);
        });
    } catch (const std::exception& e) {
        throw stage_fail("synthesize", e.what());
    }

    // refinement + Monte Carlo
    try {
        clock.run("simulate", timings, [&] {
            res.controller = res.stabilized
                                 ? RefinedController::two_layer(res.policy, res.partition,
                                                                res.actions.targets, *res.stabilized)
                                 : RefinedController::single_layer(res.policy, res.partition,
                                                                   res.actions.targets, res.effective);
            res.nominal_initial_state = cfg.simulate.initial_states.front();

            const LocationId s0 = res.partition.locate(res.nominal_initial_state);
            res.report.lower_bound = res.values.at_horizon()[s0];

            res.simulations.reserve(cfg.simulate.runs);
            std::int64_t successes = 0;
            for (std::int64_t i = 0; i < cfg.simulate.runs; ++i) {
                const std::uint64_t run_seed = cfg.simulate.seed + static_cast<std::uint64_t>(i);
                const TrajectoryRecord rec = simulate(res.effective, res.controller, res.property,
                                                      res.nominal_initial_state, run_seed);
                if (rec.outcome == TrajectoryRecord::Outcome::kSatisfied) ++successes;
                res.simulations.push_back({run_seed, rec.outcome, rec.first_goal_step});
            }
            auto& mc = res.report.monte_carlo;
            mc.runs = cfg.simulate.runs;
            mc.success_count = successes;
            mc.empirical_rate = static_cast<double>(successes) / static_cast<double>(mc.runs);
            mc.rate_lower = binomial_lower(mc.runs, successes, 0.005);
            mc.rate_upper = binomial_upper(mc.runs, successes, 0.005);
            mc.imdp_lower_bound = res.report.lower_bound;
        });
    } catch (const std::exception& e) {
        throw stage_fail("simulate", e.what());
    }

    res.report.locations = res.imdp.locations;
    res.report.actions = static_cast<std::int64_t>(res.actions.action_count());
    res.report.transition_count = res.imdp.transition_count;
    res.report.interval_count = res.imdp.intervals.interval_count;
    res.report.beta = res.imdp.intervals.beta_per_interval;
    res.report.threshold = cfg.property.threshold;
    res.report.certified = res.report.lower_bound >= cfg.property.threshold;
    res.report.location_bounds = res.values.at_horizon();
    return res;
}

namespace detail {

/// Writes a file atomically: content goes to <path>.tmp first, then the tmp
/// file is renamed over the target. Partial files never appear under the
/// final name.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
        out << content;
        if (!out) throw std::runtime_error("write to '" + tmp.string() + "' failed");
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace detail

/** Emits the report files for a pipeline result into the given directory.
 *
 * bounds.csv     location_id, center coordinates, lower bound (sink gets nan centers)
 * summary.csv    run-level metrics and the certification verdict
 * policy.txt     model header plus the synthesized policy lines
 * simulation.csv per-run seed and outcome
 * model.txt      full interval model with policy (only when requested)
 *
 * All files are deterministic functions of (config, seed); stage timings stay
 * on the console.
 */
inline void write_reports(const PipelineResult& res, const std::filesystem::path& dir,
                          bool export_model) {
    std::filesystem::create_directories(dir);

    {
        std::ostringstream b;
        b << "location_id";
        for (Eigen::Index i = 0; i < res.partition.dim(); ++i) b << ",c" << i;
        b << ",lower_bound\n";
        for (LocationId s = 0; s < res.partition.location_count(); ++s) {
            b << s;
            if (s == res.partition.sink_id()) {
                for (Eigen::Index i = 0; i < res.partition.dim(); ++i) b << ",nan";
            } else {
                const Eigen::VectorXd c = res.partition.region_center(s);
                for (Eigen::Index i = 0; i < res.partition.dim(); ++i)
                    b << ',' << format_double(c(i));
            }
            b << ',' << format_double(res.report.location_bounds[s]) << '\n';
        }
        detail::write_file_atomic(dir / "bounds.csv", b.str());
    }

    {
        std::ostringstream s;
        s << "transition_count,locations,actions,beta,interval_count,lower_bound,threshold,verdict\n";
        s << res.report.transition_count << ',' << res.report.locations << ',' << res.report.actions
          << ',' << format_double(res.report.beta) << ',' << res.report.interval_count << ','
          << format_double(res.report.lower_bound) << ',' << format_double(res.report.threshold)
          << ',' << (res.report.certified ? "certified" : "unknown") << '\n';
        detail::write_file_atomic(dir / "summary.csv", s.str());
    }

    {
        std::ostringstream p;
        p << "imdp " << res.imdp.locations << ' ' << res.actions.action_count() << ' '
          << res.imdp.horizon << '\n';
        for (LocationId s = 0; s < res.imdp.locations; ++s)
            for (int k = 0; k < res.policy.horizon(); ++k)
                if (res.policy.at(s, k) != Policy::kNoAction)
                    p << "policy " << s << ' ' << k << ' ' << res.policy.at(s, k) << '\n';
        detail::write_file_atomic(dir / "policy.txt", p.str());
    }

    {
        std::ostringstream sim;
        sim << "run,seed,outcome,first_goal_step\n";
        for (std::size_t i = 0; i < res.simulations.size(); ++i) {
            const auto& r = res.simulations[i];
            sim << i << ',' << r.seed << ',' << outcome_name(r.outcome) << ',';
            if (r.first_goal_step) sim << *r.first_goal_step;
            sim << '\n';
        }
        detail::write_file_atomic(dir / "simulation.csv", sim.str());
    }

    if (export_model)
        detail::write_file_atomic(dir / "model.txt", export_interval_model(res.imdp, &res.policy));
}

}  // namespace imdpsyn
