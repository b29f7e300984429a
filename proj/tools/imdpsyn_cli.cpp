// Command-line front end: run the synthesis pipeline, export the interval
// model, or replay a stored policy in closed-loop simulation.

#include "imdpsyn/config.hpp"
#include "imdpsyn/model_io.hpp"
#include "imdpsyn/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace {

imdpsyn::RunConfig load_config(const std::string& path, const std::optional<std::uint64_t>& seed,
                               const std::string& samples_file, const std::string& out_dir) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    imdpsyn::RunConfig cfg = imdpsyn::parse_config_text(buf.str());
    if (seed) cfg.simulate.seed = *seed;
    if (!samples_file.empty()) {
        cfg.noise.kind = imdpsyn::NoiseSpec::Kind::kFile;
        cfg.noise.path = samples_file;
    }
    if (!out_dir.empty()) cfg.output.directory = out_dir;
    return cfg;
}

void print_report(const imdpsyn::RunReport& r, std::ostream& out) {
    out << "locations:        " << r.locations << '\n'
        << "actions:          " << r.actions << '\n'
        << "transitions:      " << r.transition_count << '\n'
        << "interval beta:    " << imdpsyn::format_double(r.beta) << '\n'
        << "lower bound:      " << imdpsyn::format_double(r.lower_bound) << '\n'
        << "threshold:        " << imdpsyn::format_double(r.threshold) << '\n'
        << "verdict:          " << (r.certified ? "certified" : "unknown") << '\n'
        << "simulated rate:   " << imdpsyn::format_double(r.monte_carlo.empirical_rate) << " ("
        << r.monte_carlo.success_count << "/" << r.monte_carlo.runs << ", 99% interval ["
        << imdpsyn::format_double(r.monte_carlo.rate_lower) << ", "
        << imdpsyn::format_double(r.monte_carlo.rate_upper) << "])\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Abstraction-based reach-avoid controller synthesis for stochastic linear systems"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::string samples_file;
    std::string policy_path;
    std::optional<std::uint64_t> seed;
    bool quiet = false;

    app.add_flag("--quiet", quiet, "suppress progress output");
    app.add_option("--seed", seed, "override the run seed");
    app.add_option("--samples-file", samples_file, "use noise samples from a file");
    app.add_option("--out", out_dir, "override the output directory");

    auto* run = app.add_subcommand("run", "run the full synthesis pipeline and write reports");
    run->add_option("config", config_path, "run configuration (JSON)")->required();

    auto* exp = app.add_subcommand("export", "build the abstraction and export the interval model");
    exp->add_option("config", config_path, "run configuration (JSON)")->required();

    auto* sim = app.add_subcommand("simulate", "simulate a stored policy in closed loop");
    sim->add_option("config", config_path, "run configuration (JSON)")->required();
    sim->add_option("--policy", policy_path, "policy file (policy.txt or exported model)")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        const imdpsyn::RunConfig cfg = load_config(config_path, seed, samples_file, out_dir);
        std::ostream* log = quiet ? nullptr : &std::cerr;

        if (run->parsed()) {
            const imdpsyn::PipelineResult res = imdpsyn::run_pipeline(cfg, log);
            imdpsyn::write_reports(res, cfg.output.directory, cfg.output.export_model);
            if (!quiet) print_report(res.report, std::cout);
            return res.report.certified ? 0 : 2;
        }

        if (exp->parsed()) {
            imdpsyn::RunConfig ecfg = cfg;
            ecfg.simulate.runs = 1;  // the exported model does not depend on simulations
            const imdpsyn::PipelineResult res = imdpsyn::run_pipeline(ecfg, log);
            std::filesystem::create_directories(cfg.output.directory);
            const auto path = std::filesystem::path(cfg.output.directory) / "model.txt";
            imdpsyn::detail::write_file_atomic(path, imdpsyn::export_interval_model(res.imdp));
            if (!quiet) std::cout << "model written to " << path.string() << '\n';
            return 0;
        }

        // simulate with a stored policy: rebuild the control surface only
        std::ifstream pin(policy_path);
        if (!pin) throw std::invalid_argument("cannot open policy file '" + policy_path + "'");
        const imdpsyn::IntervalModelText model = imdpsyn::parse_interval_model(pin);
        const imdpsyn::Policy policy = imdpsyn::policy_from_model_text(model);

        const imdpsyn::ControlSurface surface = imdpsyn::build_control_surface(cfg, log);
        if (model.locations != surface.partition.location_count()
            || model.horizon != surface.property.horizon)
            throw std::invalid_argument("policy file does not match the configured partition/horizon");

        imdpsyn::RefinedController ctrl =
            surface.stabilized
                ? imdpsyn::RefinedController::two_layer(policy, surface.partition, surface.targets,
                                                        *surface.stabilized)
                : imdpsyn::RefinedController::single_layer(policy, surface.partition,
                                                           surface.targets, surface.effective);

        std::ostringstream simcsv;
        simcsv << "run,seed,outcome,first_goal_step\n";
        std::int64_t successes = 0;
        for (std::int64_t i = 0; i < cfg.simulate.runs; ++i) {
            const std::uint64_t run_seed = cfg.simulate.seed + static_cast<std::uint64_t>(i);
            const imdpsyn::TrajectoryRecord rec =
                imdpsyn::simulate(surface.effective, ctrl, surface.property,
                                  cfg.simulate.initial_states.front(), run_seed);
            if (rec.outcome == imdpsyn::TrajectoryRecord::Outcome::kSatisfied) ++successes;
            simcsv << i << ',' << run_seed << ',' << imdpsyn::outcome_name(rec.outcome) << ',';
            if (rec.first_goal_step) simcsv << *rec.first_goal_step;
            simcsv << '\n';
        }
        std::filesystem::create_directories(cfg.output.directory);
        imdpsyn::detail::write_file_atomic(
            std::filesystem::path(cfg.output.directory) / "simulation.csv", simcsv.str());
        if (!quiet)
            std::cout << "satisfied " << successes << "/" << cfg.simulate.runs << " runs\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
