#pragma once

#include "imdpsyn/dynamics.hpp"
#include "imdpsyn/geometry.hpp"
#include "imdpsyn/refine.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace imdpsyn {

struct NoiseSpec {
    enum class Kind { kGaussian, kFile };
    Kind kind = Kind::kGaussian;
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
    std::string path;
};

struct PolytopeSpec {
    // either a box (per-dimension [lo, hi]) or explicit rows {C, d}; an empty
    // spec with unconstrained = true means all of R^p
    bool unconstrained = false;
    std::vector<std::pair<double, double>> box;
    Eigen::MatrixXd C;
    Eigen::VectorXd d;
    bool explicit_rows = false;

    HalfspacePolytope build(Eigen::Index dim) const {
        if (unconstrained) return HalfspacePolytope::unconstrained(dim);
        if (explicit_rows) {
            if (C.cols() != dim)
                throw std::invalid_argument("polytope: constraint matrix has "
                                            + std::to_string(C.cols()) + " columns, expected "
                                            + std::to_string(dim));
            return HalfspacePolytope(C, d);
        }
        if (static_cast<Eigen::Index>(box.size()) != dim)
            throw std::invalid_argument("polytope: box has " + std::to_string(box.size())
                                        + " intervals, expected " + std::to_string(dim));
        Eigen::VectorXd lo(dim), up(dim);
        for (Eigen::Index i = 0; i < dim; ++i) {
            lo(i) = box[i].first;
            up(i) = box[i].second;
        }
        return HalfspacePolytope::box(lo, up);
    }
};

struct GainSpec {
    enum class Kind { kLqr, kMatrix };
    Kind kind = Kind::kLqr;
    Eigen::MatrixXd Q, R;  // LQR weights
    Eigen::MatrixXd K;     // explicit gain
};

struct TwoLayerSpec {
    bool enabled = false;
    GainSpec gain;
    PolytopeSpec input_set_prime;
};

struct PropertySpec {
    std::vector<HyperRectangle> goal_boxes;
    std::vector<HyperRectangle> avoid_boxes;
    bool avoid_complement = true;
    int horizon = 0;
    double threshold = 0.0;
};

struct ScenarioSpec {
    std::int64_t samples = 3200;
    double overall_confidence = 0.99;
};

struct SimulateSpec {
    std::int64_t runs = 10000;
    std::uint64_t seed = 1;
    std::vector<Eigen::VectorXd> initial_states;  // first entry is the nominal x0
};

struct OutputSpec {
    std::string directory = "out";
    bool export_model = false;
};

struct RunConfig {
    Eigen::MatrixXd A, B;
    int state_dim = 0;
    int input_dim = 0;
    NoiseSpec noise;
    PolytopeSpec input_set;
    TwoLayerSpec two_layer;
    int grouping = 1;
    HyperRectangle domain;
    std::vector<int> partition_counts;
    PropertySpec property;
    ScenarioSpec scenario;
    SimulateSpec simulate;
    OutputSpec output;
};

namespace detail {

using nlohmann::json;

inline const json& require(const json& j, const std::string& key, const std::string& where) {
    if (!j.contains(key))
        throw std::invalid_argument("config." + where + ": missing field '" + key + "'");
    return j.at(key);
}

inline Eigen::MatrixXd parse_matrix(const json& j, const std::string& where) {
    if (!j.is_array() || j.empty() || !j.front().is_array())
        throw std::invalid_argument("config." + where + ": expected a list of rows");
    const std::size_t rows = j.size();
    const std::size_t cols = j.front().size();
    Eigen::MatrixXd M(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        if (!j[r].is_array() || j[r].size() != cols)
            throw std::invalid_argument("config." + where + ": ragged rows");
        for (std::size_t c = 0; c < cols; ++c) {
            if (!j[r][c].is_number())
                throw std::invalid_argument("config." + where + ": non-numeric entry");
            M(r, c) = j[r][c].get<double>();
        }
    }
    return M;
}

inline Eigen::VectorXd parse_vector(const json& j, const std::string& where) {
    if (!j.is_array())
        throw std::invalid_argument("config." + where + ": expected a list of numbers");
    Eigen::VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number())
            throw std::invalid_argument("config." + where + ": non-numeric entry");
        v(i) = j[i].get<double>();
    }
    return v;
}

inline PolytopeSpec parse_polytope(const json& j, const std::string& where) {
    PolytopeSpec spec;
    if (j.is_string() && j.get<std::string>() == "unconstrained") {
        spec.unconstrained = true;
        return spec;
    }
    if (!j.is_object())
        throw std::invalid_argument("config." + where + ": expected an object or \"unconstrained\"");
    if (j.contains("box")) {
        const auto& b = j.at("box");
        if (!b.is_array())
            throw std::invalid_argument("config." + where + ".box: expected a list of [lo, hi] pairs");
        for (const auto& iv : b) {
            if (!iv.is_array() || iv.size() != 2 || !iv[0].is_number() || !iv[1].is_number())
                throw std::invalid_argument("config." + where + ".box: each entry must be [lo, hi]");
            spec.box.emplace_back(iv[0].get<double>(), iv[1].get<double>());
            if (!(spec.box.back().first <= spec.box.back().second))
                throw std::invalid_argument("config." + where + ".box: lo exceeds hi");
        }
        return spec;
    }
    if (j.contains("G")) {
        spec.explicit_rows = true;
        spec.C = parse_matrix(j.at("G"), where + ".G");
        const char* offs = j.contains("g") ? "g" : "h";
        spec.d = parse_vector(require(j, offs, where), where + "." + offs);
        if (spec.C.rows() != spec.d.size())
            throw std::invalid_argument("config." + where + ": G row count does not match offset size");
        return spec;
    }
    throw std::invalid_argument("config." + where + ": expected 'box' or 'G'/'g'");
}

inline HyperRectangle parse_box_object(const json& j, const std::string& where) {
    Eigen::VectorXd lo = parse_vector(require(j, "lower", where), where + ".lower");
    Eigen::VectorXd up = parse_vector(require(j, "upper", where), where + ".upper");
    if (lo.size() != up.size())
        throw std::invalid_argument("config." + where + ": lower/upper length mismatch");
    for (Eigen::Index i = 0; i < lo.size(); ++i)
        if (!(lo(i) <= up(i)))
            throw std::invalid_argument("config." + where + ": lower exceeds upper in dimension "
                                        + std::to_string(i));
    return HyperRectangle(std::move(lo), std::move(up));
}

}  // namespace detail

/** Parses and structurally validates a run configuration document.
 *
 * Model-level admissibility (invertibility of the effective input matrix,
 * controllability, gain admissibility, origin membership of the abstract
 * input set) is re-checked by the pipeline after grouping is applied; this
 * function rejects everything detectable from the document alone.
 */
inline RunConfig parse_config(const nlohmann::json& doc) {
    using detail::parse_matrix;
    using detail::parse_vector;
    using detail::require;
    RunConfig cfg;

    const auto& system = require(doc, "system", "");
    cfg.A = parse_matrix(require(system, "A", "system"), "system.A");
    cfg.B = parse_matrix(require(system, "B", "system"), "system.B");
    cfg.state_dim = require(system, "n", "system").get<int>();
    cfg.input_dim = require(system, "p", "system").get<int>();
    if (cfg.A.rows() != cfg.state_dim || cfg.A.cols() != cfg.state_dim)
        throw std::invalid_argument("config.system.A: expected " + std::to_string(cfg.state_dim)
                                    + "x" + std::to_string(cfg.state_dim));
    if (cfg.B.rows() != cfg.state_dim || cfg.B.cols() != cfg.input_dim)
        throw std::invalid_argument("config.system.B: expected " + std::to_string(cfg.state_dim)
                                    + "x" + std::to_string(cfg.input_dim));
    if (!is_invertible(cfg.A))
        throw std::invalid_argument("config.system.A: the system matrix must be non-singular");
    if (!check_controllability(cfg.A, cfg.B))
        throw std::invalid_argument("config.system: the pair (A, B) must be controllable");

    const auto& noise = require(doc, "noise", "");
    const std::string nkind = require(noise, "type", "noise").get<std::string>();
    if (nkind == "gaussian") {
        cfg.noise.kind = NoiseSpec::Kind::kGaussian;
        cfg.noise.mean = parse_vector(require(noise, "mean", "noise"), "noise.mean");
        cfg.noise.covariance = parse_matrix(require(noise, "covariance", "noise"), "noise.covariance");
        if (cfg.noise.mean.size() != cfg.state_dim)
            throw std::invalid_argument("config.noise.mean: expected length " + std::to_string(cfg.state_dim));
        if (cfg.noise.covariance.rows() != cfg.state_dim || cfg.noise.covariance.cols() != cfg.state_dim)
            throw std::invalid_argument("config.noise.covariance: expected "
                                        + std::to_string(cfg.state_dim) + "x" + std::to_string(cfg.state_dim));
    } else if (nkind == "file") {
        cfg.noise.kind = NoiseSpec::Kind::kFile;
        cfg.noise.path = require(noise, "path", "noise").get<std::string>();
    } else {
        throw std::invalid_argument("config.noise.type: expected 'gaussian' or 'file'");
    }

    cfg.input_set = detail::parse_polytope(require(doc, "input_set", ""), "input_set");
    if (cfg.input_set.unconstrained)
        throw std::invalid_argument("config.input_set: the admissible input set must be bounded, not 'unconstrained'");

    if (doc.contains("two_layer")) {
        const auto& tl = doc.at("two_layer");
        cfg.two_layer.enabled = require(tl, "enabled", "two_layer").get<bool>();
        if (cfg.two_layer.enabled) {
            const auto& gain = require(tl, "gain", "two_layer");
            const std::string gkind = require(gain, "type", "two_layer.gain").get<std::string>();
            if (gkind == "lqr") {
                cfg.two_layer.gain.kind = GainSpec::Kind::kLqr;
                cfg.two_layer.gain.Q = parse_matrix(require(gain, "Q", "two_layer.gain"), "two_layer.gain.Q");
                cfg.two_layer.gain.R = parse_matrix(require(gain, "R", "two_layer.gain"), "two_layer.gain.R");
            } else if (gkind == "matrix") {
                cfg.two_layer.gain.kind = GainSpec::Kind::kMatrix;
                cfg.two_layer.gain.K = parse_matrix(require(gain, "K", "two_layer.gain"), "two_layer.gain.K");
            } else {
                throw std::invalid_argument("config.two_layer.gain.type: expected 'lqr' or 'matrix'");
            }
            cfg.two_layer.input_set_prime =
                detail::parse_polytope(require(tl, "input_set_prime", "two_layer"), "two_layer.input_set_prime");
        }
    }

    cfg.grouping = doc.value("grouping", 1);
    if (cfg.grouping < 1) throw std::invalid_argument("config.grouping: must be >= 1");

    const auto& part = require(doc, "partition", "");
    Eigen::VectorXd lo = parse_vector(require(part, "lower", "partition"), "partition.lower");
    Eigen::VectorXd up = parse_vector(require(part, "upper", "partition"), "partition.upper");
    if (lo.size() != cfg.state_dim || up.size() != cfg.state_dim)
        throw std::invalid_argument("config.partition: bounds must have length " + std::to_string(cfg.state_dim));
    for (Eigen::Index i = 0; i < lo.size(); ++i)
        if (!(lo(i) < up(i)))
            throw std::invalid_argument("config.partition: lower must be strictly below upper in dimension "
                                        + std::to_string(i));
    cfg.domain = HyperRectangle(std::move(lo), std::move(up));
    const auto& counts = require(part, "counts", "partition");
    if (!counts.is_array() || counts.size() != static_cast<std::size_t>(cfg.state_dim))
        throw std::invalid_argument("config.partition.counts: expected " + std::to_string(cfg.state_dim)
                                    + " entries");
    for (const auto& c : counts) {
        if (!c.is_number_integer() || c.get<int>() < 1)
            throw std::invalid_argument("config.partition.counts: entries must be positive integers");
        cfg.partition_counts.push_back(c.get<int>());
    }

    const auto& prop = require(doc, "property", "");
    if (prop.contains("goal"))
        for (const auto& b : prop.at("goal"))
            cfg.property.goal_boxes.push_back(detail::parse_box_object(b, "property.goal[]"));
    if (cfg.property.goal_boxes.empty())
        throw std::invalid_argument("config.property.goal: at least one goal box is required");
    if (prop.contains("avoid"))
        for (const auto& b : prop.at("avoid"))
            cfg.property.avoid_boxes.push_back(detail::parse_box_object(b, "property.avoid[]"));
    for (const auto& b : cfg.property.goal_boxes)
        if (b.dim() != cfg.state_dim)
            throw std::invalid_argument("config.property.goal: box dimension mismatch");
    for (const auto& b : cfg.property.avoid_boxes)
        if (b.dim() != cfg.state_dim)
            throw std::invalid_argument("config.property.avoid: box dimension mismatch");
    cfg.property.avoid_complement = prop.value("avoid_complement", true);
    if (!cfg.property.avoid_complement)
        throw std::invalid_argument("config.property.avoid_complement: the domain complement must be "
                                    "unsafe (the sink location is assumed unsafe by the estimator's "
                                    "mass-folding rule)");
    cfg.property.horizon = require(prop, "horizon", "property").get<int>();
    if (cfg.property.horizon < 1)
        throw std::invalid_argument("config.property.horizon: must be >= 1");
    cfg.property.threshold = require(prop, "threshold", "property").get<double>();
    if (!(cfg.property.threshold >= 0.0 && cfg.property.threshold <= 1.0))
        throw std::invalid_argument("config.property.threshold: must lie in [0, 1]");
    if (cfg.property.horizon % cfg.grouping != 0)
        throw std::invalid_argument("config.property.horizon: must be divisible by the grouping factor");

    if (doc.contains("scenario")) {
        const auto& sc = doc.at("scenario");
        cfg.scenario.samples = sc.value("samples", cfg.scenario.samples);
        cfg.scenario.overall_confidence = sc.value("confidence", cfg.scenario.overall_confidence);
    }
    if (cfg.scenario.samples < 1)
        throw std::invalid_argument("config.scenario.samples: must be >= 1");
    if (!(cfg.scenario.overall_confidence > 0.0 && cfg.scenario.overall_confidence < 1.0))
        throw std::invalid_argument("config.scenario.confidence: must lie in (0, 1)");

    if (doc.contains("simulate")) {
        const auto& sim = doc.at("simulate");
        cfg.simulate.runs = sim.value("runs", cfg.simulate.runs);
        cfg.simulate.seed = sim.value("seed", cfg.simulate.seed);
        if (sim.contains("initial_states"))
            for (const auto& x : sim.at("initial_states")) {
                Eigen::VectorXd v = detail::parse_vector(x, "simulate.initial_states[]");
                if (v.size() != cfg.state_dim)
                    throw std::invalid_argument("config.simulate.initial_states: state dimension mismatch");
                cfg.simulate.initial_states.push_back(std::move(v));
            }
    }
    if (cfg.simulate.runs < 1)
        throw std::invalid_argument("config.simulate.runs: must be >= 1");
    if (cfg.simulate.initial_states.empty())
        cfg.simulate.initial_states.push_back(cfg.domain.center());

    if (doc.contains("output")) {
        const auto& out = doc.at("output");
        cfg.output.directory = out.value("directory", cfg.output.directory);
        cfg.output.export_model = out.value("export_model", cfg.output.export_model);
    }
    return cfg;
}

inline RunConfig parse_config_text(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
    }
    return parse_config(doc);
}

}  // namespace imdpsyn
