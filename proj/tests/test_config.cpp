#include "imdpsyn/config.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <sstream>

using namespace imdpsyn;

namespace {

nlohmann::json minimal_1d() {
    return nlohmann::json::parse(R"({
      "system": {"A": [[2.0]], "B": [[1.0]], "n": 1, "p": 1},
      "noise": {"type": "gaussian", "mean": [0.0], "covariance": [[1.0]]},
      "input_set": {"box": [[-6.0, 6.0]]},
      "partition": {"lower": [-2.0], "upper": [2.0], "counts": [4]},
      "property": {
        "goal": [{"lower": [-0.5], "upper": [0.5]}],
        "horizon": 4,
        "threshold": 0.5
      }
    })");
}

std::string config_dir() {
#ifdef IMDPSYN_TEST_CONFIG_DIR
    return IMDPSYN_TEST_CONFIG_DIR;
#else
    return "configs";
#endif
}

}  // namespace

TEST_CASE("minimal config parses with defaults") {
    const RunConfig cfg = parse_config(minimal_1d());
    CHECK(cfg.grouping == 1);
    CHECK_FALSE(cfg.two_layer.enabled);
    CHECK(cfg.scenario.samples == 3200);
    CHECK(cfg.scenario.overall_confidence == 0.99);
    CHECK(cfg.simulate.runs == 10000);
    CHECK(cfg.simulate.seed == 1);
    // the nominal initial state defaults to the domain center
    REQUIRE(cfg.simulate.initial_states.size() == 1);
    CHECK(cfg.simulate.initial_states[0](0) == 0.0);
    CHECK(cfg.property.avoid_complement);
    CHECK(cfg.output.directory == "out");
}

TEST_CASE("config rejects a singular system matrix") {
    auto doc = minimal_1d();
    doc["system"]["A"] = {{0.0}};
    try {
        parse_config(doc);
        FAIL("expected an error");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("non-singular") != std::string::npos);
    }
}

TEST_CASE("config rejects an uncontrollable pair") {
    auto doc = minimal_1d();
    doc["system"]["A"] = {{1.0, 0.0}, {0.0, 1.0}};
    doc["system"]["B"] = {{0.0}, {0.0}};
    doc["system"]["n"] = 2;
    doc["system"]["p"] = 1;
    doc["noise"]["mean"] = {0.0, 0.0};
    doc["noise"]["covariance"] = {{1.0, 0.0}, {0.0, 1.0}};
    doc["partition"]["lower"] = {-2.0, -2.0};
    doc["partition"]["upper"] = {2.0, 2.0};
    doc["partition"]["counts"] = {4, 4};
    doc["property"]["goal"] = {{{"lower", {-0.5, -0.5}}, {"upper", {0.5, 0.5}}}};
    try {
        parse_config(doc);
        FAIL("expected an error");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("controllable") != std::string::npos);
    }
}

TEST_CASE("config rejects an unsafe-free domain complement") {
    auto doc = minimal_1d();
    doc["property"]["avoid_complement"] = false;
    CHECK_THROWS_AS(parse_config(doc), std::invalid_argument);
}

TEST_CASE("field-precise error messages") {
    auto doc = minimal_1d();
    doc.erase("partition");
    try {
        parse_config(doc);
        FAIL("expected an error");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("partition") != std::string::npos);
    }

    auto doc2 = minimal_1d();
    doc2["property"]["threshold"] = 1.5;
    try {
        parse_config(doc2);
        FAIL("expected an error");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("threshold") != std::string::npos);
    }

    auto doc3 = minimal_1d();
    doc3["property"]["horizon"] = 5;
    doc3["grouping"] = 2;  // horizon not divisible by the grouping factor
    CHECK_THROWS_AS(parse_config(doc3), std::invalid_argument);

    CHECK_THROWS_AS(parse_config_text("{ not json"), std::invalid_argument);
}

TEST_CASE("two-layer and polytope variants parse") {
    auto doc = minimal_1d();
    doc["two_layer"] = {
        {"enabled", true},
        {"gain", {{"type", "matrix"}, {"K", {{0.5}}}}},
        {"input_set_prime", "unconstrained"},
    };
    const RunConfig cfg = parse_config(doc);
    CHECK(cfg.two_layer.enabled);
    CHECK(cfg.two_layer.gain.kind == GainSpec::Kind::kMatrix);
    CHECK(cfg.two_layer.input_set_prime.unconstrained);

    auto doc2 = minimal_1d();
    doc2["input_set"] = {{"G", {{1.0}, {-1.0}}}, {"g", {6.0, 6.0}}};
    const RunConfig cfg2 = parse_config(doc2);
    const auto poly = cfg2.input_set.build(1);
    CHECK(poly.rows() == 2);
}

TEST_CASE("the shipped benchmark configs parse") {
    for (const char* name :
         {"integrator.json", "integrator_twolayer_20.json", "integrator_twolayer_10.json",
          "spacecraft_aligned.json", "spacecraft_aligned_twolayer.json",
          "spacecraft_disaligned.json", "spacecraft_disaligned_twolayer.json"}) {
        std::ifstream in(config_dir() + "/" + name);
        REQUIRE(in.good());
        std::stringstream buf;
        buf << in.rdbuf();
        const RunConfig cfg = parse_config_text(buf.str());
        if (std::string(name).rfind("integrator", 0) == 0) {
            CHECK(cfg.state_dim == 2);
            CHECK(cfg.property.horizon == 16);
            CHECK(cfg.partition_counts == std::vector<int>{41, 41});
        } else {
            CHECK(cfg.state_dim == 4);
            CHECK(cfg.grouping == 2);
            CHECK(cfg.partition_counts == std::vector<int>{10, 10, 8, 4});
        }
    }
}
