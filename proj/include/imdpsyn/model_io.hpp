#pragma once

#include "imdpsyn/imdp.hpp"

#include <charconv>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

namespace imdpsyn {

/// Shortest decimal representation that round-trips to the same double.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    if (res.ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
    return std::string(buf, res.ptr);
}

/** Interval model in the explicit text exchange format.
 *
 * Line grammar, in file order:
 *   imdp <locations> <actions> <horizon>
 *   state <id> <goal|unsafe|none>          one line per location, ascending id
 *   edge <s> <a> <s'> <p_low> <p_high>     sorted by (s, a, s')
 *   policy <s> <k> <a>                     optional, sorted by (s, k)
 */
struct IntervalModelText {
    std::int64_t locations = 0;
    std::int64_t actions = 0;
    int horizon = 0;
    std::vector<std::string> state_labels;  // "goal" | "unsafe" | "none"
    struct Edge {
        std::int64_t source;
        std::int64_t action;
        std::int64_t successor;
        double lower;
        double upper;
    };
    std::vector<Edge> edges;
    struct PolicyLine {
        std::int64_t location;
        int step;
        std::int64_t action;
    };
    std::vector<PolicyLine> policy;
};

inline IntervalModelText to_model_text(const IMDP& m, const Policy* policy = nullptr) {
    IntervalModelText t;
    t.locations = m.locations;
    t.actions = static_cast<std::int64_t>(m.intervals.rows.size());
    t.horizon = m.horizon;
    t.state_labels.reserve(m.locations);
    for (LocationId s = 0; s < m.locations; ++s) {
        if (m.labels.goal.count(s))
            t.state_labels.push_back("goal");
        else if (m.labels.unsafe.count(s))
            t.state_labels.push_back("unsafe");
        else
            t.state_labels.push_back("none");
    }
    for (LocationId s = 0; s < m.locations; ++s)
        for (ActionId a : m.enabled[s])
            for (const auto& e : m.intervals.rows[a])
                t.edges.push_back({s, a, e.successor, e.lower, e.upper});
    if (policy) {
        for (LocationId s = 0; s < m.locations; ++s)
            for (int k = 0; k < policy->horizon(); ++k)
                if (policy->at(s, k) != Policy::kNoAction)
                    t.policy.push_back({s, k, policy->at(s, k)});
    }
    return t;
}

inline void write_model_text(std::ostream& out, const IntervalModelText& t) {
    out << "imdp " << t.locations << ' ' << t.actions << ' ' << t.horizon << '\n';
    for (std::int64_t s = 0; s < t.locations; ++s)
        out << "state " << s << ' ' << t.state_labels[s] << '\n';
    for (const auto& e : t.edges)
        out << "edge " << e.source << ' ' << e.action << ' ' << e.successor << ' '
            << format_double(e.lower) << ' ' << format_double(e.upper) << '\n';
    for (const auto& p : t.policy) out << "policy " << p.location << ' ' << p.step << ' ' << p.action << '\n';
}

/// Renders the model (optionally with a policy) as the deterministic text
/// document; edges come out sorted by (s, a, s') because enabled lists and
/// interval rows are stored ascending.
inline std::string export_interval_model(const IMDP& m, const Policy* policy = nullptr) {
    std::ostringstream out;
    write_model_text(out, to_model_text(m, policy));
    return out.str();
}

inline IntervalModelText parse_interval_model(std::istream& in) {
    IntervalModelText t;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    const auto fail = [&](const std::string& what) {
        throw std::invalid_argument("model text line " + std::to_string(lineno) + ": " + what);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string kind;
        ls >> kind;
        if (kind == "imdp") {
            if (have_header) fail("duplicate header");
            if (!(ls >> t.locations >> t.actions >> t.horizon)) fail("malformed header");
            t.state_labels.resize(t.locations, "none");
            have_header = true;
        } else if (kind == "state") {
            std::int64_t id;
            std::string label;
            if (!have_header) fail("state before header");
            if (!(ls >> id >> label)) fail("malformed state line");
            if (id < 0 || id >= t.locations) fail("state id out of range");
            if (label != "goal" && label != "unsafe" && label != "none") fail("unknown state label");
            t.state_labels[id] = label;
        } else if (kind == "edge") {
            IntervalModelText::Edge e;
            if (!have_header) fail("edge before header");
            if (!(ls >> e.source >> e.action >> e.successor >> e.lower >> e.upper))
                fail("malformed edge line");
            t.edges.push_back(e);
        } else if (kind == "policy") {
            IntervalModelText::PolicyLine p;
            if (!have_header) fail("policy before header");
            if (!(ls >> p.location >> p.step >> p.action)) fail("malformed policy line");
            t.policy.push_back(p);
        } else {
            fail("unknown line kind '" + kind + "'");
        }
    }
    if (!have_header) throw std::invalid_argument("model text: missing header");
    return t;
}

inline IntervalModelText parse_interval_model(const std::string& text) {
    std::istringstream in(text);
    return parse_interval_model(in);
}

/// Extracts the policy lines into a Policy table (locations without lines say
/// kNoAction).
inline Policy policy_from_model_text(const IntervalModelText& t) {
    Policy p;
    p.action.resize(t.horizon, std::vector<ActionId>(t.locations, Policy::kNoAction));
    for (const auto& line : t.policy) {
        if (line.location < 0 || line.location >= t.locations)
            throw std::invalid_argument("policy line: location out of range");
        if (line.step < 0 || line.step >= t.horizon)
            throw std::invalid_argument("policy line: time step out of range");
        p.action[line.step][line.location] = static_cast<ActionId>(line.action);
    }
    return p;
}

}  // namespace imdpsyn
