#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>

#include <json.hpp>

#include "ueba/core.hpp"
#include "ueba/correlation.hpp"
#include "ueba/scenario.hpp"

namespace ueba {

struct DetectionFlags {
    bool bi1 = false;
    bool bi2 = false;
    bool bi3 = false;
    bool twin = false;
    bool collection = false;
};

struct QualityReport {
    std::optional<double> mse_hostile;  // absent when the stream has no hostile events
    std::optional<double> mse_benign;
    DetectionFlags detection;
    std::map<std::string, std::size_t> rule_hits;  // hostile rule -> refs seen in major graphs
    std::size_t graph_count = 0;
    std::size_t false_positive_graphs = 0;  // major graphs without a single hostile event
    double runtime_s = 0.0;
};

// Split mean squared error on percentiles: hostile events are expected at the
// top of the population, benign ones anywhere below the median (one-sided, so
// the abundant low scores cost nothing). Percentiles make the metric
// indifferent to the raw score scale.
inline std::pair<std::optional<double>, std::optional<double>> split_mse(
    std::span<const ScoredEvent> scored) {
    double hostile = 0.0, benign = 0.0;
    std::size_t n_hostile = 0, n_benign = 0;
    for (const auto& se : scored) {
        if (!se.event.label) throw Error("split_mse: unlabeled record " + se.event.event_ref);
        if (*se.event.label == Label::Hostile) {
            const double d = 1.0 - se.percentile;
            hostile += d * d;
            ++n_hostile;
        } else {
            const double d = std::max(0.0, se.percentile - 0.5);
            benign += d * d;
            ++n_benign;
        }
    }
    std::pair<std::optional<double>, std::optional<double>> out;
    if (n_hostile) out.first = hostile / static_cast<double>(n_hostile);
    if (n_benign) out.second = benign / static_cast<double>(n_benign);
    return out;
}

// Detection booleans are read exclusively off the exported graphs.
inline QualityReport scenario_scorecard(std::span<const PertinenceGraph> graphs,
                                        const GroundTruth& truth) {
    QualityReport r;
    r.graph_count = graphs.size();

    std::set<std::string> in_major;
    for (const auto& g : graphs)
        for (const auto& e : g.edges) in_major.insert(e.event_ref);

    std::set<std::string> all_hostile;
    for (const auto& [rule, refs] : truth.hostile_refs) {
        std::size_t hits = 0;
        for (const auto& ref : refs)
            if (in_major.count(ref)) ++hits;
        r.rule_hits[rule] = hits;
        all_hostile.insert(refs.begin(), refs.end());
    }

    auto hits = [&r](const std::string& rule) {
        const auto it = r.rule_hits.find(rule);
        return it == r.rule_hits.end() ? std::size_t{0} : it->second;
    };
    r.detection.bi1 = hits("bi1_mail") >= 1;
    r.detection.twin = hits("bi1_twin") >= 1;
    r.detection.bi2 = hits("bi2_scan") >= 3;
    r.detection.bi3 = hits("bi3_exploit") >= 1;
    r.detection.collection = hits("collection") >= 1;

    for (const auto& g : graphs) {
        bool any_hostile = false;
        for (const auto& e : g.edges) any_hostile |= all_hostile.count(e.event_ref) > 0;
        if (!any_hostile) ++r.false_positive_graphs;
    }
    return r;
}

inline nlohmann::ordered_json report_to_json(const QualityReport& r) {
    nlohmann::ordered_json j;
    j["mse_hostile"] = r.mse_hostile ? nlohmann::ordered_json(*r.mse_hostile) : nlohmann::ordered_json();
    j["mse_benign"] = r.mse_benign ? nlohmann::ordered_json(*r.mse_benign) : nlohmann::ordered_json();
    j["detection"] = {{"bi1", r.detection.bi1},
                      {"bi2", r.detection.bi2},
                      {"bi3", r.detection.bi3},
                      {"twin", r.detection.twin},
                      {"collection", r.detection.collection}};
    j["rule_hits"] = r.rule_hits;
    j["graph_count"] = r.graph_count;
    j["false_positive_graphs"] = r.false_positive_graphs;
    j["runtime_s"] = r.runtime_s;
    return j;
}

inline QualityReport report_from_json(const nlohmann::ordered_json& j) {
    QualityReport r;
    if (!j.at("mse_hostile").is_null()) r.mse_hostile = j.at("mse_hostile").get<double>();
    if (!j.at("mse_benign").is_null()) r.mse_benign = j.at("mse_benign").get<double>();
    const auto& d = j.at("detection");
    r.detection.bi1 = d.at("bi1").get<bool>();
    r.detection.bi2 = d.at("bi2").get<bool>();
    r.detection.bi3 = d.at("bi3").get<bool>();
    r.detection.twin = d.at("twin").get<bool>();
    r.detection.collection = d.at("collection").get<bool>();
    r.rule_hits = j.at("rule_hits").get<std::map<std::string, std::size_t>>();
    r.graph_count = j.at("graph_count").get<std::size_t>();
    r.false_positive_graphs = j.at("false_positive_graphs").get<std::size_t>();
    r.runtime_s = j.at("runtime_s").get<double>();
    return r;
}

inline std::string report_summary(const QualityReport& r) {
    std::string s;
    auto line = [&s](const std::string& k, const std::string& v) { s += "  " + k + ": " + v + "\n"; };
    s += "quality report\n";
    line("mse_hostile", r.mse_hostile ? std::to_string(*r.mse_hostile) : "absent (no hostile events)");
    line("mse_benign", r.mse_benign ? std::to_string(*r.mse_benign) : "absent (no benign events)");
    auto flag = [](bool b) { return b ? std::string("yes") : std::string("no"); };
    line("bi1 detected", flag(r.detection.bi1));
    line("bi2 detected", flag(r.detection.bi2));
    line("bi3 detected", flag(r.detection.bi3));
    line("twin detected", flag(r.detection.twin));
    line("collection detected", flag(r.detection.collection));
    for (const auto& [rule, hits] : r.rule_hits)
        line("rule " + rule, std::to_string(hits) + " event(s) in major graphs");
    line("major graphs", std::to_string(r.graph_count));
    line("hostile-free major graphs", std::to_string(r.false_positive_graphs));
    line("runtime_s", std::to_string(r.runtime_s));
    return s;
}

}  // namespace ueba
