#include <catch2/catch_amalgamated.hpp>

#include "ueba/evaluation.hpp"

using namespace ueba;

namespace {

ScoredEvent labeled(const std::string& ref, double pct, Label l) {
    ScoredEvent se;
    se.event.event_ref = ref;
    se.event.ts = 0;
    se.event.source = {EntityKind::Equipment, "A"};
    se.event.dest = {EntityKind::Equipment, "B"};
    se.event.protocol = Protocol::TCP;
    se.event.label = l;
    se.score = 100.0 * pct;
    se.percentile = pct;
    return se;
}

PertinenceGraph graph_with(const std::vector<std::string>& refs) {
    PertinenceGraph g;
    g.id = "G1";
    for (const auto& r : refs) {
        GraphEdge e;
        e.event_ref = r;
        e.from = {EntityKind::Equipment, "A"};
        e.to = {EntityKind::Equipment, "B"};
        e.verdict = Verdict::Incongru;
        g.edges.push_back(e);
    }
    return g;
}

}  // namespace

TEST_CASE("split mse: perfect oracle scores zero on both sides") {
    std::vector<ScoredEvent> ev{labeled("&1", 1.0, Label::Hostile), labeled("&2", 0.3, Label::Benign),
                                labeled("&3", 0.5, Label::Benign)};
    const auto [h, b] = split_mse(ev);
    REQUIRE(h.has_value());
    REQUIRE(b.has_value());
    CHECK(*h == 0.0);
    CHECK(*b == 0.0);
}

TEST_CASE("split mse: hand-computed case") {
    std::vector<ScoredEvent> ev{labeled("&1", 0.8, Label::Hostile), labeled("&2", 0.6, Label::Benign)};
    const auto [h, b] = split_mse(ev);
    CHECK(*h == Catch::Approx(0.04));
    CHECK(*b == Catch::Approx(0.01));
}

TEST_CASE("split mse: absent sides and unlabeled rejection") {
    std::vector<ScoredEvent> all_benign{labeled("&1", 0.2, Label::Benign)};
    const auto [h, b] = split_mse(all_benign);
    CHECK(!h.has_value());
    CHECK(b.has_value());

    std::vector<ScoredEvent> bad{labeled("&1", 0.2, Label::Benign)};
    bad[0].event.label.reset();
    CHECK_THROWS_AS(split_mse(bad), Error);
}

TEST_CASE("split mse reads percentiles, not raw scores") {
    std::vector<ScoredEvent> ev{labeled("&1", 0.8, Label::Hostile), labeled("&2", 0.6, Label::Benign)};
    auto scaled = ev;
    for (auto& se : scaled) se.score *= 1000.0;
    CHECK(split_mse(ev) == split_mse(scaled));
}

TEST_CASE("scorecard: empty graph list means nothing detected") {
    GroundTruth truth;
    truth.hostile_refs["bi1_mail"] = {"&10"};
    truth.hostile_refs["bi2_scan"] = {"&11", "&12", "&13"};
    const QualityReport r = scenario_scorecard({}, truth);
    CHECK(!r.detection.bi1);
    CHECK(!r.detection.bi2);
    CHECK(r.graph_count == 0);
    CHECK(r.false_positive_graphs == 0);
}

TEST_CASE("scorecard: detections and false-positive graphs") {
    GroundTruth truth;
    truth.hostile_refs["bi1_mail"] = {"&10"};
    truth.hostile_refs["bi1_twin"] = {"&14"};
    truth.hostile_refs["bi2_scan"] = {"&11", "&12", "&13", "&15"};
    truth.hostile_refs["bi3_exploit"] = {"&20"};
    truth.hostile_refs["collection"] = {"&21"};

    std::vector<PertinenceGraph> graphs{
        graph_with({"&10", "&11", "&12", "&13", "&20", "&21", "&14", "&99"}),
        graph_with({"&777", "&778"}),  // no hostile content
    };
    const QualityReport r = scenario_scorecard(graphs, truth);
    CHECK(r.detection.bi1);
    CHECK(r.detection.bi2);  // three of four probes present
    CHECK(r.detection.bi3);
    CHECK(r.detection.twin);
    CHECK(r.detection.collection);
    CHECK(r.rule_hits.at("bi2_scan") == 3);
    CHECK(r.graph_count == 2);
    CHECK(r.false_positive_graphs == 1);

    // two probes are not enough for bi2
    std::vector<PertinenceGraph> thin{graph_with({"&10", "&11", "&12"})};
    CHECK(!scenario_scorecard(thin, truth).detection.bi2);
}

TEST_CASE("quality report serializes through JSON") {
    QualityReport r;
    r.mse_benign = 0.0125;
    r.detection.bi3 = true;
    r.rule_hits["bi3_exploit"] = 1;
    r.graph_count = 1;
    r.runtime_s = 12.5;
    const QualityReport back = report_from_json(report_to_json(r));
    CHECK(!back.mse_hostile.has_value());
    CHECK(back.mse_benign == r.mse_benign);
    CHECK(back.detection.bi3);
    CHECK(back.rule_hits == r.rule_hits);
    CHECK(report_to_json(back).dump() == report_to_json(r).dump());
    CHECK(report_summary(r).find("bi3 detected: yes") != std::string::npos);
}
