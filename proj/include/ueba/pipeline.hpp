#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ueba/behavior_store.hpp"
#include "ueba/correlation.hpp"
#include "ueba/enrichment.hpp"
#include "ueba/evaluation.hpp"
#include "ueba/events_io.hpp"
#include "ueba/scenario.hpp"

namespace ueba {

class ConfigError : public Error {
public:
    using Error::Error;
};

struct PipelineParams {
    int training_window_days = 30;
    int retrain_interval_hours = 24;
    int sync_period_hours = 24;
    int score_start_day = 7;  // events before this day feed learning only
    double encoder_alpha = 1.0;
    bool raw_features = false;  // ablation: magnitudes and time features only
};

struct RunPaths {
    std::filesystem::path out_dir = "out";

    std::filesystem::path events() const { return out_dir / "events.jsonl"; }
    std::filesystem::path census() const { return out_dir / "census.json"; }
    std::filesystem::path features() const { return out_dir / "features.jsonl"; }
    std::filesystem::path scored() const { return out_dir / "scored.jsonl"; }
    std::filesystem::path graphs_json() const { return out_dir / "graphs.json"; }
    std::filesystem::path graphs_dir() const { return out_dir / "graphs"; }
    std::filesystem::path report() const { return out_dir / "report.json"; }
    std::filesystem::path snapshots() const { return out_dir / "snapshots"; }
};

struct RunConfig {
    std::uint64_t seed = 1;
    ScenarioConfig scenario;
    std::map<std::string, DetectorParams> detectors;
    PipelineParams pipeline;
    CorrelationConfig correlation;
    RunPaths paths;
};

// --- config file -----------------------------------------------------------------

namespace cfg_detail {

inline void reject_unknown(const nlohmann::ordered_json& j, const std::string& scope,
                           std::initializer_list<const char*> known) {
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* k : known) ok |= key == k;
        if (!ok) throw ConfigError("unknown config field '" + scope + key + "'");
    }
}

inline AeHyperparams ae_from_json(const nlohmann::ordered_json& j, const std::string& scope) {
    reject_unknown(j, scope,
                   {"layer_sizes", "activation", "dropout_rate", "noise_sigma", "patience",
                    "max_epochs", "batch_size", "learning_rate", "momentum", "lr_halving"});
    AeHyperparams hp;
    if (j.contains("layer_sizes")) hp.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
    if (j.contains("activation")) hp.activation = activation_from(j.at("activation").get<std::string>());
    if (j.contains("dropout_rate")) hp.dropout_rate = j.at("dropout_rate").get<double>();
    if (j.contains("noise_sigma")) hp.noise_sigma = j.at("noise_sigma").get<double>();
    if (j.contains("patience")) hp.patience = j.at("patience").get<int>();
    if (j.contains("max_epochs")) hp.max_epochs = j.at("max_epochs").get<int>();
    if (j.contains("batch_size")) hp.batch_size = j.at("batch_size").get<std::size_t>();
    if (j.contains("learning_rate")) hp.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("momentum")) hp.momentum = j.at("momentum").get<double>();
    if (j.contains("lr_halving")) hp.lr_halving = j.at("lr_halving").get<bool>();
    return hp;
}

}  // namespace cfg_detail

inline RunConfig run_config_from_json(const nlohmann::ordered_json& j) {
    cfg_detail::reject_unknown(j, "",
                               {"seed", "out_dir", "scenario", "detectors", "pipeline", "correlation"});
    RunConfig c;
    try {
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("out_dir")) c.paths.out_dir = j.at("out_dir").get<std::string>();
        if (j.contains("scenario")) {
            const auto& js = j.at("scenario");
            cfg_detail::reject_unknown(js, "scenario.",
                                       {"seed", "scenario_kind", "n_employees", "duration_days", "scale",
                                        "start", "attack_start"});
            c.scenario = scenario_config_from_json(js);
            if (!js.contains("seed")) c.scenario.seed = c.seed;
        }
        if (j.contains("detectors")) {
            for (const auto& [fam, jd] : j.at("detectors").items()) {
                if (fam != "mail" && fam != "flow" && fam != "osint" && fam != "audit")
                    throw ConfigError("unknown config field 'detectors." + fam + "'");
                cfg_detail::reject_unknown(jd, "detectors." + fam + ".",
                                           {"kind", "n_trees", "subsample", "ae", "validation_fraction"});
                DetectorParams p;
                if (jd.contains("kind")) p.kind = jd.at("kind").get<std::string>();
                if (p.kind != "iforest" && p.kind != "autoencoder")
                    throw ConfigError("bad value for 'detectors." + fam + ".kind'");
                if (jd.contains("n_trees")) p.n_trees = jd.at("n_trees").get<std::size_t>();
                if (jd.contains("subsample")) p.subsample = jd.at("subsample").get<std::size_t>();
                if (jd.contains("ae")) p.ae = cfg_detail::ae_from_json(jd.at("ae"), "detectors." + fam + ".ae.");
                if (jd.contains("validation_fraction"))
                    p.ae_validation = jd.at("validation_fraction").get<double>();
                c.detectors[fam] = p;
            }
        }
        if (j.contains("pipeline")) {
            const auto& jp = j.at("pipeline");
            cfg_detail::reject_unknown(jp, "pipeline.",
                                       {"training_window_days", "retrain_interval_hours",
                                        "sync_period_hours", "score_start_day", "encoder_alpha",
                                        "raw_features"});
            if (jp.contains("training_window_days"))
                c.pipeline.training_window_days = jp.at("training_window_days").get<int>();
            if (jp.contains("retrain_interval_hours"))
                c.pipeline.retrain_interval_hours = jp.at("retrain_interval_hours").get<int>();
            if (jp.contains("sync_period_hours"))
                c.pipeline.sync_period_hours = jp.at("sync_period_hours").get<int>();
            if (jp.contains("score_start_day"))
                c.pipeline.score_start_day = jp.at("score_start_day").get<int>();
            if (jp.contains("encoder_alpha")) c.pipeline.encoder_alpha = jp.at("encoder_alpha").get<double>();
            if (jp.contains("raw_features")) c.pipeline.raw_features = jp.at("raw_features").get<bool>();
        }
        if (j.contains("correlation")) {
            const auto& jc = j.at("correlation");
            cfg_detail::reject_unknown(jc, "correlation.",
                                       {"numeric_tolerance", "exact_destination", "link_horizon_days",
                                        "seed_percentile", "suspect_percentile", "theta_hi", "theta_lo",
                                        "tau_forget_days", "hub_limit", "pair_limit", "growth_depth",
                                        "singletons_only"});
            auto& cc = c.correlation;
            if (jc.contains("numeric_tolerance")) cc.numeric_tolerance = jc.at("numeric_tolerance").get<double>();
            if (jc.contains("exact_destination")) cc.exact_destination = jc.at("exact_destination").get<bool>();
            if (jc.contains("link_horizon_days"))
                cc.link_horizon_s = jc.at("link_horizon_days").get<std::int64_t>() * kDay;
            if (jc.contains("seed_percentile")) cc.seed_percentile = jc.at("seed_percentile").get<double>();
            if (jc.contains("suspect_percentile"))
                cc.suspect_percentile = jc.at("suspect_percentile").get<double>();
            if (jc.contains("theta_hi")) cc.theta_hi = jc.at("theta_hi").get<double>();
            if (jc.contains("theta_lo")) cc.theta_lo = jc.at("theta_lo").get<double>();
            if (jc.contains("tau_forget_days"))
                cc.tau_forget_s = jc.at("tau_forget_days").get<std::int64_t>() * kDay;
            if (jc.contains("hub_limit")) cc.hub_limit = jc.at("hub_limit").get<int>();
            if (jc.contains("pair_limit")) cc.pair_limit = jc.at("pair_limit").get<int>();
            if (jc.contains("growth_depth")) cc.growth_depth = jc.at("growth_depth").get<int>();
            if (jc.contains("singletons_only")) cc.singletons_only = jc.at("singletons_only").get<bool>();
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("bad config: ") + e.what());
    }
    return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open config file '" + path.string() + "'");
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(f);
    } catch (const std::exception& e) {
        throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
    return run_config_from_json(j);
}

// --- scored-event files -------------------------------------------------------------

inline void write_scored_file(const std::filesystem::path& path, std::span<const ScoredEvent> scored) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open '" + path.string() + "' for writing");
    for (const auto& se : scored) {
        ojson j = event_to_json(se.event);
        j["score"] = se.score;
        j["percentile"] = se.percentile;
        f << j.dump() << '\n';
    }
}

inline std::vector<ScoredEvent> read_scored_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open '" + path.string() + "'");
    std::vector<ScoredEvent> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            ojson j = ojson::parse(line);
            ScoredEvent se;
            const double score = j.at("score").get<double>();
            const double pct = j.at("percentile").get<double>();
            j.erase("score");
            j.erase("percentile");
            se.event = event_from_json(j);
            se.score = score;
            se.percentile = pct;
            out.push_back(std::move(se));
        } catch (const std::exception& e) {
            throw Error("scored file line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

// percentiles are ranked within each data family; raw scales across detector
// instances are not comparable
inline void assign_family_percentiles(std::vector<ScoredEvent>& scored) {
    std::map<std::string, std::vector<double>> by_family;
    for (const auto& se : scored)
        by_family[std::string(family_of(se.event.protocol))].push_back(se.score);
    std::map<std::string, ScorePopulation> pops;
    for (auto& [fam, scores] : by_family) pops.emplace(fam, ScorePopulation(std::move(scores)));
    for (auto& se : scored)
        se.percentile = pops.at(std::string(family_of(se.event.protocol))).rank(se.score);
}

// --- stages ---------------------------------------------------------------------------

inline LabeledStream stage_gen(const RunConfig& cfg) {
    LabeledStream stream = generate_scenario(cfg.scenario);
    std::filesystem::create_directories(cfg.paths.out_dir);
    write_events_file(cfg.paths.events().string(), stream.events);
    std::ofstream f(cfg.paths.census(), std::ios::binary);
    nlohmann::ordered_json j = truth_to_json(stream.truth);
    const LabelCensus census = label_census(stream.events, &stream.truth);
    j["census"] = {{"benign", census.benign}, {"hostile", census.hostile}, {"total", stream.events.size()}};
    f << j.dump(2) << '\n';
    return stream;
}

// Fit encoders over the given events and write the encoded feature vectors:
// the inspection surface for the enrichment stage.
inline void stage_enrich(const RunConfig& cfg) {
    const auto events = read_events_file(cfg.paths.events().string());
    const WindowAggregator agg(events, default_windows());
    std::map<std::string, EncoderTable> encoders;
    for (const auto& e : events) {
        const std::string fam(family_of(e.protocol));
        if (!encoders.count(fam)) encoders.emplace(fam, fit_encoder(events, fam, cfg.pipeline.encoder_alpha));
    }
    std::ofstream f(cfg.paths.features(), std::ios::binary);
    if (!f) throw Error("cannot open features file for writing");
    for (std::size_t i = 0; i < events.size(); ++i) {
        const std::string fam(family_of(events[i].protocol));
        const FeatureVector fv = cfg.pipeline.raw_features
                                     ? encode(encoders.at(fam), events[i], nullptr, i, true)
                                     : encode(encoders.at(fam), events[i], &agg, i);
        ojson j;
        j["event_ref"] = fv.event_ref;
        j["schema_id"] = fv.schema_id;
        j["values"] = fv.values;
        f << j.dump() << '\n';
    }
    std::filesystem::create_directories(cfg.paths.out_dir / "encoders");
    for (const auto& [fam, enc] : encoders) {
        std::ofstream ef(cfg.paths.out_dir / "encoders" / (fam + ".json"), std::ios::binary);
        ef << encoder_to_json(enc).dump(2) << '\n';
    }
}

namespace pipe_detail {

inline std::pair<std::size_t, std::size_t> window_range(std::span<const EventRecord> events,
                                                        std::int64_t lo, std::int64_t hi) {
    const auto begin = std::lower_bound(events.begin(), events.end(), lo,
                                        [](const EventRecord& e, std::int64_t t) { return e.ts < t; });
    const auto end = std::lower_bound(events.begin(), events.end(), hi,
                                      [](const EventRecord& e, std::int64_t t) { return e.ts < t; });
    return {static_cast<std::size_t>(begin - events.begin()), static_cast<std::size_t>(end - events.begin())};
}

}  // namespace pipe_detail

// One-shot training on the trailing window; composes with `sync` and `infer`.
inline void stage_train(const RunConfig& cfg, std::optional<std::int64_t> t_end = std::nullopt) {
    const auto events = read_events_file(cfg.paths.events().string());
    if (events.empty()) throw Error("train: no events");
    const WindowAggregator agg(events, default_windows());
    const std::int64_t t = t_end.value_or(events.back().ts + 1);
    const auto [lo, hi] =
        pipe_detail::window_range(events, t - cfg.pipeline.training_window_days * kDay, t);
    std::vector<std::size_t> idx(hi - lo);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = lo + i;

    std::unique_ptr<SnapshotPair> pair;
    if (std::filesystem::exists(cfg.paths.snapshots() / "manifest.json")) {
        pair = std::move(load_pair(cfg.paths.snapshots()).pair);
    } else {
        pair = std::make_unique<SnapshotPair>(cfg.pipeline.sync_period_hours * kHour);
    }
    const std::string warn = retrain(*pair, events, agg, idx, cfg.detectors,
                                     cfg.seed ^ fnv1a("retrain:" + std::to_string(t)), t,
                                     cfg.pipeline.encoder_alpha, cfg.pipeline.raw_features);
    if (!warn.empty()) throw Error(warn);
    save_pair(*pair, cfg.paths.snapshots());
}

inline bool stage_sync(const RunConfig& cfg, std::optional<std::int64_t> now = std::nullopt) {
    LoadedPair loaded = load_pair(cfg.paths.snapshots());
    const std::int64_t t = now.value_or(loaded.learning_trained_at);
    const bool synced = loaded.pair->sync(t);
    save_pair(*loaded.pair, cfg.paths.snapshots());
    return synced;
}

// Score a whole event file against the current inference snapshot.
inline std::vector<ScoredEvent> stage_infer(const RunConfig& cfg) {
    const auto events = read_events_file(cfg.paths.events().string());
    const WindowAggregator agg(events, default_windows());
    LoadedPair loaded = load_pair(cfg.paths.snapshots());
    const auto snap = loaded.pair->inference();
    if (!snap) throw Error("infer: inference snapshot is unset; run sync first");
    std::vector<ScoredEvent> scored;
    scored.reserve(events.size());
    for (std::size_t i = 0; i < events.size(); ++i) {
        const auto s = snap->score_event(events[i], agg, i);
        if (!s) continue;  // family absent from the reference
        ScoredEvent se;
        se.event = events[i];
        se.score = *s;
        scored.push_back(std::move(se));
    }
    assign_family_percentiles(scored);
    write_scored_file(cfg.paths.scored(), scored);
    return scored;
}

inline std::vector<PertinenceGraph> stage_correlate(const RunConfig& cfg,
                                                    ExtractionStats* stats = nullptr) {
    const auto scored = read_scored_file(cfg.paths.scored());
    std::int64_t now = 0;
    for (const auto& se : scored) now = std::max(now, se.event.ts);
    CorrelationEngine engine(cfg.correlation);
    const auto graphs = engine.extract(scored, now, stats);
    std::ofstream f(cfg.paths.graphs_json(), std::ios::binary);
    f << graphs_to_json(graphs).dump(2) << '\n';
    std::filesystem::create_directories(cfg.paths.graphs_dir());
    for (const auto& g : graphs) {
        std::ofstream df(cfg.paths.graphs_dir() / (g.id + ".dot"), std::ios::binary);
        df << graph_to_dot(g);
    }
    return graphs;
}

inline QualityReport stage_evaluate(const RunConfig& cfg, double runtime_s = 0.0) {
    const auto scored = read_scored_file(cfg.paths.scored());
    std::ifstream gf(cfg.paths.graphs_json(), std::ios::binary);
    if (!gf) throw Error("evaluate: graphs file missing; run correlate first");
    const auto graphs = graphs_from_json(nlohmann::ordered_json::parse(gf));
    std::ifstream cf(cfg.paths.census(), std::ios::binary);
    if (!cf) throw Error("evaluate: census file missing; run gen first");
    const GroundTruth truth = truth_from_json(nlohmann::ordered_json::parse(cf));

    QualityReport r = scenario_scorecard(graphs, truth);
    const auto [h, b] = split_mse(scored);
    r.mse_hostile = h;
    r.mse_benign = b;
    r.runtime_s = runtime_s;
    std::ofstream rf(cfg.paths.report(), std::ios::binary);
    rf << report_to_json(r).dump(2) << '\n';
    return r;
}

inline void stage_export(const RunConfig& cfg, const std::string& format,
                         const std::filesystem::path& out) {
    std::ifstream gf(cfg.paths.graphs_json(), std::ios::binary);
    if (!gf) throw Error("export: graphs file missing; run correlate first");
    const auto graphs = graphs_from_json(nlohmann::ordered_json::parse(gf));
    std::ofstream f(out, std::ios::binary);
    if (!f) throw Error("cannot open '" + out.string() + "' for writing");
    if (format == "json") {
        f << graphs_to_json(graphs).dump(2) << '\n';
    } else if (format == "dot") {
        for (const auto& g : graphs) f << graph_to_dot(g) << '\n';
    } else {
        throw Error("export_graph: unknown format '" + format + "'");
    }
}

// The whole run: generate, then walk the retrain/sync schedule scoring each
// slot against the inference snapshot current at its start, then correlate,
// evaluate and export. Deterministic for a fixed config and seed.
inline QualityReport run_pipeline(const RunConfig& cfg) {
    const auto wall_start = std::chrono::steady_clock::now();

    const LabeledStream stream = stage_gen(cfg);
    const auto& events = stream.events;
    const WindowAggregator agg(events, default_windows());

    SnapshotPair pair(cfg.pipeline.sync_period_hours * kHour);
    const std::int64_t data_start = cfg.scenario.start_ts;
    const std::int64_t data_end = data_start + cfg.scenario.duration_days * kDay;
    const std::int64_t interval = cfg.pipeline.retrain_interval_hours * kHour;
    const std::int64_t score_from = data_start + cfg.pipeline.score_start_day * kDay;

    std::vector<ScoredEvent> scored;
    for (std::int64_t t = data_start + interval; t < data_end + interval; t += interval) {
        const auto [wlo, whi] =
            pipe_detail::window_range(events, t - cfg.pipeline.training_window_days * kDay, t);
        std::vector<std::size_t> idx(whi - wlo);
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = wlo + i;
        retrain(pair, events, agg, idx, cfg.detectors, cfg.seed ^ fnv1a("retrain:" + std::to_string(t)),
                t, cfg.pipeline.encoder_alpha, cfg.pipeline.raw_features);
        pair.sync(t);
        if (t >= data_end) break;

        const auto snap = pair.inference();
        if (!snap) continue;
        const std::int64_t slot_end = std::min(t + interval, data_end);
        const auto [slo, shi] = pipe_detail::window_range(events, std::max(t, score_from), slot_end);
        for (std::size_t i = slo; i < shi; ++i) {
            const auto s = snap->score_event(events[i], agg, i);
            if (!s) continue;
            ScoredEvent se;
            se.event = events[i];
            se.score = *s;
            scored.push_back(std::move(se));
        }
    }
    assign_family_percentiles(scored);
    write_scored_file(cfg.paths.scored(), scored);
    save_pair(pair, cfg.paths.snapshots());

    CorrelationEngine engine(cfg.correlation);
    const auto graphs = engine.extract(scored, data_end);
    {
        std::ofstream f(cfg.paths.graphs_json(), std::ios::binary);
        f << graphs_to_json(graphs).dump(2) << '\n';
        std::filesystem::create_directories(cfg.paths.graphs_dir());
        for (const auto& g : graphs) {
            std::ofstream df(cfg.paths.graphs_dir() / (g.id + ".dot"), std::ios::binary);
            df << graph_to_dot(g);
        }
    }
    const double runtime =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
    return stage_evaluate(cfg, runtime);
}

}  // namespace ueba
