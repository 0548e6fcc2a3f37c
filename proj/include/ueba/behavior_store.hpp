#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ueba/autoencoder.hpp"
#include "ueba/core.hpp"
#include "ueba/enrichment.hpp"
#include "ueba/iforest.hpp"
#include "ueba/timeutil.hpp"

namespace ueba {

struct DetectorParams {
    std::string kind = "iforest";  // or "autoencoder"
    std::size_t n_trees = 100;
    std::size_t subsample = 256;
    AeHyperparams ae;
    double ae_validation = 0.2;
};

// One trained scorer behind a uniform surface.
struct Detector {
    std::string kind = "iforest";
    IsolationForest forest;
    AutoencoderModel ae;

    double score(std::span<const double> z) const {
        if (kind == "iforest") return forest.score(z);
        return incongruity_score(ae, z);
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["kind"] = kind;
        j["model"] = kind == "iforest" ? forest_to_json(forest) : autoencoder_to_json(ae);
        return j;
    }

    static Detector from_json(const nlohmann::ordered_json& j) {
        Detector d;
        d.kind = j.at("kind").get<std::string>();
        if (d.kind == "iforest")
            d.forest = forest_from_json(j.at("model"));
        else if (d.kind == "autoencoder")
            d.ae = autoencoder_from_json(j.at("model"));
        else
            throw Error("unknown detector kind '" + d.kind + "'");
        return d;
    }
};

struct FamilyModel {
    bool raw_features = false;  // enrichment ablation: skip encoder + aggregates
    EncoderTable encoder;
    Scaler scaler;
    Detector detector;
    std::size_t n_train = 0;
};

// Immutable trained reference: one encoder + scaler + detector per data family.
struct BehaviorSnapshot {
    std::int64_t trained_at = 0;
    std::map<std::string, FamilyModel> families;

    std::optional<double> score_event(const EventRecord& e, const WindowAggregator& agg,
                                      std::size_t event_index) const {
        const std::string fam(family_of(e.protocol));
        const auto it = families.find(fam);
        if (it == families.end()) return std::nullopt;
        const FamilyModel& fm = it->second;
        const FeatureVector f = fm.raw_features ? encode(fm.encoder, e, nullptr, event_index, true)
                                                : encode(fm.encoder, e, &agg, event_index);
        return fm.detector.score(fm.scaler.apply(f.values));
    }
};

inline EncoderTable fit_encoder_indexed(std::span<const EventRecord> events,
                                        std::span<const std::size_t> idx, std::string_view family,
                                        double alpha = 1.0) {
    if (alpha <= 0.0) throw Error("fit_encoder: alpha must be > 0");
    EncoderTable t;
    t.schema_id = std::string(family) + ".v1";
    t.alpha = alpha;
    std::size_t seen = 0;
    for (const std::size_t i : idx) {
        const EventRecord& e = events[i];
        if (family_of(e.protocol) != family) continue;
        const auto k = detail::encoder_keys(e);
        t.view_a.observe(k.cond_a, k.out_a);
        t.view_b.observe(k.cond_b, k.out_b);
        ++seen;
    }
    if (seen == 0) throw Error("fit_encoder: no training events for family '" + std::string(family) + "'");
    t.fitted = true;
    return t;
}

// Fit encoder, scaler and detector for every family present in the window.
inline BehaviorSnapshot build_snapshot(std::span<const EventRecord> events, const WindowAggregator& agg,
                                       std::span<const std::size_t> window_idx,
                                       const std::map<std::string, DetectorParams>& detectors,
                                       std::uint64_t seed, std::int64_t trained_at,
                                       double encoder_alpha = 1.0, bool raw_features = false) {
    BehaviorSnapshot snap;
    snap.trained_at = trained_at;

    std::map<std::string, std::vector<std::size_t>> by_family;
    for (const std::size_t i : window_idx)
        by_family[std::string(family_of(events[i].protocol))].push_back(i);

    for (const auto& [fam, idx] : by_family) {
        FamilyModel fm;
        fm.raw_features = raw_features;
        fm.n_train = idx.size();
        if (!raw_features) {
            fm.encoder = fit_encoder_indexed(events, idx, fam, encoder_alpha);
        } else {
            fm.encoder.schema_id = fam + ".v1";  // unused in raw mode
        }
        std::vector<FeatureVector> feats;
        feats.reserve(idx.size());
        for (const std::size_t i : idx)
            feats.push_back(raw_features ? encode(fm.encoder, events[i], nullptr, i, true)
                                         : encode(fm.encoder, events[i], &agg, i));
        fm.scaler = Scaler::fit(feats);
        std::vector<std::vector<double>> z;
        z.reserve(feats.size());
        for (const auto& f : feats) z.push_back(fm.scaler.apply(f.values));

        const auto dit = detectors.find(fam);
        const DetectorParams params = dit != detectors.end() ? dit->second : DetectorParams{};
        const std::uint64_t fam_seed = seed ^ fnv1a("family:" + fam);
        if (params.kind == "iforest") {
            fm.detector.kind = "iforest";
            fm.detector.forest =
                fit_forest(z, params.n_trees, std::min<std::size_t>(params.subsample, z.size()), fam_seed);
        } else if (params.kind == "autoencoder") {
            fm.detector.kind = "autoencoder";
            fm.detector.ae = train_autoencoder(z, params.ae, fam_seed, params.ae_validation);
            calibrate(fm.detector.ae, z);
        } else {
            throw Error("unknown detector kind '" + params.kind + "' for family " + fam);
        }
        snap.families.emplace(fam, std::move(fm));
    }
    return snap;
}

// The dual behavioral reference: a learning instance refreshed on schedule
// and a deliberately stale inference instance synchronized on a lag. Scoring
// against the stale copy is what keeps slow drift visible.
class SnapshotPair {
public:
    explicit SnapshotPair(std::int64_t sync_period_s) : sync_period_(sync_period_s) {
        if (sync_period_ < 0) throw Error("SnapshotPair: sync_period must be >= 0");
    }

    void set_learning(std::shared_ptr<const BehaviorSnapshot> snap) {
        std::lock_guard<std::mutex> lock(mu_);
        learning_ = std::move(snap);
    }

    // copies learning over inference when the period has elapsed (always on
    // the first call); scoring readers never observe a half-updated snapshot
    bool sync(std::int64_t now) {
        std::lock_guard<std::mutex> lock(mu_);
        if (!learning_) return false;
        if (last_sync_ != kUnset && now - last_sync_ < sync_period_) return false;
        inference_ = learning_;
        last_sync_ = now;
        return true;
    }

    std::shared_ptr<const BehaviorSnapshot> learning() const {
        std::lock_guard<std::mutex> lock(mu_);
        return learning_;
    }

    // readers pin the returned snapshot for the duration of a scoring batch
    std::shared_ptr<const BehaviorSnapshot> inference() const {
        std::lock_guard<std::mutex> lock(mu_);
        return inference_;
    }

    std::int64_t last_sync() const {
        std::lock_guard<std::mutex> lock(mu_);
        return last_sync_;
    }

    std::int64_t sync_period() const { return sync_period_; }
    bool synced_once() const {
        std::lock_guard<std::mutex> lock(mu_);
        return last_sync_ != kUnset;
    }

    static constexpr std::int64_t kUnset = INT64_MIN;

private:
    mutable std::mutex mu_;
    std::shared_ptr<const BehaviorSnapshot> learning_;
    std::shared_ptr<const BehaviorSnapshot> inference_;
    std::int64_t sync_period_;
    std::int64_t last_sync_ = kUnset;
};

// Refit the learning snapshot on the rolling window ending at t. An empty
// window keeps the previous snapshot and reports a warning instead.
inline std::string retrain(SnapshotPair& pair, std::span<const EventRecord> events,
                           const WindowAggregator& agg, std::span<const std::size_t> window_idx,
                           const std::map<std::string, DetectorParams>& detectors, std::uint64_t seed,
                           std::int64_t t, double encoder_alpha = 1.0, bool raw_features = false) {
    for (const std::size_t i : window_idx)
        if (events[i].ts > t) throw Error("retrain: window contains events after t");
    if (window_idx.empty()) return "retrain: empty training window, keeping previous snapshot";
    pair.set_learning(std::make_shared<BehaviorSnapshot>(
        build_snapshot(events, agg, window_idx, detectors, seed, t, encoder_alpha, raw_features)));
    return "";
}

// --- persistence ---------------------------------------------------------------

inline nlohmann::ordered_json family_model_to_json(const FamilyModel& fm) {
    nlohmann::ordered_json j;
    j["raw_features"] = fm.raw_features;
    j["n_train"] = fm.n_train;
    if (!fm.raw_features) j["encoder"] = encoder_to_json(fm.encoder);
    j["scaler"] = scaler_to_json(fm.scaler);
    j["detector"] = fm.detector.to_json();
    return j;
}

inline FamilyModel family_model_from_json(const std::string& family, const nlohmann::ordered_json& j) {
    FamilyModel fm;
    fm.raw_features = j.at("raw_features").get<bool>();
    fm.n_train = j.at("n_train").get<std::size_t>();
    if (!fm.raw_features)
        fm.encoder = encoder_from_json(j.at("encoder"));
    else
        fm.encoder.schema_id = family + ".v1";
    fm.scaler = scaler_from_json(j.at("scaler"));
    fm.detector = Detector::from_json(j.at("detector"));
    return fm;
}

inline void save_snapshot(const BehaviorSnapshot& snap, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& [fam, fm] : snap.families) {
        nlohmann::ordered_json j;
        j["format"] = "ueba.family_model.v1";
        j["family"] = fam;
        j["trained_at"] = format_iso(snap.trained_at);
        j["model"] = family_model_to_json(fm);
        std::ofstream f(dir / (fam + ".json"), std::ios::binary);
        if (!f) throw Error("cannot write snapshot file for family " + fam);
        f << j.dump(2) << '\n';
    }
}

inline BehaviorSnapshot load_snapshot(const std::filesystem::path& dir, std::int64_t trained_at) {
    BehaviorSnapshot snap;
    snap.trained_at = trained_at;
    if (!std::filesystem::exists(dir)) throw Error("snapshot directory missing: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.path().extension() == ".json") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& p : files) {
        std::ifstream f(p, std::ios::binary);
        nlohmann::ordered_json j = nlohmann::ordered_json::parse(f);
        if (j.at("format") != "ueba.family_model.v1") throw Error("snapshot file: unsupported format");
        const std::string fam = j.at("family").get<std::string>();
        snap.families.emplace(fam, family_model_from_json(fam, j.at("model")));
    }
    return snap;
}

// Directory layout: <dir>/manifest.json plus learning/ and inference/ model files.
inline void save_pair(const SnapshotPair& pair, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::ordered_json m;
    m["format"] = "ueba.snapshot_pair.v1";
    m["sync_period_s"] = pair.sync_period();
    const auto learning = pair.learning();
    const auto inference = pair.inference();
    m["learning_trained_at"] = learning ? format_iso(learning->trained_at) : "";
    m["inference_trained_at"] = inference ? format_iso(inference->trained_at) : "";
    m["last_sync"] = pair.synced_once() ? format_iso(pair.last_sync()) : "";
    std::ofstream f(dir / "manifest.json", std::ios::binary);
    f << m.dump(2) << '\n';
    if (learning) save_snapshot(*learning, dir / "learning");
    if (inference) save_snapshot(*inference, dir / "inference");
}

struct LoadedPair {
    std::unique_ptr<SnapshotPair> pair;
    std::int64_t learning_trained_at = 0;
    std::int64_t inference_trained_at = 0;
};

inline LoadedPair load_pair(const std::filesystem::path& dir) {
    std::ifstream f(dir / "manifest.json", std::ios::binary);
    if (!f) throw Error("snapshot manifest missing in " + dir.string());
    const auto m = nlohmann::ordered_json::parse(f);
    if (m.at("format") != "ueba.snapshot_pair.v1") throw Error("snapshot manifest: unsupported format");
    LoadedPair out;
    out.pair = std::make_unique<SnapshotPair>(m.at("sync_period_s").get<std::int64_t>());
    // replay: install the stale inference copy first, sync at the recorded
    // time, then swap the current learning snapshot back in
    const std::string st = m.at("last_sync").get<std::string>();
    const std::string it = m.at("inference_trained_at").get<std::string>();
    if (!st.empty() && !it.empty()) {
        out.inference_trained_at = parse_iso(it);
        out.pair->set_learning(std::make_shared<BehaviorSnapshot>(
            load_snapshot(dir / "inference", out.inference_trained_at)));
        out.pair->sync(parse_iso(st));
    }
    const std::string lt = m.at("learning_trained_at").get<std::string>();
    if (!lt.empty()) {
        out.learning_trained_at = parse_iso(lt);
        out.pair->set_learning(std::make_shared<BehaviorSnapshot>(
            load_snapshot(dir / "learning", out.learning_trained_at)));
    }
    return out;
}

}  // namespace ueba
