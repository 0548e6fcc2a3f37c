#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "ueba/behavior_store.hpp"
#include "ueba/rng.hpp"

using namespace ueba;

namespace {

EventRecord flow(std::int64_t ts, const std::string& src, const std::string& dst, std::int64_t bytes,
                 int ref_counter) {
    EventRecord e;
    e.event_ref = "&" + std::to_string(100000 + ref_counter);
    e.ts = ts;
    e.source = {EntityKind::Equipment, src};
    e.dest = {EntityKind::Equipment, dst};
    e.protocol = Protocol::TCP;
    e.meta.set("port", std::int64_t{443});
    e.meta.set("bytes", bytes);
    return e;
}

// background flows from stable entities plus one source whose volume and
// active hours drift a little every day
std::vector<EventRecord> drift_stream(int days, double drift_per_day) {
    Rng rng(99);
    std::vector<EventRecord> out;
    int ref = 0;
    for (int day = 0; day < days; ++day) {
        const std::int64_t day_start = day * kDay;
        for (int i = 0; i < 300; ++i) {
            const std::string src = "EQ" + std::to_string(rng.uniform_int(1, 10));
            const double h = rng.bernoulli(0.7) ? std::clamp(rng.normal(11.0, 1.5), 6.0, 22.0)
                                                : rng.uniform(6.0, 22.0);
            out.push_back(flow(day_start + static_cast<std::int64_t>(h * 3600), src, "SRV",
                               static_cast<std::int64_t>(rng.lognormal(std::log(1e3), 0.25)), ref++));
        }
        for (int i = 0; i < 30; ++i) {
            const double mag = 3.0 + drift_per_day * day;
            const double h = std::clamp(rng.normal(10.0 + 2.0 * drift_per_day * day, 0.7), 0.0, 23.9);
            out.push_back(flow(day_start + static_cast<std::int64_t>(h * 3600), "DRIFT", "SRV",
                               static_cast<std::int64_t>(std::pow(10.0, mag) * rng.uniform(0.9, 1.1)),
                               ref++));
        }
    }
    std::sort(out.begin(), out.end(),
              [](const EventRecord& a, const EventRecord& b) { return a.ts < b.ts; });
    return out;
}

// reconstruction error grows with the distance from the learned manifold, so
// the replicator is the detector of choice for drift measurements
std::map<std::string, DetectorParams> drift_detector() {
    DetectorParams p;
    p.kind = "autoencoder";
    p.ae.max_epochs = 30;
    p.ae.patience = 5;
    p.ae.batch_size = 128;
    p.ae.dropout_rate = 0.1;
    p.ae.noise_sigma = 0.05;
    return {{"flow", p}};
}

std::vector<std::size_t> window_indices(std::span<const EventRecord> ev, std::int64_t lo, std::int64_t hi) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < ev.size(); ++i)
        if (ev[i].ts >= lo && ev[i].ts < hi) idx.push_back(i);
    return idx;
}

}  // namespace

TEST_CASE("inference stays unset until the first sync") {
    const auto ev = drift_stream(2, 0.0);
    const WindowAggregator agg(ev, default_windows());
    SnapshotPair pair(24 * kHour);
    CHECK(pair.inference() == nullptr);
    CHECK(!pair.synced_once());

    const auto idx = window_indices(ev, 0, kDay);
    const std::string warn = retrain(pair, ev, agg, idx, {}, 5, kDay);
    CHECK(warn.empty());
    REQUIRE(pair.learning() != nullptr);
    CHECK(pair.learning()->trained_at == kDay);
    CHECK(pair.inference() == nullptr);

    CHECK(pair.sync(kDay));
    REQUIRE(pair.inference() != nullptr);
    CHECK(pair.inference()->trained_at == pair.learning()->trained_at);
}

TEST_CASE("sync is a no-op before the period elapses") {
    const auto ev = drift_stream(3, 0.0);
    const WindowAggregator agg(ev, default_windows());
    SnapshotPair pair(3 * kDay);
    retrain(pair, ev, agg, window_indices(ev, 0, kDay), {}, 5, kDay);
    CHECK(pair.sync(kDay));
    retrain(pair, ev, agg, window_indices(ev, 0, 2 * kDay), {}, 5, 2 * kDay);
    CHECK(!pair.sync(2 * kDay));  // one day into a three-day period
    CHECK(pair.inference()->trained_at == kDay);
}

TEST_CASE("daily retrain with a three-day sync period keeps the lag bounded") {
    const auto ev = drift_stream(14, 0.0);
    const WindowAggregator agg(ev, default_windows());
    SnapshotPair pair(3 * kDay);
    for (int day = 1; day <= 14; ++day) {
        const std::int64_t t = day * kDay;
        retrain(pair, ev, agg, window_indices(ev, std::max<std::int64_t>(0, t - 7 * kDay), t), {}, 5, t);
        pair.sync(t);
        REQUIRE(pair.inference() != nullptr);
        CHECK(pair.inference()->trained_at <= pair.learning()->trained_at);
        CHECK(pair.learning()->trained_at - pair.inference()->trained_at <= 3 * kDay);
    }
}

TEST_CASE("empty training window keeps the previous snapshot with a warning") {
    const auto ev = drift_stream(2, 0.0);
    const WindowAggregator agg(ev, default_windows());
    SnapshotPair pair(kDay);
    retrain(pair, ev, agg, window_indices(ev, 0, kDay), {}, 5, kDay);
    const auto before = pair.learning();
    const std::string warn = retrain(pair, ev, agg, {}, {}, 5, 2 * kDay);
    CHECK(!warn.empty());
    CHECK(pair.learning() == before);
}

TEST_CASE("identical queries between syncs give identical scores") {
    const auto ev = drift_stream(4, 0.1);
    const WindowAggregator agg(ev, default_windows());
    SnapshotPair pair(10 * kDay);
    retrain(pair, ev, agg, window_indices(ev, 0, 2 * kDay), {}, 5, 2 * kDay);
    pair.sync(2 * kDay);
    const auto snap = pair.inference();
    const auto s1 = snap->score_event(ev[700], agg, 700);
    // a later retrain must not disturb the pinned inference snapshot
    retrain(pair, ev, agg, window_indices(ev, 0, 3 * kDay), {}, 6, 3 * kDay);
    const auto snap2 = pair.inference();
    const auto s2 = snap2->score_event(ev[700], agg, 700);
    REQUIRE(s1.has_value());
    CHECK(*s1 == *s2);
    CHECK(snap.get() == snap2.get());
}

TEST_CASE("retrain rejects windows reaching past t") {
    const auto ev = drift_stream(2, 0.0);
    const WindowAggregator agg(ev, default_windows());
    SnapshotPair pair(kDay);
    std::vector<std::size_t> all(ev.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    CHECK_THROWS_AS(retrain(pair, ev, agg, all, {}, 5, kDay / 2), Error);
}

TEST_CASE("boiling frog: a stale inference snapshot keeps slow drift visible") {
    const auto ev = drift_stream(30, 0.15);
    const WindowAggregator agg(ev, default_windows());
    const auto det = drift_detector();

    SnapshotPair lag0(0);           // synchronized at every retrain
    SnapshotPair lag7(7 * kDay);    // deliberately stale

    std::vector<double> ratios;
    double background_sum = 0.0;
    double drift0_sum = 0.0;
    std::size_t background_n = 0, drift_n = 0;

    for (int day = 1; day < 30; ++day) {
        const std::int64_t t = day * kDay;
        const auto window = window_indices(ev, std::max<std::int64_t>(0, t - 7 * kDay), t);
        retrain(lag0, ev, agg, window, det, 5, t);
        retrain(lag7, ev, agg, window, det, 5, t);
        lag0.sync(t);
        lag7.sync(t);
        if (day < 10) continue;  // let both references mature

        const auto s0 = lag0.inference();
        const auto s7 = lag7.inference();
        for (std::size_t i = 0; i < ev.size(); ++i) {
            if (ev[i].ts < t || ev[i].ts >= t + kDay) continue;
            const double a = *s0->score_event(ev[i], agg, i);
            const double b = *s7->score_event(ev[i], agg, i);
            if (ev[i].source.name == "DRIFT") {
                ratios.push_back(b / a);
                drift0_sum += a;
                ++drift_n;
            } else {
                background_sum += a;
                ++background_n;
            }
        }
    }
    REQUIRE(!ratios.empty());
    double mean_ratio = 0.0;
    for (double r : ratios) mean_ratio += r;
    mean_ratio /= static_cast<double>(ratios.size());
    CHECK(mean_ratio > 1.5);

    // with no lag the drift is absorbed: scores stay near the background level
    const double mean_drift0 = drift0_sum / static_cast<double>(drift_n);
    const double mean_background = background_sum / static_cast<double>(background_n);
    CHECK(mean_drift0 < 1.5 * mean_background);
}

TEST_CASE("snapshot pair persists through the directory layout") {
    const auto ev = drift_stream(3, 0.05);
    const WindowAggregator agg(ev, default_windows());
    SnapshotPair pair(2 * kDay);
    retrain(pair, ev, agg, window_indices(ev, 0, 2 * kDay), {}, 5, 2 * kDay);
    pair.sync(2 * kDay);
    retrain(pair, ev, agg, window_indices(ev, 0, 3 * kDay), {}, 5, 3 * kDay);

    const auto dir = std::filesystem::temp_directory_path() / "ueba_store_test";
    std::filesystem::remove_all(dir);
    save_pair(pair, dir);
    CHECK(std::filesystem::exists(dir / "manifest.json"));
    CHECK(std::filesystem::exists(dir / "learning"));
    CHECK(std::filesystem::exists(dir / "inference"));

    const LoadedPair back = load_pair(dir);
    REQUIRE(back.pair->learning() != nullptr);
    REQUIRE(back.pair->inference() != nullptr);
    CHECK(back.learning_trained_at == 3 * kDay);
    CHECK(back.inference_trained_at == 2 * kDay);
    for (std::size_t i = 100; i < 110; ++i) {
        CHECK(*back.pair->inference()->score_event(ev[i], agg, i) ==
              *pair.inference()->score_event(ev[i], agg, i));
        CHECK(*back.pair->learning()->score_event(ev[i], agg, i) ==
              *pair.learning()->score_event(ev[i], agg, i));
    }
    std::filesystem::remove_all(dir);
}
