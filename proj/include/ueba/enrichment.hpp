#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ueba/core.hpp"
#include "ueba/timeutil.hpp"

namespace ueba {

// Order of magnitude of a non-negative metric.
inline double magnitude(double x) {
    if (x < 0.0) throw Error("magnitude: negative input");
    return std::log10(1.0 + x);
}

// --- sliding-window aggregates ----------------------------------------------

struct WindowSpec {
    std::int64_t duration = 0;  // seconds
    std::int64_t stride = 0;    // seconds, <= duration
};

struct AggregateValues {
    double count = 0.0;
    double volume = 0.0;
};

inline const std::vector<std::string>& default_aggregate_key(std::string_view family) {
    static const std::vector<std::string> src_dst{"src", "dst"};
    static const std::vector<std::string> program{"program_path"};
    if (family == "audit") return program;
    return src_dst;
}

inline std::string_view volume_field(std::string_view family) {
    if (family == "mail") return "attach_size";
    if (family == "flow") return "bytes";
    if (family == "audit") return "bytes";
    return "";  // osint carries no volume
}

namespace detail {

inline std::string aggregate_key_of(const EventRecord& e, const std::vector<std::string>& fields) {
    std::string key(family_of(e.protocol));
    for (const auto& f : fields) {
        key += '\x1f';
        if (f == "src") {
            key += e.source.name;
        } else if (f == "dst") {
            key += e.dest.name;
        } else if (const FieldValue* v = e.meta.find(f)) {
            if (const auto* s = std::get_if<std::string>(v))
                key += *s;
            else if (const auto* i = std::get_if<std::int64_t>(v))
                key += std::to_string(*i);
            else
                throw Error("window_aggregate: key field '" + f + "' is not a string or integer");
        } else {
            throw Error("window_aggregate: unknown key field '" + f + "'");
        }
    }
    return key;
}

}  // namespace detail

// Counts and volume sums per key over stride-aligned trailing windows.
// An event at time t is assigned the window that ends at the first stride
// boundary after t, i.e. [B - duration, B) with B = (floor(t/stride)+1)*stride,
// so repeated events in one stride slot see identical aggregates.
class WindowAggregator {
public:
    WindowAggregator() = default;

    WindowAggregator(std::span<const EventRecord> events, std::vector<WindowSpec> windows,
                     const std::map<std::string, std::vector<std::string>>& key_fields_by_family = {})
        : windows_(std::move(windows)) {
        for (const auto& w : windows_) {
            if (w.duration <= 0 || w.stride <= 0) throw Error("window_aggregate: window and stride must be > 0");
            if (w.stride > w.duration) throw Error("window_aggregate: stride exceeds window duration");
        }
        keys_.resize(events.size());
        for (std::size_t i = 0; i < events.size(); ++i) {
            const std::string fam(family_of(events[i].protocol));
            const auto it = key_fields_by_family.find(fam);
            const auto& fields = it != key_fields_by_family.end() ? it->second : default_aggregate_key(fam);
            keys_[i] = detail::aggregate_key_of(events[i], fields);
            auto& series = series_[keys_[i]];
            series.ts.push_back(events[i].ts);
            double vol = 0.0;
            const std::string_view vf = volume_field(fam);
            if (!vf.empty()) vol = static_cast<double>(events[i].meta.get_int(vf, 0));
            series.volume_prefix.push_back((series.volume_prefix.empty() ? 0.0 : series.volume_prefix.back()) + vol);
        }
        for (auto& [k, s] : series_) {
            for (std::size_t j = 1; j < s.ts.size(); ++j)
                if (s.ts[j] < s.ts[j - 1]) throw Error("window_aggregate: events must be time-sorted");
        }
    }

    std::size_t window_count() const { return windows_.size(); }

    AggregateValues at(std::size_t event_index, std::size_t window_index, std::int64_t ts) const {
        const WindowSpec& w = windows_.at(window_index);
        const auto& s = series_.at(keys_.at(event_index));
        const std::int64_t boundary = (ts >= 0 ? ts / w.stride + 1 : -((-ts - 1) / w.stride)) * w.stride;
        const std::int64_t lo = boundary - w.duration;
        const auto first = std::lower_bound(s.ts.begin(), s.ts.end(), lo);
        const auto last = std::lower_bound(s.ts.begin(), s.ts.end(), boundary);
        AggregateValues out;
        out.count = static_cast<double>(last - first);
        const std::size_t a = static_cast<std::size_t>(first - s.ts.begin());
        const std::size_t b = static_cast<std::size_t>(last - s.ts.begin());
        out.volume = (b ? s.volume_prefix[b - 1] : 0.0) - (a ? s.volume_prefix[a - 1] : 0.0);
        return out;
    }

private:
    struct Series {
        std::vector<std::int64_t> ts;
        std::vector<double> volume_prefix;
    };

    std::vector<WindowSpec> windows_;
    std::vector<std::string> keys_;
    std::map<std::string, Series> series_;
};

inline std::vector<WindowSpec> default_windows() {
    // 1h and 24h, stride = window/4
    return {{kHour, kHour / 4}, {24 * kHour, 6 * kHour}};
}

// --- conditional-probability encoding ---------------------------------------

// One observation angle: counts of outcomes under a conditioning value.
struct EncoderView {
    std::map<std::string, std::map<std::string, std::uint64_t>> counts;
    std::map<std::string, std::uint64_t> totals;
    std::set<std::string> outcomes;  // global outcome vocabulary

    void observe(const std::string& cond, const std::string& outcome) {
        ++counts[cond][outcome];
        ++totals[cond];
        outcomes.insert(outcome);
    }

    // Additive smoothing. A more frequent outcome under the same condition
    // always encodes to a strictly higher value; unseen pairs floor at
    // alpha / (N + alpha*V) with V = global vocabulary + 1.
    double probability(const std::string& cond, const std::string& outcome, double alpha) const {
        const double v = static_cast<double>(outcomes.size() + 1);
        const auto t = totals.find(cond);
        const double n_cond = t == totals.end() ? 0.0 : static_cast<double>(t->second);
        const double denom = n_cond + alpha * v;
        std::uint64_t n = 0;
        if (const auto c = counts.find(cond); c != counts.end()) {
            if (const auto o = c->second.find(outcome); o != c->second.end()) n = o->second;
        }
        return n > 0 ? static_cast<double>(n) / denom : alpha / denom;
    }
};

struct EncoderTable {
    std::string schema_id;
    double alpha = 1.0;
    EncoderView view_a;
    EncoderView view_b;
    bool fitted = false;
};

namespace detail {

struct EncoderKeys {
    std::string cond_a, out_a, cond_b, out_b;
};

inline EncoderKeys encoder_keys(const EventRecord& e) {
    EncoderKeys k;
    const std::string_view fam = family_of(e.protocol);
    if (fam == "audit") {
        const std::string action = e.meta.get_str("action_name");
        const std::string program = e.meta.get_str("program_path");
        const std::string ids = e.meta.get_str("user_ids");
        k.cond_a = program;
        k.out_a = action + '\x1f' + ids;
        k.cond_b = action;
        k.out_b = program + '\x1f' + ids;
        return k;
    }
    std::string qualifier;
    if (fam == "mail") {
        qualifier = e.meta.get_bool("has_attach") ? "att" : "plain";
    } else if (fam == "osint") {
        qualifier = e.meta.get_str("tag");
    } else {
        const std::int64_t port = e.meta.get_int("port", 0);
        qualifier = port > 0 && port < 1024 ? std::to_string(port) : "high";
    }
    k.cond_a = e.source.name;
    k.out_a = e.dest.name + '\x1f' + qualifier;
    k.cond_b = e.dest.name;
    k.out_b = e.source.name + '\x1f' + qualifier;
    return k;
}

}  // namespace detail

// Fits both observation angles over the events of one family.
inline EncoderTable fit_encoder(std::span<const EventRecord> events, std::string_view family,
                                double alpha = 1.0) {
    if (alpha <= 0.0) throw Error("fit_encoder: alpha must be > 0");
    EncoderTable t;
    t.schema_id = std::string(family) + ".v1";
    t.alpha = alpha;
    std::size_t seen = 0;
    for (const auto& e : events) {
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

// --- feature vectors ---------------------------------------------------------

struct FeatureVector {
    std::string event_ref;
    std::string schema_id;
    std::vector<double> values;
};

inline std::vector<std::string> feature_names(std::string_view family, bool raw_only = false) {
    std::vector<std::string> names;
    if (!raw_only) names.insert(names.end(), {"p_view_a", "p_view_b"});
    if (family == "mail") names.insert(names.end(), {"attach_mag", "has_attach"});
    if (family == "flow") names.insert(names.end(), {"port_mag", "bytes_mag"});
    if (family == "audit") names.insert(names.end(), {"bytes_mag"});
    names.insert(names.end(), {"hour", "weekday"});
    if (!raw_only && family != "osint") {
        if (family == "audit")
            names.insert(names.end(), {"cnt_1h", "cnt_24h"});
        else
            names.insert(names.end(), {"cnt_1h", "vol_1h", "cnt_24h", "vol_24h"});
    }
    return names;
}

// Pure function of (encoder, record, aggregates).
inline FeatureVector encode(const EncoderTable& table, const EventRecord& e,
                            const WindowAggregator* agg = nullptr, std::size_t event_index = 0,
                            bool raw_only = false) {
    const std::string_view fam = family_of(e.protocol);
    if (!raw_only && !table.fitted) throw Error("encode: encoder has not been fitted");
    if (!raw_only && table.schema_id != std::string(fam) + ".v1")
        throw Error("encode: record family '" + std::string(fam) + "' does not match encoder schema " +
                    table.schema_id);

    FeatureVector f;
    f.event_ref = e.event_ref;
    f.schema_id = std::string(fam) + (raw_only ? ".raw" : ".v1");

    if (!raw_only) {
        const auto k = detail::encoder_keys(e);
        f.values.push_back(table.view_a.probability(k.cond_a, k.out_a, table.alpha));
        f.values.push_back(table.view_b.probability(k.cond_b, k.out_b, table.alpha));
    }
    if (fam == "mail") {
        f.values.push_back(magnitude(static_cast<double>(e.meta.get_int("attach_size", 0))));
        f.values.push_back(e.meta.get_bool("has_attach") ? 1.0 : 0.0);
    } else if (fam == "flow") {
        f.values.push_back(magnitude(static_cast<double>(e.meta.get_int("port", 0))));
        f.values.push_back(magnitude(static_cast<double>(e.meta.get_int("bytes", 0))));
    } else if (fam == "audit") {
        f.values.push_back(magnitude(static_cast<double>(e.meta.get_int("bytes", 0))));
    }
    f.values.push_back(hour_of_day(e.ts));
    f.values.push_back(static_cast<double>(weekday(e.ts)));
    if (!raw_only && fam != "osint") {
        if (!agg) throw Error("encode: aggregates required for family '" + std::string(fam) + "'");
        for (std::size_t w = 0; w < agg->window_count(); ++w) {
            const AggregateValues a = agg->at(event_index, w, e.ts);
            f.values.push_back(magnitude(a.count));
            if (fam != "audit") f.values.push_back(magnitude(a.volume));
        }
    }
    return f;
}

// --- z-scaling ---------------------------------------------------------------

struct Scaler {
    std::vector<double> mean;
    std::vector<double> std_dev;

    static Scaler fit(std::span<const FeatureVector> vectors) {
        Scaler s;
        if (vectors.empty()) throw Error("Scaler: no vectors");
        const std::size_t d = vectors.front().values.size();
        s.mean.assign(d, 0.0);
        s.std_dev.assign(d, 0.0);
        for (const auto& v : vectors) {
            if (v.values.size() != d) throw Error("Scaler: inconsistent dimensions");
            for (std::size_t i = 0; i < d; ++i) s.mean[i] += v.values[i];
        }
        for (double& m : s.mean) m /= static_cast<double>(vectors.size());
        for (const auto& v : vectors)
            for (std::size_t i = 0; i < d; ++i) {
                const double dlt = v.values[i] - s.mean[i];
                s.std_dev[i] += dlt * dlt;
            }
        for (double& sd : s.std_dev) {
            sd = std::sqrt(sd / static_cast<double>(vectors.size()));
            if (sd < 1e-12) sd = 1.0;
        }
        return s;
    }

    std::vector<double> apply(const std::vector<double>& values) const {
        if (values.size() != mean.size()) throw Error("Scaler: dimension mismatch");
        std::vector<double> out(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - mean[i]) / std_dev[i];
        return out;
    }
};

// --- persistence -------------------------------------------------------------

inline nlohmann::ordered_json encoder_to_json(const EncoderTable& t) {
    nlohmann::ordered_json j;
    j["format"] = "ueba.encoder.v1";
    j["schema_id"] = t.schema_id;
    j["alpha"] = t.alpha;
    auto dump_view = [](const EncoderView& v) {
        nlohmann::ordered_json jv;
        jv["counts"] = v.counts;
        jv["outcomes"] = std::vector<std::string>(v.outcomes.begin(), v.outcomes.end());
        return jv;
    };
    j["view_a"] = dump_view(t.view_a);
    j["view_b"] = dump_view(t.view_b);
    return j;
}

inline EncoderTable encoder_from_json(const nlohmann::ordered_json& j) {
    if (j.at("format") != "ueba.encoder.v1") throw Error("encoder file: unsupported format");
    EncoderTable t;
    t.schema_id = j.at("schema_id").get<std::string>();
    t.alpha = j.at("alpha").get<double>();
    auto load_view = [](const nlohmann::ordered_json& jv, EncoderView& v) {
        v.counts = jv.at("counts").get<std::map<std::string, std::map<std::string, std::uint64_t>>>();
        for (const auto& [cond, m] : v.counts) {
            std::uint64_t total = 0;
            for (const auto& [o, n] : m) total += n;
            v.totals[cond] = total;
        }
        for (const auto& o : jv.at("outcomes")) v.outcomes.insert(o.get<std::string>());
    };
    load_view(j.at("view_a"), t.view_a);
    load_view(j.at("view_b"), t.view_b);
    t.fitted = true;
    return t;
}

inline nlohmann::ordered_json scaler_to_json(const Scaler& s) {
    nlohmann::ordered_json j;
    j["mean"] = s.mean;
    j["std_dev"] = s.std_dev;
    return j;
}

inline Scaler scaler_from_json(const nlohmann::ordered_json& j) {
    Scaler s;
    s.mean = j.at("mean").get<std::vector<double>>();
    s.std_dev = j.at("std_dev").get<std::vector<double>>();
    return s;
}

}  // namespace ueba
