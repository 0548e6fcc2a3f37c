#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace ueba {

// Error type for contract violations surfaced to callers (bad input data,
// malformed files, misuse of an API). Internal logic errors use asserts.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

enum class EntityKind { Equipment, Person, MailAddress, ExternalHost };

struct EntityId {
    EntityKind kind{};
    std::string name;

    auto operator<=>(const EntityId&) const = default;
};

inline std::string_view to_string(EntityKind k) {
    switch (k) {
        case EntityKind::Equipment: return "equipment";
        case EntityKind::Person: return "person";
        case EntityKind::MailAddress: return "mail_address";
        case EntityKind::ExternalHost: return "external_host";
    }
    return "equipment";
}

inline EntityKind entity_kind_from(std::string_view s) {
    if (s == "equipment") return EntityKind::Equipment;
    if (s == "person") return EntityKind::Person;
    if (s == "mail_address") return EntityKind::MailAddress;
    if (s == "external_host") return EntityKind::ExternalHost;
    throw Error("unknown entity kind '" + std::string(s) + "'");
}

enum class Protocol { SMTP, TCP, UDP, OSINT, AUDIT };

inline std::string_view to_string(Protocol p) {
    switch (p) {
        case Protocol::SMTP: return "SMTP";
        case Protocol::TCP: return "TCP";
        case Protocol::UDP: return "UDP";
        case Protocol::OSINT: return "OSINT";
        case Protocol::AUDIT: return "AUDIT";
    }
    return "TCP";
}

inline Protocol protocol_from(std::string_view s) {
    if (s == "SMTP") return Protocol::SMTP;
    if (s == "TCP") return Protocol::TCP;
    if (s == "UDP") return Protocol::UDP;
    if (s == "OSINT") return Protocol::OSINT;
    if (s == "AUDIT") return Protocol::AUDIT;
    throw Error("unknown protocol '" + std::string(s) + "'");
}

// Detector instances are multi-instantiated per data family; protocols map
// onto families, flows sharing one model.
inline std::string_view family_of(Protocol p) {
    switch (p) {
        case Protocol::SMTP: return "mail";
        case Protocol::TCP:
        case Protocol::UDP: return "flow";
        case Protocol::OSINT: return "osint";
        case Protocol::AUDIT: return "audit";
    }
    return "flow";
}

enum class Label { Benign, Hostile };

enum class Verdict { Normal, NormalContributing, Suspect, Incongru };

inline std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::Normal: return "normal";
        case Verdict::NormalContributing: return "normal_contributing";
        case Verdict::Suspect: return "suspect";
        case Verdict::Incongru: return "incongru";
    }
    return "normal";
}

inline Verdict verdict_from(std::string_view s) {
    if (s == "normal") return Verdict::Normal;
    if (s == "normal_contributing") return Verdict::NormalContributing;
    if (s == "suspect") return Verdict::Suspect;
    if (s == "incongru") return Verdict::Incongru;
    throw Error("unknown verdict '" + std::string(s) + "'");
}

using FieldValue = std::variant<std::int64_t, double, std::string, bool>;

// Insertion-ordered map so serialization is stable.
struct MetaMap {
    std::vector<std::pair<std::string, FieldValue>> kv;

    const FieldValue* find(std::string_view key) const {
        for (const auto& [k, v] : kv)
            if (k == key) return &v;
        return nullptr;
    }

    void set(std::string key, FieldValue v) {
        for (auto& [k, old] : kv) {
            if (k == key) {
                old = std::move(v);
                return;
            }
        }
        kv.emplace_back(std::move(key), std::move(v));
    }

    std::int64_t get_int(std::string_view key, std::int64_t fallback = 0) const {
        const FieldValue* v = find(key);
        if (!v) return fallback;
        if (const auto* i = std::get_if<std::int64_t>(v)) return *i;
        if (const auto* d = std::get_if<double>(v)) return static_cast<std::int64_t>(*d);
        return fallback;
    }

    std::string get_str(std::string_view key, std::string fallback = "") const {
        const FieldValue* v = find(key);
        if (!v) return fallback;
        if (const auto* s = std::get_if<std::string>(v)) return *s;
        return fallback;
    }

    bool get_bool(std::string_view key, bool fallback = false) const {
        const FieldValue* v = find(key);
        if (!v) return fallback;
        if (const auto* b = std::get_if<bool>(v)) return *b;
        return fallback;
    }

    bool operator==(const MetaMap&) const = default;
};

// One observed n-uplet of metrics: a network flow or a host audit event.
struct EventRecord {
    std::string event_ref;  // "&nnn", unique, monotone in emission order
    std::int64_t ts = 0;    // UTC epoch seconds
    EntityId source;
    EntityId dest;
    Protocol protocol = Protocol::TCP;
    MetaMap meta;
    std::optional<Label> label;  // present iff the record came from the generator

    bool operator==(const EventRecord&) const = default;
};

struct ScoredEvent {
    EventRecord event;
    double score = 0.0;       // raw incongruity, unitless, >= 0
    double percentile = 0.0;  // fraction of the scored population <= score
    Verdict verdict = Verdict::Normal;
};

struct TimeWindow {
    std::int64_t start = 0;
    std::int64_t duration = 0;  // seconds, > 0

    TimeWindow() = default;
    TimeWindow(std::int64_t s, std::int64_t d) : start(s), duration(d) {
        if (d <= 0) throw Error("TimeWindow: duration must be > 0");
    }
    std::int64_t end() const { return start + duration; }
};

// --- meta schema -----------------------------------------------------------

enum class FieldType { Int, Real, Str, Bool };

// Declared meta keys per protocol; ingestion rejects anything else.
inline const std::vector<std::pair<std::string, FieldType>>& meta_schema(Protocol p) {
    static const std::vector<std::pair<std::string, FieldType>> smtp = {
        {"has_attach", FieldType::Bool},
        {"attach_size", FieldType::Int},
        {"mail_from", FieldType::Str},
        {"mail_to", FieldType::Str},
    };
    static const std::vector<std::pair<std::string, FieldType>> flow = {
        {"port", FieldType::Int},
        {"bytes", FieldType::Int},
    };
    static const std::vector<std::pair<std::string, FieldType>> osint = {
        {"tag", FieldType::Str},
    };
    static const std::vector<std::pair<std::string, FieldType>> audit = {
        {"action_name", FieldType::Str},
        {"program_path", FieldType::Str},
        {"user_ids", FieldType::Str},
        {"parent_path", FieldType::Str},
        {"bytes", FieldType::Int},
    };
    switch (p) {
        case Protocol::SMTP: return smtp;
        case Protocol::TCP:
        case Protocol::UDP: return flow;
        case Protocol::OSINT: return osint;
        case Protocol::AUDIT: return audit;
    }
    return flow;
}

inline const FieldType* meta_field_type(Protocol p, std::string_view key) {
    for (const auto& [k, t] : meta_schema(p))
        if (k == key) return &t;
    return nullptr;
}

// --- percentiles -----------------------------------------------------------

// Fraction of the population <= x. The "<=" convention puts the maximum at
// exactly 1.0.
inline double percentile_rank(std::span<const double> scores, double x) {
    if (scores.empty()) throw Error("percentile_rank: empty population");
    std::size_t le = 0;
    for (double s : scores)
        if (s <= x) ++le;
    return static_cast<double>(le) / static_cast<double>(scores.size());
}

// Sorted copy of a score population for repeated rank queries.
class ScorePopulation {
public:
    ScorePopulation() = default;
    explicit ScorePopulation(std::vector<double> scores) : sorted_(std::move(scores)) {
        std::sort(sorted_.begin(), sorted_.end());
    }

    bool empty() const { return sorted_.empty(); }
    std::size_t size() const { return sorted_.size(); }

    double rank(double x) const {
        if (sorted_.empty()) throw Error("percentile_rank: empty population");
        const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
        return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
    }

private:
    std::vector<double> sorted_;
};

}  // namespace ueba
