#pragma once

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ueba/core.hpp"
#include "ueba/timeutil.hpp"

namespace ueba {

using ojson = nlohmann::ordered_json;

namespace detail {

inline ojson field_to_json(const FieldValue& v) {
    return std::visit([](const auto& x) { return ojson(x); }, v);
}

inline FieldValue field_from_json(Protocol p, const std::string& key, const ojson& j) {
    const FieldType* t = meta_field_type(p, key);
    if (!t) throw Error("unknown meta key '" + key + "' for protocol " + std::string(to_string(p)));
    switch (*t) {
        case FieldType::Int:
            if (!j.is_number_integer()) throw Error("meta key '" + key + "' expects an integer");
            return j.get<std::int64_t>();
        case FieldType::Real: {
            if (!j.is_number()) throw Error("meta key '" + key + "' expects a number");
            const double d = j.get<double>();
            if (!std::isfinite(d)) throw Error("meta key '" + key + "' must be finite");
            return d;
        }
        case FieldType::Str: {
            if (!j.is_string()) throw Error("meta key '" + key + "' expects a string");
            std::string s = j.get<std::string>();
            if (s.empty()) throw Error("meta key '" + key + "' must be non-empty");
            return s;
        }
        case FieldType::Bool:
            if (!j.is_boolean()) throw Error("meta key '" + key + "' expects a boolean");
            return j.get<bool>();
    }
    throw Error("unreachable");
}

}  // namespace detail

inline ojson event_to_json(const EventRecord& e) {
    ojson j;
    j["event_ref"] = e.event_ref;
    j["ts"] = format_iso(e.ts);
    j["src_kind"] = std::string(to_string(e.source.kind));
    j["src"] = e.source.name;
    j["dst_kind"] = std::string(to_string(e.dest.kind));
    j["dst"] = e.dest.name;
    j["protocol"] = std::string(to_string(e.protocol));
    ojson meta = ojson::object();
    for (const auto& [k, v] : e.meta.kv) meta[k] = detail::field_to_json(v);
    j["meta"] = std::move(meta);
    if (e.label) j["label"] = (*e.label == Label::Hostile) ? "hostile" : "benign";
    return j;
}

inline EventRecord event_from_json(const ojson& j) {
    EventRecord e;
    e.event_ref = j.at("event_ref").get<std::string>();
    if (e.event_ref.empty()) throw Error("event_ref must be non-empty");
    e.ts = parse_iso(j.at("ts").get<std::string>());
    e.source.kind = entity_kind_from(j.at("src_kind").get<std::string>());
    e.source.name = j.at("src").get<std::string>();
    e.dest.kind = entity_kind_from(j.at("dst_kind").get<std::string>());
    e.dest.name = j.at("dst").get<std::string>();
    if (e.source.name.empty() || e.dest.name.empty()) throw Error("entity name must be non-empty");
    e.protocol = protocol_from(j.at("protocol").get<std::string>());
    for (const auto& [k, v] : j.at("meta").items()) {
        e.meta.kv.emplace_back(k, detail::field_from_json(e.protocol, k, v));
    }
    if (j.contains("label")) {
        const std::string l = j.at("label").get<std::string>();
        if (l == "hostile")
            e.label = Label::Hostile;
        else if (l == "benign")
            e.label = Label::Benign;
        else
            throw Error("unknown label '" + l + "'");
    }
    return e;
}

inline void serialize_events(std::ostream& out, std::span<const EventRecord> events) {
    for (const auto& e : events) out << event_to_json(e).dump() << '\n';
}

inline std::vector<EventRecord> deserialize_events(std::istream& in, bool* order_warning = nullptr) {
    std::vector<EventRecord> out;
    std::string line;
    std::size_t line_no = 0;
    std::int64_t prev_ts = INT64_MIN;
    if (order_warning) *order_warning = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        ojson j;
        try {
            j = ojson::parse(line);
        } catch (const std::exception& ex) {
            throw Error("line " + std::to_string(line_no) + ": malformed JSON: " + ex.what());
        }
        try {
            out.push_back(event_from_json(j));
        } catch (const std::exception& ex) {
            throw Error("line " + std::to_string(line_no) + ": " + ex.what());
        }
        // event_ref order is expected to agree with timestamps; flag, don't fail
        if (out.back().ts < prev_ts && order_warning) *order_warning = true;
        prev_ts = out.back().ts;
    }
    return out;
}

inline void write_events_file(const std::string& path, std::span<const EventRecord> events) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open '" + path + "' for writing");
    serialize_events(f, events);
}

inline std::vector<EventRecord> read_events_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open '" + path + "'");
    return deserialize_events(f);
}

}  // namespace ueba
