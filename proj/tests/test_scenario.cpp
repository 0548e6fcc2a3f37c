#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "ueba/enrichment.hpp"
#include "ueba/scenario.hpp"

using namespace ueba;

namespace {

ScenarioConfig desk_enterprise() {
    ScenarioConfig c;
    c.seed = 424242;
    c.kind = ScenarioKind::Enterprise;
    c.n_employees = 20;
    c.duration_days = 14;
    c.scale = 1.0;
    c.attack_start = c.start_ts + 11 * kDay;
    return c;
}

ScenarioConfig desk_audit() {
    ScenarioConfig c;
    c.seed = 777;
    c.kind = ScenarioKind::HostAudit;
    c.n_employees = 1;
    c.duration_days = 7;
    c.scale = 0.01;
    c.attack_start = c.start_ts + 5 * kDay;
    return c;
}

const EventRecord& find_ref(const LabeledStream& s, const std::string& ref) {
    for (const auto& e : s.events)
        if (e.event_ref == ref) return e;
    throw std::runtime_error("ref not found: " + ref);
}

std::string serialize_to_string(const LabeledStream& s) {
    std::ostringstream out;
    serialize_events(out, s.events);
    return out.str();
}

}  // namespace

TEST_CASE("identical seed and config give byte-identical output") {
    const auto a = generate_enterprise(desk_enterprise());
    const auto b = generate_enterprise(desk_enterprise());
    CHECK(serialize_to_string(a) == serialize_to_string(b));

    ScenarioConfig other = desk_enterprise();
    other.seed += 1;
    CHECK(serialize_to_string(generate_enterprise(other)) != serialize_to_string(a));
}

TEST_CASE("desk-scale enterprise stream: structure and census") {
    const auto s = generate_enterprise(desk_enterprise());

    // volume lands near the calibrated target
    CHECK(s.events.size() > 40000);
    CHECK(s.events.size() < 62000);

    // refs are unique, monotone, and agree with timestamp order
    for (std::size_t i = 1; i < s.events.size(); ++i) {
        CHECK(s.events[i].ts >= s.events[i - 1].ts);
        CHECK(s.events[i].event_ref > s.events[i - 1].event_ref);
    }

    // hostile census equals the generator's own bookkeeping
    const LabelCensus c = label_census(s.events, &s.truth);
    CHECK(c.benign + c.hostile == s.events.size());
    std::uint64_t refs = 0;
    for (const auto& [rule, v] : s.truth.hostile_refs) refs += v.size();
    CHECK(c.hostile == refs);
    CHECK(c.hostile == 10);  // 2 recon + 2 mails + 4 probes + exploit + collection
    CHECK(static_cast<double>(c.hostile) / static_cast<double>(s.events.size()) < 1e-3);

    // expected hostile rules all present
    for (const char* rule : {"recon", "bi1_mail", "bi1_twin", "bi2_scan", "bi3_exploit", "collection"})
        CHECK(s.truth.hostile_refs.count(rule) == 1);
    CHECK(s.truth.hostile_refs.at("bi2_scan").size() == 4);
    CHECK(s.truth.by_rule.at("decoy_probe") == 1);
}

TEST_CASE("twin mails: spoofed sender, near-equal attachments, distinct employees") {
    const auto s = generate_enterprise(desk_enterprise());
    const auto& m1 = find_ref(s, s.truth.hostile_refs.at("bi1_mail")[0]);
    const auto& m2 = find_ref(s, s.truth.hostile_refs.at("bi1_twin")[0]);
    CHECK(m1.meta.get_str("mail_from") == "HR@external.com");
    CHECK(m2.meta.get_str("mail_from") == "HR@external.com");
    CHECK(m1.dest.name == "EQHE1");
    CHECK(m2.dest.name == "EQHE2");
    CHECK(m1.label == Label::Hostile);
    CHECK(m2.label == Label::Hostile);
    const double a = static_cast<double>(m1.meta.get_int("attach_size"));
    const double b = static_cast<double>(m2.meta.get_int("attach_size"));
    CHECK(std::abs(a - b) / std::max(a, b) < 0.10);
    CHECK(std::abs(magnitude(a) - magnitude(b)) < 0.05);
}

TEST_CASE("scan probes: slow, distinct ports, same victim") {
    const auto s = generate_enterprise(desk_enterprise());
    const auto& refs = s.truth.hostile_refs.at("bi2_scan");
    REQUIRE(refs.size() >= 3);
    std::vector<std::int64_t> times, ports;
    for (const auto& r : refs) {
        const auto& e = find_ref(s, r);
        CHECK(e.source.name == "EQHE1");
        CHECK(e.dest.name == "EQVU1");
        times.push_back(e.ts);
        ports.push_back(e.meta.get_int("port"));
        CHECK(e.meta.get_int("port") >= 1024);
    }
    std::sort(times.begin(), times.end());
    CHECK(times.back() - times.front() >= 4 * kHour);
    std::sort(ports.begin(), ports.end());
    CHECK(std::adjacent_find(ports.begin(), ports.end()) == ports.end());
}

TEST_CASE("exploitation and collection wire the hacker through the victim") {
    const auto s = generate_enterprise(desk_enterprise());
    const auto& x = find_ref(s, s.truth.hostile_refs.at("bi3_exploit")[0]);
    CHECK(x.source.name == "EQHH");
    CHECK(x.dest.name == "EQVU1");
    const auto& col = find_ref(s, s.truth.hostile_refs.at("collection")[0]);
    CHECK(col.source.name == "EQVU1");
    CHECK(col.dest.name == "EQHE20");  // third employee host at desk size
    CHECK(col.ts > x.ts);
}

TEST_CASE("no attack start means a pure-benign stream; bad configs rejected") {
    ScenarioConfig c = desk_enterprise();
    c.attack_start.reset();
    c.duration_days = 1;
    const auto s = generate_enterprise(c);
    CHECK(label_census(s.events).hostile == 0);

    ScenarioConfig bad = desk_enterprise();
    bad.duration_days = 0;
    CHECK_THROWS_AS(generate_enterprise(bad), Error);

    ScenarioConfig outside = desk_enterprise();
    outside.attack_start = outside.start_ts + 13 * kDay;  // two-day attack overruns
    CHECK_THROWS_AS(generate_enterprise(outside), Error);

    ScenarioConfig wrong = desk_enterprise();
    wrong.kind = ScenarioKind::HostAudit;
    CHECK_THROWS_AS(generate_enterprise(wrong), Error);
}

TEST_CASE("label census rejects unlabeled records and reports the ref") {
    auto s = generate_enterprise(desk_enterprise());
    s.events[17].label.reset();
    try {
        label_census(s.events);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find(s.events[17].event_ref) != std::string::npos);
    }
    CHECK(label_census(std::vector<EventRecord>{}).benign == 0);
}

TEST_CASE("scaled-down enterprise keeps the full attack") {
    ScenarioConfig c = desk_enterprise();
    c.scale = 0.1;
    const auto s = generate_enterprise(c);
    CHECK(label_census(s.events, &s.truth).hostile == 10);
    CHECK(s.events.size() < 10000);
}

TEST_CASE("desk-scale host audit: volume, action mix, attack chain") {
    const auto s = generate_host_audit(desk_audit());
    CHECK(s.events.size() > 9000);
    CHECK(s.events.size() < 20000);

    const LabelCensus c = label_census(s.events, &s.truth);
    CHECK(c.hostile == 6);

    std::size_t syscall_class = 0;
    static const std::set<std::string> sys{"openat", "read", "write", "close", "mmap", "brk"};
    for (const auto& e : s.events)
        if (sys.count(e.meta.get_str("action_name"))) ++syscall_class;
    CHECK(static_cast<double>(syscall_class) / static_cast<double>(s.events.size()) >= 0.85);

    // the chain in order: script, download, 3 compiles, privilege change
    const auto& script = find_ref(s, s.truth.hostile_refs.at("audit_script")[0]);
    const auto& dl = find_ref(s, s.truth.hostile_refs.at("audit_download")[0]);
    const auto& expl = find_ref(s, s.truth.hostile_refs.at("audit_exploit")[0]);
    CHECK(script.meta.get_str("program_path") == "/bin/bash");
    CHECK(dl.meta.get_str("program_path") == "/usr/bin/wget");
    CHECK(dl.meta.get_str("parent_path") == "/bin/bash");
    CHECK(dl.meta.get_int("bytes") > 1000000);
    CHECK(expl.meta.get_str("action_name") == "setuid");
    REQUIRE(s.truth.hostile_refs.at("audit_compile").size() == 3);
    std::int64_t prev = script.ts;
    for (const auto& r : s.truth.hostile_refs.at("audit_compile")) {
        const auto& e = find_ref(s, r);
        CHECK(e.meta.get_str("program_path") == "/usr/bin/gcc");
        CHECK(e.ts > prev);
        prev = e.ts;
    }
    CHECK(dl.ts > script.ts);
    CHECK(expl.ts > prev);
}

TEST_CASE("vanishing background leaves exactly the six-step chain") {
    ScenarioConfig c = desk_audit();
    c.scale = 1e-9;
    // scale lower bound is (0,1]; use the smallest positive double workload
    const auto s = generate_host_audit(c);
    REQUIRE(s.events.size() == 6);
    for (std::size_t i = 1; i < s.events.size(); ++i) CHECK(s.events[i].ts >= s.events[i - 1].ts);
    CHECK(label_census(s.events).hostile == 6);
}

TEST_CASE("scenario config serializes through JSON") {
    const ScenarioConfig c = desk_enterprise();
    const ScenarioConfig back = scenario_config_from_json(scenario_config_to_json(c));
    CHECK(back.seed == c.seed);
    CHECK(back.n_employees == c.n_employees);
    CHECK(back.duration_days == c.duration_days);
    CHECK(back.scale == c.scale);
    CHECK(back.attack_start == c.attack_start);
    CHECK(back.kind == c.kind);

    const auto t = generate_enterprise(c).truth;
    const GroundTruth t2 = truth_from_json(truth_to_json(t));
    CHECK(t2.hostile == t.hostile);
    CHECK(t2.hostile_refs == t.hostile_refs);
}
