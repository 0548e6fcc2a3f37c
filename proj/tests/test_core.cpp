#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "ueba/core.hpp"
#include "ueba/events_io.hpp"
#include "ueba/rng.hpp"
#include "ueba/timeutil.hpp"

using namespace ueba;

TEST_CASE("percentile_rank basics") {
    std::vector<double> scores{1, 2, 3, 4};
    CHECK(percentile_rank(scores, 4) == 1.0);
    CHECK(percentile_rank(scores, 0) == 0.0);
    CHECK(percentile_rank(scores, 2) == 0.5);
    CHECK_THROWS_AS(percentile_rank(std::vector<double>{}, 1.0), Error);
}

TEST_CASE("percentile_rank is monotone and matches the sorted population") {
    Rng rng(42);
    std::vector<double> scores;
    for (int i = 0; i < 500; ++i) scores.push_back(rng.normal(0.5, 0.2));
    ScorePopulation pop(scores);
    double prev = 0.0;
    for (double x = -1.0; x <= 2.0; x += 0.01) {
        const double r = percentile_rank(scores, x);
        CHECK(r >= prev);
        CHECK(r == pop.rank(x));
        prev = r;
    }
}

TEST_CASE("timestamps format and parse round-trip") {
    const std::int64_t t = parse_iso("2017-05-02T09:08:19Z");
    CHECK(format_iso(t) == "2017-05-02T09:08:19Z");
    CHECK(hour_of_day(t) == Catch::Approx(9.0 + 8.0 / 60 + 19.0 / 3600));
    CHECK(weekday(t) == 1);  // a Tuesday
    CHECK_THROWS_AS(parse_iso("not a date"), std::invalid_argument);
    CHECK_THROWS_AS(parse_iso("2017-13-02T09:08:19Z"), std::invalid_argument);
}

static EventRecord sample_mail() {
    EventRecord e;
    e.event_ref = "&51585";
    e.ts = parse_iso("2017-05-02T09:08:19Z");
    e.source = {EntityKind::Equipment, "EQHR"};
    e.dest = {EntityKind::Equipment, "EQHE1"};
    e.protocol = Protocol::SMTP;
    e.meta.set("has_attach", true);
    e.meta.set("attach_size", std::int64_t{42779});
    e.meta.set("mail_from", std::string("HR@external.com"));
    e.meta.set("mail_to", std::string("HE1@entreprise.com"));
    e.label = Label::Hostile;
    return e;
}

TEST_CASE("one SMTP record round-trips bit-exactly") {
    const EventRecord e = sample_mail();
    std::ostringstream out;
    serialize_events(out, std::vector<EventRecord>{e});
    const std::string text = out.str();

    std::istringstream in(text);
    const auto back = deserialize_events(in);
    REQUIRE(back.size() == 1);
    CHECK(back[0] == e);

    // and the serialized text itself is stable
    std::ostringstream out2;
    serialize_events(out2, back);
    CHECK(out2.str() == text);
}

TEST_CASE("empty stream round-trips to empty") {
    std::ostringstream out;
    serialize_events(out, std::vector<EventRecord>{});
    CHECK(out.str().empty());
    std::istringstream in("");
    CHECK(deserialize_events(in).empty());
}

TEST_CASE("malformed line reports its line number") {
    std::istringstream in("{\"event_ref\": \"&1\"\nnot json\n");
    try {
        deserialize_events(in);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("line 1") != std::string::npos);
    }
}

TEST_CASE("unknown meta key is rejected by name") {
    EventRecord e = sample_mail();
    ojson j = event_to_json(e);
    j["meta"]["port"] = 443;  // not in the SMTP schema
    std::istringstream in(j.dump() + "\n");
    try {
        deserialize_events(in);
        FAIL("expected an error");
    } catch (const Error& ex) {
        CHECK(std::string(ex.what()).find("port") != std::string::npos);
    }
}

namespace {

EventRecord random_record(Rng& rng, std::int64_t base_ts, int i) {
    static const std::vector<Protocol> protos{Protocol::SMTP, Protocol::TCP, Protocol::UDP,
                                              Protocol::OSINT, Protocol::AUDIT};
    EventRecord e;
    e.event_ref = "&" + std::to_string(1000 + i);
    e.ts = base_ts + i;
    e.protocol = protos[static_cast<std::size_t>(rng.uniform_int(0, 4))];
    e.source = {EntityKind::Equipment, "EQ" + std::to_string(rng.uniform_int(1, 50))};
    e.dest = {EntityKind::Equipment, "EQ" + std::to_string(rng.uniform_int(1, 50))};
    switch (e.protocol) {
        case Protocol::SMTP:
            e.meta.set("has_attach", rng.bernoulli(0.4));
            e.meta.set("attach_size", rng.uniform_int(0, 1 << 20));
            e.meta.set("mail_from", "u" + std::to_string(rng.uniform_int(1, 30)) + "@x.com");
            e.meta.set("mail_to", "u" + std::to_string(rng.uniform_int(1, 30)) + "@x.com");
            break;
        case Protocol::TCP:
        case Protocol::UDP:
            e.meta.set("port", rng.uniform_int(1, 65535));
            e.meta.set("bytes", rng.uniform_int(0, 1 << 24));
            break;
        case Protocol::OSINT:
            e.meta.set("tag", std::string("tag-") + std::to_string(rng.uniform_int(1, 9)));
            break;
        case Protocol::AUDIT:
            e.meta.set("action_name", std::string("openat"));
            e.meta.set("program_path", "/usr/bin/p" + std::to_string(rng.uniform_int(1, 40)));
            e.meta.set("user_ids", std::string("1000:1000:1000"));
            e.meta.set("parent_path", std::string("/bin/bash"));
            e.meta.set("bytes", rng.uniform_int(0, 1 << 16));
            break;
    }
    if (rng.bernoulli(0.5)) e.label = rng.bernoulli(0.01) ? Label::Hostile : Label::Benign;
    return e;
}

}  // namespace

TEST_CASE("10k random schema-valid records round-trip") {
    Rng rng(7);
    const std::int64_t base = parse_iso("2017-04-01T00:00:00Z");
    std::vector<EventRecord> events;
    events.reserve(10000);
    for (int i = 0; i < 10000; ++i) events.push_back(random_record(rng, base, i));

    std::ostringstream out;
    serialize_events(out, events);
    std::istringstream in(out.str());
    const auto back = deserialize_events(in);
    REQUIRE(back.size() == events.size());
    CHECK(back == events);
}

TEST_CASE("deserialize flags out-of-order event streams") {
    EventRecord a = sample_mail();
    EventRecord b = sample_mail();
    b.event_ref = "&51586";
    b.ts = a.ts - 100;
    std::ostringstream out;
    serialize_events(out, std::vector<EventRecord>{a, b});
    std::istringstream in(out.str());
    bool warn = false;
    deserialize_events(in, &warn);
    CHECK(warn);
}

TEST_CASE("rng determinism and distribution sanity") {
    Rng a(123), b(123);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng r(5);
    double sum = 0.0;
    for (int i = 0; i < 20000; ++i) sum += r.normal(3.0, 1.0);
    CHECK(sum / 20000 == Catch::Approx(3.0).margin(0.05));

    int pois = 0;
    for (int i = 0; i < 20000; ++i) pois += r.poisson(70.0);  // exercises chunked path
    CHECK(pois / 20000.0 == Catch::Approx(70.0).margin(1.0));
}
