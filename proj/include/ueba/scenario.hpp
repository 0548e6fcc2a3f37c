#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ueba/core.hpp"
#include "ueba/events_io.hpp"
#include "ueba/rng.hpp"
#include "ueba/timeutil.hpp"

namespace ueba {

enum class ScenarioKind { Enterprise, HostAudit };

inline std::string_view to_string(ScenarioKind k) {
    return k == ScenarioKind::Enterprise ? "enterprise" : "host_audit";
}

inline ScenarioKind scenario_kind_from(std::string_view s) {
    if (s == "enterprise") return ScenarioKind::Enterprise;
    if (s == "host_audit") return ScenarioKind::HostAudit;
    throw Error("unknown scenario_kind '" + std::string(s) + "'");
}

struct ScenarioConfig {
    std::uint64_t seed = 1;
    int n_employees = 100;
    int duration_days = 60;
    double scale = 1.0;  // (0,1], multiplies benign volumes only
    ScenarioKind kind = ScenarioKind::Enterprise;
    std::int64_t start_ts = 1491004800;            // 2017-04-01T00:00:00Z
    std::optional<std::int64_t> attack_start;      // unset: pure-benign stream

    void validate() const {
        if (n_employees < 1) throw Error("scenario: n_employees must be >= 1");
        if (duration_days < 1) throw Error("scenario: duration_days must be >= 1");
        if (!(scale > 0.0 && scale <= 1.0)) throw Error("scenario: scale must be in (0, 1]");
        if (attack_start) {
            const std::int64_t attack_days = kind == ScenarioKind::Enterprise ? 2 : 1;
            if (*attack_start < start_ts ||
                *attack_start + attack_days * kDay > start_ts + duration_days * kDay)
                throw Error("scenario: attack window does not fit inside the dataset duration");
            if (kind == ScenarioKind::Enterprise && n_employees < 3)
                throw Error("scenario: the enterprise attack needs at least 3 employees");
        }
    }
};

// Per-rule bookkeeping recorded at generation time; the omniscient labels in
// the stream carry benign/hostile, this carries which rule produced what.
struct GroundTruth {
    std::uint64_t benign = 0;
    std::uint64_t hostile = 0;
    std::map<std::string, std::uint64_t> by_rule;
    std::map<std::string, std::vector<std::string>> hostile_refs;  // rule -> refs, emission order
};

struct LabeledStream {
    std::vector<EventRecord> events;
    GroundTruth truth;
};

struct LabelCensus {
    std::uint64_t benign = 0;
    std::uint64_t hostile = 0;
    std::map<std::string, std::uint64_t> by_rule;
};

inline LabelCensus label_census(std::span<const EventRecord> events, const GroundTruth* truth = nullptr) {
    LabelCensus c;
    for (const auto& e : events) {
        if (!e.label) throw Error("label_census: unlabeled record " + e.event_ref);
        if (*e.label == Label::Hostile)
            ++c.hostile;
        else
            ++c.benign;
    }
    if (truth) c.by_rule = truth->by_rule;
    return c;
}

// --- generator internals ------------------------------------------------------

namespace gen {

// One emission before refs are assigned; the stream is sorted by time with a
// deterministic tiebreak, then refs are handed out in stream order.
struct Pending {
    std::int64_t ts;
    std::string rule_id;
    int seq;
    EventRecord rec;
};

struct Builder {
    std::vector<Pending> pending;
    std::map<std::string, int> seq_by_rule;

    void emit(const std::string& rule_id, bool hostile, EventRecord rec) {
        rec.label = hostile ? Label::Hostile : Label::Benign;
        pending.push_back(Pending{rec.ts, rule_id, seq_by_rule[rule_id]++, std::move(rec)});
    }

    LabeledStream finish() {
        std::stable_sort(pending.begin(), pending.end(), [](const Pending& a, const Pending& b) {
            if (a.ts != b.ts) return a.ts < b.ts;
            if (a.rule_id != b.rule_id) return a.rule_id < b.rule_id;
            return a.seq < b.seq;
        });
        LabeledStream out;
        out.events.reserve(pending.size());
        int next_ref = 100001;
        for (auto& p : pending) {
            p.rec.event_ref = "&" + std::to_string(next_ref++);
            ++out.truth.by_rule[p.rule_id];
            if (*p.rec.label == Label::Hostile) {
                ++out.truth.hostile;
                out.truth.hostile_refs[p.rule_id].push_back(p.rec.event_ref);
            } else {
                ++out.truth.benign;
            }
            out.events.push_back(std::move(p.rec));
        }
        return out;
    }
};

inline EntityId eq(const std::string& name) { return {EntityKind::Equipment, name}; }
inline EntityId ext(const std::string& name) { return {EntityKind::ExternalHost, name}; }

// working-hours timestamp inside a day, gaussian around early afternoon
inline std::int64_t work_time(Rng& rng, std::int64_t day_start) {
    double h = rng.normal(13.5, 2.8);
    if (h < 7.0) h = 7.0 + (7.0 - h) * 0.1;
    if (h > 20.0) h = 20.0 - (h - 20.0) * 0.1;
    h = std::clamp(h, 7.0, 20.0);
    return day_start + static_cast<std::int64_t>(h * 3600.0);
}

inline std::int64_t any_time(Rng& rng, std::int64_t day_start) {
    return day_start + rng.uniform_int(0, kDay - 1);
}

inline EventRecord flow(std::int64_t ts, EntityId src, EntityId dst, Protocol proto,
                        std::int64_t port, std::int64_t bytes) {
    EventRecord e;
    e.ts = ts;
    e.source = std::move(src);
    e.dest = std::move(dst);
    e.protocol = proto;
    e.meta.set("port", port);
    e.meta.set("bytes", bytes);
    return e;
}

inline EventRecord mail(std::int64_t ts, EntityId src, EntityId dst, const std::string& from,
                        const std::string& to, bool attach, std::int64_t attach_size) {
    EventRecord e;
    e.ts = ts;
    e.source = std::move(src);
    e.dest = std::move(dst);
    e.protocol = Protocol::SMTP;
    e.meta.set("has_attach", attach);
    e.meta.set("attach_size", attach ? attach_size : std::int64_t{0});
    e.meta.set("mail_from", from);
    e.meta.set("mail_to", to);
    return e;
}

inline EventRecord osint(std::int64_t ts, EntityId src, EntityId dst, const std::string& tag) {
    EventRecord e;
    e.ts = ts;
    e.source = std::move(src);
    e.dest = std::move(dst);
    e.protocol = Protocol::OSINT;
    e.meta.set("tag", tag);
    return e;
}

inline EventRecord audit_event(std::int64_t ts, const std::string& user_entity,
                               const std::string& action, const std::string& program,
                               const std::string& ids, const std::string& parent,
                               std::int64_t bytes = 0) {
    EventRecord e;
    e.ts = ts;
    e.source = {EntityKind::Person, user_entity};
    e.dest = eq("WS1");
    e.protocol = Protocol::AUDIT;
    e.meta.set("action_name", action);
    e.meta.set("program_path", program);
    e.meta.set("user_ids", ids);
    e.meta.set("parent_path", parent);
    e.meta.set("bytes", bytes);
    return e;
}

}  // namespace gen

// --- enterprise scenario --------------------------------------------------------

namespace gen {

// Background volumes per weekday at scale 1.0. Employee activity attenuates
// x0.2 on weekends; infrastructure runs around the clock. A hundred employees
// over two months come out near half a million records.
struct EnterpriseRates {
    double browse = 45.0;
    double file_flows = 18.0;
    double mail_internal = 6.0;
    double mail_ext_out = 2.0;
    double mail_ext_in = 3.0;
    double router_telemetry = 1200.0;  // per day, all routers
    double dns = 600.0;
    double backup = 100.0;
    double monitoring = 500.0;
    double osint_feed = 20.0;
    double weekend_factor = 0.2;
};

inline void enterprise_benign_day(Builder& b, const ScenarioConfig& cfg, const EnterpriseRates& rates,
                                  int day) {
    const std::int64_t day_start = cfg.start_ts + day * kDay;
    const double wf = is_weekend(day_start) ? rates.weekend_factor : 1.0;

    static const std::vector<std::string> web_hosts = {
        "EQWEB1", "EQWEB2", "EQWEB3", "EQWEB4",  "EQWEB5",  "EQWEB6",
        "EQWEB7", "EQWEB8", "EQWEB9", "EQWEB10", "EQWEB11", "EQWEB12"};
    const std::vector<double> web_zipf = zipf_weights(web_hosts.size(), 1.0);

    for (int emp = 1; emp <= cfg.n_employees; ++emp) {
        const std::string host = "EQHE" + std::to_string(emp);
        const std::string addr = "HE" + std::to_string(emp) + "@entreprise.com";
        Rng rng = Rng::derive(cfg.seed, "ent:emp:" + std::to_string(emp) + ":" + std::to_string(day));

        const int n_browse = rng.poisson(rates.browse * cfg.scale * wf);
        for (int i = 0; i < n_browse; ++i) {
            const auto& site = web_hosts[rng.discrete(web_zipf)];
            std::int64_t bytes = static_cast<std::int64_t>(rng.lognormal(std::log(2e4), 1.0));
            if (rng.bernoulli(0.01)) bytes *= 50;  // occasional large download
            b.emit("bg_browse", false, flow(work_time(rng, day_start), eq(host), ext(site),
                                            Protocol::TCP, 443, bytes));
        }

        const int n_files = rng.poisson(rates.file_flows * cfg.scale * wf);
        for (int i = 0; i < n_files; ++i) {
            b.emit("bg_files", false,
                   flow(work_time(rng, day_start), eq(host), eq("EQSRV"), Protocol::TCP, 445,
                        static_cast<std::int64_t>(rng.lognormal(std::log(2e5), 0.8))));
        }

        const int n_mail = rng.poisson(rates.mail_internal * cfg.scale * wf);
        for (int i = 0; i < n_mail; ++i) {
            int other = static_cast<int>(rng.uniform_int(1, cfg.n_employees - 1));
            if (other >= emp) ++other;
            const bool attach = rng.bernoulli(0.25);
            b.emit("bg_mail_int", false,
                   mail(work_time(rng, day_start), eq(host), eq("EQHE" + std::to_string(other)), addr,
                        "HE" + std::to_string(other) + "@entreprise.com", attach,
                        static_cast<std::int64_t>(rng.lognormal(std::log(3e5), 1.2))));
        }

        const int n_out = rng.poisson(rates.mail_ext_out * cfg.scale * wf);
        for (int i = 0; i < n_out; ++i) {
            const std::string peer = "partner" + std::to_string(rng.uniform_int(1, 6));
            b.emit("bg_mail_out", false,
                   mail(work_time(rng, day_start), eq(host), ext("EQMX" + std::to_string(rng.uniform_int(1, 4))),
                        addr, peer + "@ext.com", rng.bernoulli(0.15),
                        static_cast<std::int64_t>(rng.lognormal(std::log(2e5), 1.0))));
        }
        const int n_in = rng.poisson(rates.mail_ext_in * cfg.scale * wf);
        for (int i = 0; i < n_in; ++i) {
            const std::string peer = "partner" + std::to_string(rng.uniform_int(1, 6));
            b.emit("bg_mail_in", false,
                   mail(work_time(rng, day_start), ext("EQMX" + std::to_string(rng.uniform_int(1, 4))),
                        eq(host), peer + "@ext.com", addr, rng.bernoulli(0.2),
                        static_cast<std::int64_t>(rng.lognormal(std::log(25e4), 1.0))));
        }
    }

    // referent newsletters: plain mails, a subset of employees every few days
    Rng hr = Rng::derive(cfg.seed, "ent:hr:" + std::to_string(day));
    if (day % 6 == 2) {
        for (int emp = 1; emp <= cfg.n_employees; ++emp) {
            if (!hr.bernoulli(0.3 * cfg.scale)) continue;
            b.emit("bg_mail_hr", false,
                   mail(work_time(hr, day_start), eq("EQHR"), eq("EQHE" + std::to_string(emp)),
                        "HR@external.com", "HE" + std::to_string(emp) + "@entreprise.com", false, 0));
        }
    }

    // infrastructure, employee-count independent, 24/7
    Rng infra = Rng::derive(cfg.seed, "ent:infra:" + std::to_string(day));
    const int n_rt = infra.poisson(rates.router_telemetry * cfg.scale);
    for (int i = 0; i < n_rt; ++i) {
        b.emit("bg_router", false,
               flow(any_time(infra, day_start), eq("EQRT" + std::to_string(infra.uniform_int(1, 3))),
                    eq("EQFW"), Protocol::TCP, 514,
                    static_cast<std::int64_t>(infra.lognormal(std::log(500.0), 0.3))));
    }
    const int n_dns = infra.poisson(rates.dns * cfg.scale);
    for (int i = 0; i < n_dns; ++i) {
        b.emit("bg_dns", false,
               flow(any_time(infra, day_start), eq("EQFW"), eq("EQDNS"), Protocol::TCP, 53,
                    static_cast<std::int64_t>(infra.lognormal(std::log(300.0), 0.4))));
    }
    const int n_bkp = infra.poisson(rates.backup * cfg.scale);
    for (int i = 0; i < n_bkp; ++i) {
        const std::int64_t t = day_start + kHour + infra.uniform_int(0, 2 * kHour - 1);
        b.emit("bg_backup", false,
               flow(t, eq("EQSRV"), eq("EQBKP"), Protocol::TCP, 873,
                    static_cast<std::int64_t>(infra.lognormal(std::log(5e6), 0.5))));
    }
    const int n_mon = infra.poisson(rates.monitoring * cfg.scale);
    for (int i = 0; i < n_mon; ++i) {
        b.emit("bg_monitor", false,
               flow(any_time(infra, day_start), eq("EQMON"), eq("EQSRV"), Protocol::TCP, 161,
                    static_cast<std::int64_t>(infra.lognormal(std::log(800.0), 0.3))));
    }

    // open-source intelligence feed, mostly routine chatter about externals
    Rng feed = Rng::derive(cfg.seed, "ent:osint:" + std::to_string(day));
    static const std::vector<std::string> milieus = {"MIL-FIN", "MIL-GOV", "MIL-TECH", "MIL-PRESS"};
    static const std::vector<std::string> tags = {"routine-scan", "leak-report", "press", "forum-chatter"};
    const int n_feed = feed.poisson(rates.osint_feed * cfg.scale);
    for (int i = 0; i < n_feed; ++i) {
        b.emit("bg_osint", false,
               osint(any_time(feed, day_start), ext("EXTH" + std::to_string(feed.uniform_int(1, 8))),
                     ext(feed.pick(milieus)), feed.pick(tags)));
    }
}

// The two attack days: reconnaissance on day one; spoofed twin mails, the slow
// port scan, the exploitation and the collection flow on day two.
inline void enterprise_attack(Builder& b, const ScenarioConfig& cfg) {
    Rng rng = Rng::derive(cfg.seed, "ent:attack");
    const std::int64_t d1 = *cfg.attack_start;
    const std::int64_t d2 = d1 + kDay;
    auto at = [](std::int64_t day, int h, int m) { return day + h * kHour + m * 60; };
    auto jitter = [&rng](std::int64_t t, int minutes) {
        return t + rng.uniform_int(-minutes * 60, minutes * 60);
    };

    b.emit("recon", true, osint(jitter(at(d1, 10, 0), 30), ext("EQHH"), ext("EQSN"), "sensitive-activity"));
    b.emit("recon", true, osint(jitter(at(d1, 14, 0), 30), ext("EQHH"), ext("EQSN"), "sensitive-activity"));

    // twin mails with spoofed sender and near-equal attachments (< 10% apart)
    const std::int64_t attach = rng.uniform_int(35000, 50000);
    const std::int64_t attach_twin = static_cast<std::int64_t>(attach * rng.uniform(1.03, 1.09));
    b.emit("bi1_mail", true,
           mail(jitter(at(d2, 9, 8), 5), eq("EQHR"), eq("EQHE1"), "HR@external.com",
                "HE1@entreprise.com", true, attach));
    b.emit("bi1_twin", true,
           mail(jitter(at(d2, 11, 35), 5), eq("EQHR"), eq("EQHE2"), "HR@external.com",
                "HE2@entreprise.com", true, attach_twin));

    // slow scan from the duped employee's host, spread over more than 4 hours
    const int probe_minutes[4] = {25, 150, 244, 281};  // 12:25 .. 17:06
    std::vector<std::int64_t> used_ports;
    for (int i = 0; i < 4; ++i) {
        std::int64_t port = 0;
        do {
            port = rng.uniform_int(1024, 65535);
        } while (std::find(used_ports.begin(), used_ports.end(), port) != used_ports.end());
        used_ports.push_back(port);
        const std::int64_t t = at(d2, 12, 0) + probe_minutes[i] * 60 + rng.uniform_int(-120, 120);
        b.emit("bi2_scan", true,
               flow(t, eq("EQHE1"), eq("EQVU1"), Protocol::TCP, port, rng.uniform_int(200, 800)));
    }

    // one decoy probe toward a second vulnerable host; not scripted as hostile
    b.emit("decoy_probe", false,
           flow(jitter(at(d2, 16, 0), 5), eq("EQHE1"), eq("EQVU5"), Protocol::TCP,
                rng.uniform_int(16000, 50000), rng.uniform_int(200, 800)));

    // exploitation from the hacker's equipment, then the collection flow
    b.emit("bi3_exploit", true,
           flow(jitter(at(d2, 22, 20), 10), ext("EQHH"), eq("EQVU1"), Protocol::TCP,
                rng.uniform_int(40000, 60000),
                static_cast<std::int64_t>(rng.lognormal(std::log(8e5), 0.2))));
    const int third = std::min(cfg.n_employees, 48);
    b.emit("collection", true,
           flow(jitter(at(d2, 23, 34), 10), eq("EQVU1"), eq("EQHE" + std::to_string(third)),
                Protocol::TCP, rng.uniform_int(1500, 4000),
                static_cast<std::int64_t>(rng.lognormal(std::log(2e7), 0.3))));
}

}  // namespace gen

inline LabeledStream generate_enterprise(const ScenarioConfig& cfg) {
    if (cfg.kind != ScenarioKind::Enterprise) throw Error("generate_enterprise: wrong scenario kind");
    cfg.validate();
    gen::Builder b;
    gen::EnterpriseRates rates;
    for (int day = 0; day < cfg.duration_days; ++day) gen::enterprise_benign_day(b, cfg, rates, day);
    if (cfg.attack_start) gen::enterprise_attack(b, cfg);
    return b.finish();
}

// --- host-audit scenario ---------------------------------------------------------

namespace gen {

struct AuditProgram {
    std::string program;
    std::string parent;
    std::string ids;
    double rate_per_day;      // at scale 1.0
    bool around_the_clock;    // system programs ignore working hours
    // action mix: syscall-class actions dominate; command-class sprinkled in
    double p_execve;
    double p_connect;
    double p_setuid;
    double connect_bytes_log_mean;
};

inline const std::vector<AuditProgram>& audit_programs() {
    static const std::vector<AuditProgram> progs = {
        {"/usr/lib/libreoffice/soffice.bin", "/usr/bin/gnome-shell", "1000:1000:1000", 80000, false, 0.002, 0.0, 0.0, 0.0},
        {"/usr/lib/firefox/firefox", "/usr/bin/gnome-shell", "1000:1000:1000", 92000, false, 0.001, 0.03, 0.0, std::log(3e4)},
        {"/usr/lib/thunderbird/thunderbird", "/usr/bin/gnome-shell", "1000:1000:1000", 40000, false, 0.001, 0.02, 0.0, std::log(2e4)},
        {"/bin/bash", "/usr/bin/gnome-terminal", "1000:1000:1000", 10000, false, 0.10, 0.0, 0.0, 0.0},
        {"/usr/bin/ls", "/bin/bash", "1000:1000:1000", 12000, false, 0.15, 0.0, 0.0, 0.0},
        {"/usr/bin/cat", "/bin/bash", "1000:1000:1000", 8000, false, 0.15, 0.0, 0.0, 0.0},
        {"/usr/bin/grep", "/bin/bash", "1000:1000:1000", 7000, false, 0.15, 0.0, 0.0, 0.0},
        {"/usr/lib/systemd/systemd", "/sbin/init", "0:0:0", 6000, true, 0.01, 0.0, 0.0, 0.0},
        {"/usr/sbin/cron", "/sbin/init", "0:0:0", 4000, true, 0.05, 0.0, 0.0, 0.0},
        {"/usr/bin/sudo", "/bin/bash", "1000:1000:0", 200, false, 0.30, 0.0, 0.30, 0.0},
        {"/usr/bin/ssh", "/bin/bash", "1000:1000:1000", 5, false, 0.5, 0.3, 0.0, std::log(1e4)},
        {"/usr/bin/tar", "/bin/bash", "1000:1000:1000", 8, false, 0.4, 0.0, 0.0, 0.0},
        {"/usr/bin/gcc", "/bin/bash", "1000:1000:1000", 3, false, 0.6, 0.0, 0.0, 0.0},
        {"/usr/bin/apt", "/usr/lib/systemd/systemd", "0:0:0", 6, true, 0.2, 0.15, 0.0, std::log(4e6)},
    };
    return progs;
}

inline void audit_benign_day(Builder& b, const ScenarioConfig& cfg, int day) {
    const std::int64_t day_start = cfg.start_ts + day * kDay;
    const bool weekend = is_weekend(day_start);
    static const std::vector<std::string> syscalls = {"openat", "read", "write", "close", "mmap", "brk"};

    for (std::size_t pi = 0; pi < audit_programs().size(); ++pi) {
        const AuditProgram& p = audit_programs()[pi];
        Rng rng = Rng::derive(cfg.seed, "aud:" + p.program + ":" + std::to_string(day));
        double rate = p.rate_per_day * cfg.scale;
        if (weekend && !p.around_the_clock) rate *= 0.15;
        const int n = rng.poisson(rate);
        for (int i = 0; i < n; ++i) {
            const std::int64_t t = p.around_the_clock ? any_time(rng, day_start) : work_time(rng, day_start);
            const std::string user = p.ids == "0:0:0" ? "system" : "user1";
            const double u = rng.uniform();
            std::string action;
            std::int64_t bytes = 0;
            if (u < p.p_setuid) {
                action = "setuid";
            } else if (u < p.p_setuid + p.p_connect) {
                action = "connect";
                bytes = static_cast<std::int64_t>(rng.lognormal(p.connect_bytes_log_mean, 1.0));
            } else if (u < p.p_setuid + p.p_connect + p.p_execve) {
                action = "execve";
            } else {
                action = rng.pick(syscalls);
            }
            b.emit("bg_" + p.program, false, audit_event(t, user, action, p.program, p.ids, p.parent, bytes));
        }
    }
}

// Duped user runs a script: shell, download, three compilations, then the
// exploit raising privileges.
inline void audit_attack(Builder& b, const ScenarioConfig& cfg) {
    Rng rng = Rng::derive(cfg.seed, "aud:attack");
    const std::int64_t t0 = *cfg.attack_start + 14 * kHour + 30 * 60 + rng.uniform_int(-900, 900);
    b.emit("audit_script", true,
           audit_event(t0, "user1", "execve", "/bin/bash", "1000:1000:1000",
                       "/usr/lib/thunderbird/thunderbird"));
    b.emit("audit_download", true,
           audit_event(t0 + 180 + rng.uniform_int(0, 60), "user1", "connect", "/usr/bin/wget",
                       "1000:1000:1000", "/bin/bash", 2400000 + rng.uniform_int(0, 200000)));
    for (int i = 0; i < 3; ++i) {
        b.emit("audit_compile", true,
               audit_event(t0 + 480 + i * 240 + rng.uniform_int(0, 60), "user1", "execve",
                           "/usr/bin/gcc", "1000:1000:1000", "/bin/bash"));
    }
    b.emit("audit_exploit", true,
           audit_event(t0 + 1320 + rng.uniform_int(0, 60), "user1", "setuid", "/tmp/.cache/exploit",
                       "1000:1000:0", "/bin/bash"));
}

}  // namespace gen

inline LabeledStream generate_host_audit(const ScenarioConfig& cfg) {
    if (cfg.kind != ScenarioKind::HostAudit) throw Error("generate_host_audit: wrong scenario kind");
    cfg.validate();
    gen::Builder b;
    for (int day = 0; day < cfg.duration_days; ++day) gen::audit_benign_day(b, cfg, day);
    if (cfg.attack_start) gen::audit_attack(b, cfg);
    return b.finish();
}

inline LabeledStream generate_scenario(const ScenarioConfig& cfg) {
    return cfg.kind == ScenarioKind::Enterprise ? generate_enterprise(cfg) : generate_host_audit(cfg);
}

// --- config / truth serialization -------------------------------------------------

inline nlohmann::ordered_json scenario_config_to_json(const ScenarioConfig& c) {
    nlohmann::ordered_json j;
    j["seed"] = c.seed;
    j["scenario_kind"] = std::string(to_string(c.kind));
    j["n_employees"] = c.n_employees;
    j["duration_days"] = c.duration_days;
    j["scale"] = c.scale;
    j["start"] = format_iso(c.start_ts);
    if (c.attack_start) j["attack_start"] = format_iso(*c.attack_start);
    return j;
}

inline ScenarioConfig scenario_config_from_json(const nlohmann::ordered_json& j) {
    ScenarioConfig c;
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("scenario_kind")) c.kind = scenario_kind_from(j.at("scenario_kind").get<std::string>());
    if (j.contains("n_employees")) c.n_employees = j.at("n_employees").get<int>();
    if (j.contains("duration_days")) c.duration_days = j.at("duration_days").get<int>();
    if (j.contains("scale")) c.scale = j.at("scale").get<double>();
    if (j.contains("start")) c.start_ts = parse_iso(j.at("start").get<std::string>());
    if (j.contains("attack_start")) c.attack_start = parse_iso(j.at("attack_start").get<std::string>());
    return c;
}

inline nlohmann::ordered_json truth_to_json(const GroundTruth& t) {
    nlohmann::ordered_json j;
    j["benign"] = t.benign;
    j["hostile"] = t.hostile;
    j["by_rule"] = t.by_rule;
    j["hostile_refs"] = t.hostile_refs;
    return j;
}

inline GroundTruth truth_from_json(const nlohmann::ordered_json& j) {
    GroundTruth t;
    t.benign = j.at("benign").get<std::uint64_t>();
    t.hostile = j.at("hostile").get<std::uint64_t>();
    t.by_rule = j.at("by_rule").get<std::map<std::string, std::uint64_t>>();
    t.hostile_refs = j.at("hostile_refs").get<std::map<std::string, std::vector<std::string>>>();
    return t;
}

}  // namespace ueba
