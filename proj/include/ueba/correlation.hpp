#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ueba/core.hpp"
#include "ueba/enrichment.hpp"
#include "ueba/timeutil.hpp"

namespace ueba {

struct CorrelationConfig {
    double numeric_tolerance = 0.05;   // quasi-twin gap on magnitude-transformed numerics
    bool exact_destination = true;     // grouping key: exact dst vs role-abstracted dst
    std::int64_t link_horizon_s = 90 * kDay;
    double seed_percentile = 0.99;     // entry cut for graph growth
    double suspect_percentile = 0.90;  // admission cut for linked groups
    double theta_hi = 2.5;             // pertinence entry threshold
    double theta_lo = 1.25;            // pertinence exit threshold (hysteresis)
    std::int64_t tau_forget_s = 30 * kDay;
    // designed suspect-procedure guards: values shared by too many candidate
    // groups do not link, and flow/mail suspects must be rare relations
    int hub_limit = 96;
    int pair_limit = 4;
    int growth_depth = 2;
    bool singletons_only = false;  // ablation: report seed singletons, no linking

    void validate() const {
        if (theta_lo >= theta_hi) throw Error("correlation: theta_lo must be < theta_hi");
        if (numeric_tolerance < 0) throw Error("correlation: numeric_tolerance must be >= 0");
        if (link_horizon_s <= 0) throw Error("correlation: link horizon must be > 0");
        if (growth_depth < 1) throw Error("correlation: growth_depth must be >= 1");
    }
};

struct TupleGroup {
    std::size_t anchor = 0;            // index of the first member (time anchor, representative)
    std::vector<std::size_t> members;  // indices into the scored span, time order
    double percentile = 0.0;           // max over members
    std::string signature;

    std::size_t multiplicity() const { return members.size(); }
};

struct LinkEdge {
    std::size_t from_group = 0;  // earlier anchor
    std::size_t to_group = 0;
    std::vector<std::pair<std::string, std::string>> shared_keys;  // (field class, value)
    std::int64_t dt = 0;
};

struct GraphEdge {
    std::string event_ref;
    std::int64_t ts = 0;
    EntityId from;
    EntityId to;
    Protocol protocol = Protocol::TCP;
    double score = 0.0;
    double percentile = 0.0;
    Verdict verdict = Verdict::Normal;
    std::size_t multiplicity = 1;   // size of the quasi-twin group this event belongs to
    std::string chain_from;         // relay identity: flows src->dst, audit parent->program
    std::string chain_to;
};

struct PertinenceGraph {
    std::string id;
    double pertinence = 0.0;
    std::pair<std::int64_t, std::int64_t> window{0, 0};
    std::vector<EntityId> nodes;
    std::vector<GraphEdge> edges;
};

// --- quasi-twin grouping ---------------------------------------------------------

namespace corr_detail {

inline void numeric_magnitudes(const EventRecord& e, std::vector<double>& out) {
    out.clear();
    switch (e.protocol) {
        case Protocol::SMTP:
            out.push_back(magnitude(static_cast<double>(e.meta.get_int("attach_size", 0))));
            break;
        case Protocol::TCP:
        case Protocol::UDP:
            out.push_back(magnitude(static_cast<double>(e.meta.get_int("port", 0))));
            out.push_back(magnitude(static_cast<double>(e.meta.get_int("bytes", 0))));
            break;
        case Protocol::OSINT:
            break;
        case Protocol::AUDIT:
            out.push_back(magnitude(static_cast<double>(e.meta.get_int("bytes", 0))));
            break;
    }
}

inline std::string categorical_signature(const EventRecord& e, bool exact_destination) {
    std::string s(to_string(e.protocol));
    s += '\x1f';
    s += to_string(e.source.kind);
    s += '\x1f';
    s += e.source.name;
    s += '\x1f';
    s += to_string(e.dest.kind);
    s += '\x1f';
    if (exact_destination) s += e.dest.name;
    switch (e.protocol) {
        case Protocol::SMTP:
            s += '\x1f';
            s += e.meta.get_bool("has_attach") ? "att" : "plain";
            s += '\x1f';
            s += e.meta.get_str("mail_from");
            s += '\x1f';
            s += exact_destination ? e.meta.get_str("mail_to") : std::string();
            break;
        case Protocol::OSINT:
            s += '\x1f';
            s += e.meta.get_str("tag");
            break;
        case Protocol::AUDIT:
            s += '\x1f';
            s += e.meta.get_str("action_name");
            s += '\x1f';
            s += e.meta.get_str("program_path");
            s += '\x1f';
            s += e.meta.get_str("user_ids");
            s += '\x1f';
            s += e.meta.get_str("parent_path");
            break;
        default:
            break;
    }
    return s;
}

}  // namespace corr_detail

// Partition of the scored events: same categorical signature, and every
// magnitude-transformed numeric within tolerance of the group's anchor.
inline std::vector<TupleGroup> group_quasi_twins(std::span<const ScoredEvent> scored,
                                                 const CorrelationConfig& cfg) {
    std::vector<std::size_t> order(scored.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scored[a].event.ts != scored[b].event.ts) return scored[a].event.ts < scored[b].event.ts;
        return scored[a].event.event_ref < scored[b].event.event_ref;
    });

    std::vector<TupleGroup> groups;
    std::vector<std::vector<double>> anchor_mags;
    std::map<std::string, std::vector<std::size_t>> cells;  // signature -> group ids

    std::vector<double> mags;
    for (const std::size_t idx : order) {
        const EventRecord& e = scored[idx].event;
        const std::string sig = corr_detail::categorical_signature(e, cfg.exact_destination);
        corr_detail::numeric_magnitudes(e, mags);

        auto& cell = cells[sig];
        std::size_t joined = SIZE_MAX;
        for (const std::size_t gid : cell) {
            const auto& am = anchor_mags[gid];
            bool ok = true;
            for (std::size_t d = 0; d < mags.size(); ++d) {
                if (std::abs(mags[d] - am[d]) > cfg.numeric_tolerance) {
                    ok = false;
                    break;
                }
            }
            if (ok) {
                joined = gid;
                break;
            }
        }
        if (joined == SIZE_MAX) {
            joined = groups.size();
            TupleGroup g;
            g.anchor = idx;
            g.signature = sig;
            groups.push_back(std::move(g));
            anchor_mags.push_back(mags);
            cell.push_back(joined);
        }
        groups[joined].members.push_back(idx);
        groups[joined].percentile = std::max(groups[joined].percentile, scored[idx].percentile);
    }
    return groups;
}

// --- link fields -------------------------------------------------------------------

namespace corr_detail {

using LinkValue = std::pair<std::string, std::string>;  // (field class, value)

// Entity identifiers, mail addresses, ports, and the spawn identities of
// audit events. Collected over all members so role-abstracted groups carry
// every destination they cover. Audit events link through their spawn
// identities only: the user and workstation behind a single-host audit
// stream appear on every record and carry no relation information.
inline std::set<LinkValue> link_values(const TupleGroup& g, std::span<const ScoredEvent> scored) {
    std::set<LinkValue> out;
    for (const std::size_t i : g.members) {
        const EventRecord& e = scored[i].event;
        switch (e.protocol) {
            case Protocol::SMTP:
                out.emplace("entity", e.source.name);
                out.emplace("entity", e.dest.name);
                out.emplace("mail", e.meta.get_str("mail_from"));
                out.emplace("mail", e.meta.get_str("mail_to"));
                break;
            case Protocol::TCP:
            case Protocol::UDP:
                out.emplace("entity", e.source.name);
                out.emplace("entity", e.dest.name);
                out.emplace("port", std::to_string(e.meta.get_int("port", 0)));
                break;
            case Protocol::AUDIT:
                out.emplace("binprog", e.meta.get_str("program_path"));
                out.emplace("binparent", e.meta.get_str("parent_path"));
                break;
            default:
                out.emplace("entity", e.source.name);
                out.emplace("entity", e.dest.name);
                break;
        }
    }
    return out;
}

// Two groups share a link value when the same identifier appears on both
// sides. Audit spawn identities match program against parent (the spawning
// relation), never parent against parent.
inline bool values_match(const LinkValue& a, const LinkValue& b) {
    if (a.second != b.second) return false;
    if (a.first == b.first) return a.first != "binprog" && a.first != "binparent";
    if ((a.first == "binprog" && b.first == "binparent") ||
        (a.first == "binparent" && b.first == "binprog"))
        return true;
    return false;
}

inline std::string chain_from_of(const EventRecord& e) {
    return e.protocol == Protocol::AUDIT ? e.meta.get_str("parent_path") : e.source.name;
}

inline std::string chain_to_of(const EventRecord& e) {
    return e.protocol == Protocol::AUDIT ? e.meta.get_str("program_path") : e.dest.name;
}

}  // namespace corr_detail

// All-pairs link construction. Groups link when they share at least one
// value on a link field and their anchors are within the horizon; high ports
// count only when the port value recurs across groups. Quadratic in bucket
// sizes: meant for inspection and modest streams, the extraction engine
// walks the same buckets with admission guards instead.
inline std::vector<LinkEdge> build_links(std::span<const TupleGroup> groups,
                                         std::span<const ScoredEvent> scored,
                                         const CorrelationConfig& cfg) {
    cfg.validate();
    std::map<std::string, std::vector<std::pair<std::size_t, std::string>>> buckets;  // value -> (gid, class)
    for (std::size_t gid = 0; gid < groups.size(); ++gid) {
        for (const auto& v : corr_detail::link_values(groups[gid], scored))
            buckets[v.second].emplace_back(gid, v.first);
    }
    std::size_t pair_budget = 0;
    for (const auto& [value, entries] : buckets) pair_budget += entries.size() * entries.size();
    if (pair_budget > 50'000'000)
        throw Error("build_links: input too large for all-pairs linking; use the correlation engine");

    std::map<std::pair<std::size_t, std::size_t>, std::vector<corr_detail::LinkValue>> edges;
    for (const auto& [value, entries] : buckets) {
        // distinct groups carrying this value
        std::set<std::size_t> distinct;
        for (const auto& [gid, cls] : entries) distinct.insert(gid);
        if (distinct.size() < 2) continue;
        // a high port shared by two groups is by definition repeated, so the
        // non-ephemeral port rule is already satisfied for any linkable pair
        for (std::size_t i = 0; i < entries.size(); ++i) {
            for (std::size_t j = i + 1; j < entries.size(); ++j) {
                const auto& [g1, c1] = entries[i];
                const auto& [g2, c2] = entries[j];
                if (g1 == g2) continue;
                if (!corr_detail::values_match({c1, value}, {c2, value})) continue;
                const std::int64_t t1 = scored[groups[g1].anchor].event.ts;
                const std::int64_t t2 = scored[groups[g2].anchor].event.ts;
                if (std::abs(t1 - t2) > cfg.link_horizon_s) continue;
                const auto key = t1 <= t2 ? std::make_pair(g1, g2) : std::make_pair(g2, g1);
                auto& shared = edges[key];
                if (std::find(shared.begin(), shared.end(), corr_detail::LinkValue{c1, value}) ==
                    shared.end())
                    shared.emplace_back(c1, value);
            }
        }
    }
    std::vector<LinkEdge> out;
    out.reserve(edges.size());
    for (auto& [key, shared] : edges) {
        LinkEdge e;
        e.from_group = key.first;
        e.to_group = key.second;
        std::sort(shared.begin(), shared.end());
        e.shared_keys = std::move(shared);
        e.dt = scored[groups[key.second].anchor].event.ts - scored[groups[key.first].anchor].event.ts;
        out.push_back(std::move(e));
    }
    return out;
}

// --- pertinence --------------------------------------------------------------------

namespace corr_detail {

// longest time-respecting relay chain, counted in edges
inline int longest_chain(std::span<const GraphEdge> edges) {
    std::vector<std::size_t> order(edges.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (edges[a].ts != edges[b].ts) return edges[a].ts < edges[b].ts;
        return edges[a].event_ref < edges[b].event_ref;
    });
    if (order.size() > 2048) order.resize(2048);  // topology bonus saturates anyway
    std::vector<int> best(order.size(), 1);
    int overall = edges.empty() ? 0 : 1;
    for (std::size_t i = 0; i < order.size(); ++i) {
        const GraphEdge& e = edges[order[i]];
        for (std::size_t j = 0; j < i; ++j) {
            const GraphEdge& p = edges[order[j]];
            if (p.ts > e.ts) continue;
            if (p.chain_to == e.chain_from && best[j] + 1 > best[i]) best[i] = best[j] + 1;
        }
        overall = std::max(overall, best[i]);
    }
    return overall;
}

}  // namespace corr_detail

// Pertinence of a connected set of scored edges: percentile-squared weights
// with exponential forgetting, a topology bonus for long relay chains, and
// quasi-twin members sharing a single weight. Reads only percentiles, never
// the raw score scale.
inline double pertinence_fp(std::span<const GraphEdge> edges, std::int64_t now,
                            const CorrelationConfig& cfg) {
    if (edges.empty()) throw Error("pertinence_fp: empty edge set");
    // connectivity over shared endpoints and relay identities
    std::vector<std::size_t> parent(edges.size());
    for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = i;
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    std::map<std::string, std::size_t> seen;
    for (std::size_t i = 0; i < edges.size(); ++i) {
        for (const std::string& key :
             {"n:" + edges[i].from.name, "n:" + edges[i].to.name, "c:" + edges[i].chain_from,
              "c:" + edges[i].chain_to}) {
            const auto [it, inserted] = seen.emplace(key, i);
            if (!inserted) parent[find(i)] = find(it->second);
        }
    }
    for (std::size_t i = 1; i < edges.size(); ++i)
        if (find(i) != find(0)) throw Error("pertinence_fp: edge set is not connected");

    double sum = 0.0;
    for (const GraphEdge& e : edges) {
        const double age = static_cast<double>(std::max<std::int64_t>(0, now - e.ts));
        const double w = e.percentile * e.percentile *
                         std::exp(-age / static_cast<double>(cfg.tau_forget_s)) /
                         static_cast<double>(std::max<std::size_t>(e.multiplicity, 1));
        sum += w;
    }
    const int chain = corr_detail::longest_chain(edges);
    return (1.0 + 0.1 * (chain - 1)) * sum;
}

// --- extraction ---------------------------------------------------------------------

struct ExtractionStats {
    std::size_t groups = 0;
    std::size_t candidates = 0;
    std::size_t seeds = 0;
    std::size_t components = 0;
};

// Major-interest graph extraction with hysteresis. The engine keeps the set
// of previously reported graphs so a decaying graph is still reported while
// its pertinence stays above the exit threshold.
class CorrelationEngine {
public:
    explicit CorrelationEngine(CorrelationConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

    const CorrelationConfig& config() const { return cfg_; }

    std::vector<PertinenceGraph> extract(std::span<const ScoredEvent> scored, std::int64_t now,
                                         ExtractionStats* stats = nullptr) {
        const std::vector<TupleGroup> groups = group_quasi_twins(scored, cfg_);
        if (stats) *stats = ExtractionStats{};
        if (stats) stats->groups = groups.size();

        if (cfg_.singletons_only) return extract_singletons(groups, scored, now, stats);

        // value buckets over all groups (group ids ascend in anchor-time order)
        std::map<corr_detail::LinkValue, std::vector<std::size_t>> buckets;
        std::vector<std::set<corr_detail::LinkValue>> values_of(groups.size());
        for (std::size_t gid = 0; gid < groups.size(); ++gid) {
            values_of[gid] = corr_detail::link_values(groups[gid], scored);
            for (const auto& v : values_of[gid]) buckets[v].push_back(gid);
        }

        // candidate fan-out per value: how many suspect-grade groups carry it
        std::map<corr_detail::LinkValue, int> fanout;
        std::vector<char> is_candidate(groups.size(), 0), is_seed(groups.size(), 0);
        for (std::size_t gid = 0; gid < groups.size(); ++gid) {
            if (groups[gid].percentile >= cfg_.suspect_percentile) {
                is_candidate[gid] = 1;
                for (const auto& v : values_of[gid]) ++fanout[v];
            }
            if (groups[gid].percentile >= cfg_.seed_percentile) is_seed[gid] = 1;
        }
        // port recurrence counted over all groups
        std::map<std::string, int> port_groups;
        for (const auto& [v, gids] : buckets)
            if (v.first == "port") port_groups[v.second] = static_cast<int>(gids.size());

        auto eligible = [&](const corr_detail::LinkValue& v) {
            int f = 0;
            // spawn identities pool program and parent occurrences
            if (v.first == "binprog" || v.first == "binparent") {
                const auto a = fanout.find({"binprog", v.second});
                const auto b = fanout.find({"binparent", v.second});
                f = (a != fanout.end() ? a->second : 0) + (b != fanout.end() ? b->second : 0);
            } else {
                const auto it = fanout.find(v);
                f = it != fanout.end() ? it->second : 0;
            }
            if (f > cfg_.hub_limit) return false;
            if (v.first == "port") {
                const bool well_known = std::stoll(v.second) < 1024;
                if (!well_known && port_groups[v.second] < 2) return false;
            }
            return true;
        };

        // neighbors of one group through eligible shared values
        auto neighbors = [&](std::size_t gid, auto&& fn) {
            const std::int64_t t0 = scored[groups[gid].anchor].event.ts;
            for (const auto& v : values_of[gid]) {
                if (!eligible(v)) continue;
                auto visit_bucket = [&](const corr_detail::LinkValue& bv) {
                    const auto it = buckets.find(bv);
                    if (it == buckets.end()) return;
                    for (const std::size_t other : it->second) {
                        if (other == gid) continue;
                        if (!corr_detail::values_match(v, bv)) continue;
                        const std::int64_t t1 = scored[groups[other].anchor].event.ts;
                        if (std::abs(t0 - t1) > cfg_.link_horizon_s) continue;
                        fn(other);
                    }
                };
                if (v.first == "binprog") {
                    visit_bucket({"binparent", v.second});
                } else if (v.first == "binparent") {
                    visit_bucket({"binprog", v.second});
                } else {
                    visit_bucket(v);
                }
            }
        };

        // routine relations do not qualify as suspects, however high they
        // score; counted over events so repeated twins stay routine
        std::map<std::pair<std::string, std::string>, int> pair_count;
        for (const auto& se : scored) {
            if (se.event.protocol == Protocol::AUDIT) continue;
            ++pair_count[{se.event.source.name, se.event.dest.name}];
        }
        auto pair_ok = [&](std::size_t gid) {
            const EventRecord& e = scored[groups[gid].anchor].event;
            if (e.protocol == Protocol::AUDIT) return true;
            if (cfg_.pair_limit <= 0) return true;
            return pair_count[{e.source.name, e.dest.name}] <= cfg_.pair_limit;
        };

        // union-find over groups
        std::vector<std::size_t> parent(groups.size());
        for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = i;
        auto find = [&](std::size_t x) {
            while (parent[x] != x) x = parent[x] = parent[parent[x]];
            return x;
        };
        auto unite = [&](std::size_t a, std::size_t b) { parent[find(a)] = find(b); };

        // seed-to-seed links
        std::vector<std::size_t> seeds;
        for (std::size_t gid = 0; gid < groups.size(); ++gid)
            if (is_seed[gid]) seeds.push_back(gid);
        if (stats) stats->seeds = seeds.size();
        if (stats)
            stats->candidates = static_cast<std::size_t>(
                std::count(is_candidate.begin(), is_candidate.end(), 1));

        std::map<std::size_t, Verdict> role;
        for (const std::size_t s : seeds) role[s] = Verdict::Incongru;
        for (const std::size_t s : seeds)
            neighbors(s, [&](std::size_t other) {
                if (is_seed[other]) unite(s, other);
            });

        // suspect admission, bounded growth from the seeds
        std::vector<int> depth(groups.size(), -1);
        for (const std::size_t s : seeds) depth[s] = 0;
        for (int round = 1; round <= cfg_.growth_depth; ++round) {
            std::vector<std::pair<std::size_t, std::size_t>> admitted_now;  // (group, neighbor)
            for (std::size_t gid = 0; gid < groups.size(); ++gid) {
                if (depth[gid] != round - 1 || role.find(gid) == role.end()) continue;
                neighbors(gid, [&](std::size_t other) {
                    if (role.count(other) || depth[other] == round) return;
                    if (!is_candidate[other] || !pair_ok(other)) return;
                    admitted_now.emplace_back(other, gid);
                    depth[other] = round;
                });
            }
            for (const auto& [g, via] : admitted_now) {
                if (!role.count(g)) role[g] = Verdict::Suspect;
                unite(g, via);
            }
        }

        // junction connectors: any group, whatever its score, that joins two
        // seeds that are not directly linked themselves
        std::map<std::size_t, std::set<std::size_t>> seed_neighbors_of;
        for (const std::size_t s : seeds)
            neighbors(s, [&](std::size_t other) {
                if (!is_seed[other]) seed_neighbors_of[other].insert(s);
            });
        auto seeds_adjacent = [&](std::size_t a, std::size_t b) {
            bool adjacent = false;
            neighbors(a, [&](std::size_t other) {
                if (other == b) adjacent = true;
            });
            return adjacent;
        };
        for (const auto& [gid, near_seeds] : seed_neighbors_of) {
            if (role.count(gid) || near_seeds.size() < 2) continue;
            bool junction = false;
            for (auto i = near_seeds.begin(); i != near_seeds.end() && !junction; ++i) {
                for (auto j = std::next(i); j != near_seeds.end() && !junction; ++j) {
                    if (!seeds_adjacent(*i, *j)) junction = true;
                }
            }
            if (!junction) continue;
            role[gid] = Verdict::NormalContributing;
            for (const std::size_t s : near_seeds) unite(gid, s);
        }

        // assemble components that contain at least one seed
        std::map<std::size_t, std::vector<std::size_t>> comps;
        for (const auto& [gid, r] : role) comps[find(gid)].push_back(gid);

        std::vector<PertinenceGraph> graphs;
        std::set<std::string> seen_keys;
        for (auto& [root, gids] : comps) {
            bool has_seed = false;
            for (const std::size_t g : gids) has_seed |= static_cast<bool>(is_seed[g]);
            if (!has_seed) continue;
            std::sort(gids.begin(), gids.end());
            PertinenceGraph pg = assemble(groups, gids, role, scored);
            // hysteresis key: the lexicographically smallest seed ref
            std::string key;
            for (const std::size_t g : gids) {
                if (!is_seed[g]) continue;
                const std::string& ref = scored[groups[g].anchor].event.event_ref;
                if (key.empty() || ref < key) key = ref;
            }
            pg.pertinence = pertinence_fp(pg.edges, now, cfg_);
            seen_keys.insert(key);
            const bool was_active = active_.count(key) > 0;
            if (pg.pertinence >= cfg_.theta_hi || (was_active && pg.pertinence >= cfg_.theta_lo)) {
                active_.insert(key);
                graphs.push_back(std::move(pg));
            } else {
                active_.erase(key);
            }
        }
        // graphs that vanished from the candidate set entirely are forgotten
        for (auto it = active_.begin(); it != active_.end();) {
            if (!seen_keys.count(*it))
                it = active_.erase(it);
            else
                ++it;
        }
        if (stats) stats->components = comps.size();

        std::sort(graphs.begin(), graphs.end(), [](const PertinenceGraph& a, const PertinenceGraph& b) {
            if (a.window.first != b.window.first) return a.window.first < b.window.first;
            return a.edges.front().event_ref < b.edges.front().event_ref;
        });
        for (std::size_t i = 0; i < graphs.size(); ++i) graphs[i].id = "G" + std::to_string(i + 1);
        return graphs;
    }

private:
    std::vector<PertinenceGraph> extract_singletons(const std::vector<TupleGroup>& groups,
                                                    std::span<const ScoredEvent> scored,
                                                    std::int64_t now, ExtractionStats* stats) {
        std::vector<PertinenceGraph> graphs;
        std::map<std::size_t, Verdict> role;
        for (std::size_t gid = 0; gid < groups.size(); ++gid) {
            if (groups[gid].percentile < cfg_.seed_percentile) continue;
            role[gid] = Verdict::Incongru;
            PertinenceGraph pg = assemble(groups, {gid}, role, scored);
            pg.pertinence = pertinence_fp(pg.edges, now, cfg_);
            graphs.push_back(std::move(pg));
            if (stats) ++stats->seeds;
        }
        for (std::size_t i = 0; i < graphs.size(); ++i) graphs[i].id = "G" + std::to_string(i + 1);
        if (stats) stats->components = graphs.size();
        return graphs;
    }

    static PertinenceGraph assemble(const std::vector<TupleGroup>& groups,
                                    const std::vector<std::size_t>& gids,
                                    const std::map<std::size_t, Verdict>& role,
                                    std::span<const ScoredEvent> scored) {
        PertinenceGraph pg;
        std::set<EntityId> nodes;
        for (const std::size_t gid : gids) {
            const Verdict v = role.at(gid);
            for (const std::size_t i : groups[gid].members) {
                const ScoredEvent& se = scored[i];
                GraphEdge e;
                e.event_ref = se.event.event_ref;
                e.ts = se.event.ts;
                e.from = se.event.source;
                e.to = se.event.dest;
                e.protocol = se.event.protocol;
                e.score = se.score;
                e.percentile = se.percentile;
                e.verdict = v;
                e.multiplicity = groups[gid].multiplicity();
                e.chain_from = corr_detail::chain_from_of(se.event);
                e.chain_to = corr_detail::chain_to_of(se.event);
                nodes.insert(se.event.source);
                nodes.insert(se.event.dest);
                pg.edges.push_back(std::move(e));
            }
        }
        std::sort(pg.edges.begin(), pg.edges.end(), [](const GraphEdge& a, const GraphEdge& b) {
            if (a.ts != b.ts) return a.ts < b.ts;
            return a.event_ref < b.event_ref;
        });
        pg.nodes.assign(nodes.begin(), nodes.end());
        pg.window = {pg.edges.front().ts, pg.edges.back().ts};
        return pg;
    }

    CorrelationConfig cfg_;
    std::set<std::string> active_;
};

// --- export ------------------------------------------------------------------------

namespace corr_detail {

inline std::string dot_escape(const std::string& s) {
    std::string out;
    for (const char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out;
}

inline const char* node_shape(EntityKind k) {
    switch (k) {
        case EntityKind::Equipment: return "box";
        case EntityKind::Person: return "ellipse";
        case EntityKind::MailAddress: return "note";
        case EntityKind::ExternalHost: return "diamond";
    }
    return "box";
}

}  // namespace corr_detail

// Incongruous events render red and solid, suspects black dashed, connecting
// normal signals gray dotted; every edge carries ref, score and centile.
inline std::string graph_to_dot(const PertinenceGraph& g) {
    std::string out = "digraph \"" + corr_detail::dot_escape(g.id.empty() ? "pertinence" : g.id) + "\" {\n";
    out += "  rankdir=LR;\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", g.pertinence);
    out += "  label=\"pertinence " + std::string(buf) + "\";\n";
    for (const auto& n : g.nodes) {
        out += "  \"" + corr_detail::dot_escape(n.name) + "\" [shape=" +
               corr_detail::node_shape(n.kind) + "];\n";
    }
    for (const auto& e : g.edges) {
        std::snprintf(buf, sizeof(buf), "%.4f / %.4f", e.score, e.percentile);
        std::string style;
        switch (e.verdict) {
            case Verdict::Incongru: style = "color=red, style=solid, penwidth=2"; break;
            case Verdict::Suspect: style = "color=black, style=dashed"; break;
            default: style = "color=gray50, style=dotted"; break;
        }
        out += "  \"" + corr_detail::dot_escape(e.from.name) + "\" -> \"" +
               corr_detail::dot_escape(e.to.name) + "\" [label=\"" + corr_detail::dot_escape(e.event_ref) +
               "\\n" + buf + "\", " + style + "];\n";
    }
    out += "}\n";
    return out;
}

inline nlohmann::ordered_json graph_to_json(const PertinenceGraph& g) {
    nlohmann::ordered_json j;
    j["id"] = g.id;
    j["pertinence"] = g.pertinence;
    j["window"] = {format_iso(g.window.first), format_iso(g.window.second)};
    nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
    for (const auto& n : g.nodes)
        nodes.push_back({{"kind", std::string(to_string(n.kind))}, {"name", n.name}});
    j["nodes"] = std::move(nodes);
    nlohmann::ordered_json edges = nlohmann::ordered_json::array();
    for (const auto& e : g.edges) {
        nlohmann::ordered_json je;
        je["event_ref"] = e.event_ref;
        je["ts"] = format_iso(e.ts);
        je["from"] = {{"kind", std::string(to_string(e.from.kind))}, {"name", e.from.name}};
        je["to"] = {{"kind", std::string(to_string(e.to.kind))}, {"name", e.to.name}};
        je["protocol"] = std::string(to_string(e.protocol));
        je["score"] = e.score;
        je["percentile"] = e.percentile;
        je["verdict"] = std::string(to_string(e.verdict));
        je["multiplicity"] = e.multiplicity;
        je["chain_from"] = e.chain_from;
        je["chain_to"] = e.chain_to;
        edges.push_back(std::move(je));
    }
    j["edges"] = std::move(edges);
    return j;
}

inline PertinenceGraph graph_from_json(const nlohmann::ordered_json& j) {
    PertinenceGraph g;
    g.id = j.at("id").get<std::string>();
    g.pertinence = j.at("pertinence").get<double>();
    g.window = {parse_iso(j.at("window").at(0).get<std::string>()),
                parse_iso(j.at("window").at(1).get<std::string>())};
    for (const auto& jn : j.at("nodes"))
        g.nodes.push_back({entity_kind_from(jn.at("kind").get<std::string>()),
                           jn.at("name").get<std::string>()});
    for (const auto& je : j.at("edges")) {
        GraphEdge e;
        e.event_ref = je.at("event_ref").get<std::string>();
        e.ts = parse_iso(je.at("ts").get<std::string>());
        e.from = {entity_kind_from(je.at("from").at("kind").get<std::string>()),
                  je.at("from").at("name").get<std::string>()};
        e.to = {entity_kind_from(je.at("to").at("kind").get<std::string>()),
                je.at("to").at("name").get<std::string>()};
        e.protocol = protocol_from(je.at("protocol").get<std::string>());
        e.score = je.at("score").get<double>();
        e.percentile = je.at("percentile").get<double>();
        e.verdict = verdict_from(je.at("verdict").get<std::string>());
        e.multiplicity = je.at("multiplicity").get<std::size_t>();
        e.chain_from = je.at("chain_from").get<std::string>();
        e.chain_to = je.at("chain_to").get<std::string>();
        g.edges.push_back(std::move(e));
    }
    return g;
}

inline nlohmann::ordered_json graphs_to_json(std::span<const PertinenceGraph> graphs) {
    nlohmann::ordered_json j;
    j["format"] = "ueba.graphs.v1";
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& g : graphs) arr.push_back(graph_to_json(g));
    j["graphs"] = std::move(arr);
    return j;
}

inline std::vector<PertinenceGraph> graphs_from_json(const nlohmann::ordered_json& j) {
    if (j.at("format") != "ueba.graphs.v1") throw Error("graphs file: unsupported format");
    std::vector<PertinenceGraph> out;
    for (const auto& jg : j.at("graphs")) out.push_back(graph_from_json(jg));
    return out;
}

inline std::string export_graph(const PertinenceGraph& g, std::string_view format) {
    if (format == "dot") return graph_to_dot(g);
    if (format == "json") return graph_to_json(g).dump(2) + "\n";
    throw Error("export_graph: unknown format '" + std::string(format) + "'");
}

}  // namespace ueba
