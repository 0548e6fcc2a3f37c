// Command-line front end: generate labeled scenarios, drive the
// learn/infer/correlate pipeline, and export the resulting graphs.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ueba/pipeline.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
};

ueba::RunConfig load_config(const CommonOpts& opts) {
    ueba::RunConfig cfg = ueba::load_run_config(opts.config_path);
    if (!opts.out_dir.empty()) cfg.paths.out_dir = opts.out_dir;
    if (opts.seed) {
        cfg.seed = *opts.seed;
        cfg.scenario.seed = *opts.seed;
    }
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("-c,--config", opts.config_path, "run configuration (JSON)")->required();
    cmd->add_option("--out-dir", opts.out_dir, "override the output directory");
    cmd->add_option("--seed", opts.seed, "override the master seed");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"behavioral analytics pipeline: scenario generation, anomaly scoring, correlation"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string until_iso, now_iso, format = "dot", export_out = "graphs.dot";

    CLI::App* gen = app.add_subcommand("gen", "generate a labeled synthetic event stream");
    add_common(gen, opts);
    CLI::App* enrich = app.add_subcommand("enrich", "fit encoders and write feature vectors");
    add_common(enrich, opts);
    CLI::App* train = app.add_subcommand("train", "fit the learning snapshot on the trailing window");
    add_common(train, opts);
    train->add_option("--until", until_iso, "train on events before this UTC time");
    CLI::App* sync = app.add_subcommand("sync", "synchronize the inference snapshot");
    add_common(sync, opts);
    sync->add_option("--now", now_iso, "synchronization time (UTC)");
    CLI::App* infer = app.add_subcommand("infer", "score events against the inference snapshot");
    add_common(infer, opts);
    CLI::App* correlate = app.add_subcommand("correlate", "group, link and extract major graphs");
    add_common(correlate, opts);
    CLI::App* evaluate = app.add_subcommand("evaluate", "compare graphs against the omniscient labels");
    add_common(evaluate, opts);
    CLI::App* exp = app.add_subcommand("export", "convert extracted graphs to DOT or JSON");
    add_common(exp, opts);
    exp->add_option("--format", format, "dot or json");
    exp->add_option("--out", export_out, "output file")->required();
    CLI::App* pipeline = app.add_subcommand("pipeline", "run every stage and write a quality report");
    add_common(pipeline, opts);

    CLI11_PARSE(app, argc, argv);

    try {
        const ueba::RunConfig cfg = load_config(opts);

        if (gen->parsed()) {
            const auto stream = ueba::stage_gen(cfg);
            const auto census = ueba::label_census(stream.events, &stream.truth);
            std::printf("generated %zu events (%llu benign, %llu hostile) -> %s\n",
                        stream.events.size(), static_cast<unsigned long long>(census.benign),
                        static_cast<unsigned long long>(census.hostile),
                        cfg.paths.events().string().c_str());
        } else if (enrich->parsed()) {
            ueba::stage_enrich(cfg);
            std::printf("features -> %s\n", cfg.paths.features().string().c_str());
        } else if (train->parsed()) {
            std::optional<std::int64_t> until;
            if (!until_iso.empty()) until = ueba::parse_iso(until_iso);
            ueba::stage_train(cfg, until);
            std::printf("learning snapshot -> %s\n", cfg.paths.snapshots().string().c_str());
        } else if (sync->parsed()) {
            std::optional<std::int64_t> now;
            if (!now_iso.empty()) now = ueba::parse_iso(now_iso);
            const bool synced = ueba::stage_sync(cfg, now);
            std::printf(synced ? "inference snapshot synchronized\n"
                               : "sync period not elapsed, snapshot unchanged\n");
        } else if (infer->parsed()) {
            const auto scored = ueba::stage_infer(cfg);
            std::printf("scored %zu events -> %s\n", scored.size(), cfg.paths.scored().string().c_str());
        } else if (correlate->parsed()) {
            ueba::ExtractionStats stats;
            const auto graphs = ueba::stage_correlate(cfg, &stats);
            std::printf("%zu group(s), %zu seed(s), %zu major graph(s) -> %s\n", stats.groups,
                        stats.seeds, graphs.size(), cfg.paths.graphs_json().string().c_str());
        } else if (evaluate->parsed()) {
            const auto report = ueba::stage_evaluate(cfg);
            std::fputs(ueba::report_summary(report).c_str(), stdout);
        } else if (exp->parsed()) {
            ueba::stage_export(cfg, format, export_out);
            std::printf("graphs -> %s\n", export_out.c_str());
        } else if (pipeline->parsed()) {
            const auto report = ueba::run_pipeline(cfg);
            std::fputs(ueba::report_summary(report).c_str(), stdout);
            std::printf("report -> %s\n", cfg.paths.report().string().c_str());
        }
    } catch (const ueba::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
