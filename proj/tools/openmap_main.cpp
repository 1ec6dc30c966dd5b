// Command-line front end: check | tower | accim | escape | shrink.
#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "openmap/config.hpp"
#include "openmap/report.hpp"

using namespace openmap;

int main(int argc, char** argv) {
    CLI::App app{"open quadratic maps: admissibility checks, tower construction, "
                 "a.c.c.i.m. and escape-rate computations"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand

    std::string config_path, out_dir = "out";
    std::uint64_t seed_override = 0;
    bool seed_set = false;
    int threads_override = 0;

    app.add_option("--config", config_path, "JSON configuration file");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--seed", seed_override, "RNG seed override")
        ->each([&](const std::string&) { seed_set = true; });
    app.add_option("--threads", threads_override, "worker threads override");

    auto* sc_check = app.add_subcommand("check", "admissibility report");
    auto* sc_tower = app.add_subcommand("tower", "tower construction and audits");
    auto* sc_accim = app.add_subcommand("accim", "Ulam eigenpair and density checks");
    auto* sc_escape = app.add_subcommand("escape", "Monte Carlo survival and rates");
    auto* sc_shrink = app.add_subcommand("shrink", "hole-shrink study");

    CLI11_PARSE(app, argc, argv);

    RunConfig cfg;
    try {
        if (!config_path.empty()) cfg = load_config_file(config_path);
        if (seed_set) cfg.seed = seed_override;
        if (threads_override > 0) cfg.threads = threads_override;
        cfg.validate();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    }

    try {
        if (sc_check->parsed()) return cmd_check(cfg, out_dir);
        if (sc_tower->parsed()) return cmd_tower(cfg, out_dir);
        if (sc_accim->parsed()) return cmd_accim(cfg, out_dir);
        if (sc_escape->parsed()) return cmd_escape(cfg, out_dir);
        if (sc_shrink->parsed()) return cmd_shrink(cfg, out_dir);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "computation failed: %s\n", e.what());
        return 2;
    }
    return 1;
}
