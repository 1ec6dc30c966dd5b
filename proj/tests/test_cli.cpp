#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "openmap/config.hpp"
#include "openmap/report.hpp"

using namespace openmap;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunConfig small_config() {
    return parse_config(R"({
        "a": 2.0,
        "hole": [[0.28, 0.30]],
        "m0": 4,
        "n_cells": 1024,
        "samples": 50000,
        "tower": {"seed_sample": 128, "pilot_seed_sample": 64},
        "escape": {"n_max": 40, "hist_cells": 128, "n_star": 30}
    })");
}

}  // namespace

TEST_CASE("config validation") {
    CHECK_THROWS_AS(parse_config("{\"bogus\": 1}"), ConfigError);
    CHECK_THROWS_AS(parse_config("{\"tower\": {\"bogus\": 1}}"), ConfigError);
    CHECK_THROWS_AS(parse_config("not json"), ConfigError);

    // validation errors name the offending field
    try {
        parse_config("{\"samples\": 0}");
        CHECK(false);
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("samples") != std::string::npos);
    }
    try {
        parse_config("{\"hole\": [[0.3, 0.2]]}");
        CHECK(false);
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("hole") != std::string::npos);
    }

    // defaults round-trip through the canonical echo
    RunConfig def;
    auto echoed = parse_config(config_to_json(def));
    CHECK(echoed.a == def.a);
    CHECK(echoed.n_cells == def.n_cells);
    CHECK(config_to_json(echoed) == config_to_json(def));
}

TEST_CASE("check subcommand: empty hole passes with exit 0") {
    RunConfig cfg;
    cfg.hole.clear();
    cfg.check.require = {"classM", "A1", "A2", "A4", "A3", "eq1"};
    const auto dir = fs::temp_directory_path() / "openmap_test_check";
    fs::remove_all(dir);
    CHECK(cmd_check(cfg, dir.string()) == 0);

    const std::string rep = slurp(dir / "report.json");
    CHECK(rep.find("\"orbit_min_dist\": 1.0") != std::string::npos);
    CHECK(fs::exists(dir / "manifest.json"));
}

TEST_CASE("golden-file stability: identical configs give identical bytes") {
    auto cfg = small_config();
    const auto d1 = fs::temp_directory_path() / "openmap_gold_1";
    const auto d2 = fs::temp_directory_path() / "openmap_gold_2";
    fs::remove_all(d1);
    fs::remove_all(d2);

    CHECK(cmd_escape(cfg, d1.string()) == 0);
    CHECK(cmd_escape(cfg, d2.string()) == 0);
    CHECK(slurp(d1 / "survival.csv") == slurp(d2 / "survival.csv"));
    CHECK(slurp(d1 / "survival.dat") == slurp(d2 / "survival.dat"));
    CHECK(slurp(d1 / "report.json") == slurp(d2 / "report.json"));

    CHECK(cmd_tower(cfg, d1.string()) == 0);
    CHECK(cmd_tower(cfg, d2.string()) == 0);
    CHECK(slurp(d1 / "levels.csv") == slurp(d2 / "levels.csv"));
    CHECK(slurp(d1 / "tails.csv") == slurp(d2 / "tails.csv"));
    CHECK(slurp(d1 / "holefall.csv") == slurp(d2 / "holefall.csv"));

    // CSV bodies carry the generating config digest in the header
    const std::string csv = slurp(d1 / "survival.csv");
    CHECK(csv.rfind("# config=", 0) == 0);
}

TEST_CASE("escape report carries the cross-method delta") {
    auto cfg = small_config();
    const auto dir = fs::temp_directory_path() / "openmap_test_escape";
    fs::remove_all(dir);
    CHECK(cmd_escape(cfg, dir.string()) == 0);
    const std::string rep = slurp(dir / "report.json");
    CHECK(rep.find("lambda_mc") != std::string::npos);
    CHECK(rep.find("lambda_ulam") != std::string::npos);
    CHECK(rep.find("cross_method_delta") != std::string::npos);
    CHECK(rep.find("conditional_limit_l1") != std::string::npos);
}

TEST_CASE("shrink subcommand: explicit non-nested family is rejected") {
    auto cfg = small_config();
    cfg.shrink.holes = {{{0.28, 0.30}}, {{0.5, 0.51}}};
    const auto dir = fs::temp_directory_path() / "openmap_test_shrink";
    fs::remove_all(dir);
    CHECK_THROWS(cmd_shrink(cfg, dir.string()));
}
