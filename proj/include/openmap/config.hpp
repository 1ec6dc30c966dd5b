#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "openmap/quadmap.hpp"

namespace openmap {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct TowerConfig {
    int time_cap = 400;
    int chain_rounds = 8;
    double width_floor = 0.0;  // 0 = auto
    double mass_floor_rel = 1e-8;
    int seed_sample = 2048;
    int pilot_seed_sample = 512;
    double eps_override = 0.0;  // 0 = derive from the length scales
    int distortion_samples = 64;
};

struct EscapeConfig {
    int n_max = 60;
    int fit_window = 24;
    int hist_cells = 8192;
    std::string init = "uniform";  // "uniform" | "bump"
    double bump_lo = -0.25, bump_hi = 0.25;
    int n_star = 40;
};

struct AccimConfig {
    double tol = 1e-10;
    int max_iter = 100000;
    int spike_count = 12;
};

struct ShrinkConfig {
    double left = 0.28;
    std::vector<double> widths = {4e-2, 2e-2, 1e-2, 5e-3};
    std::vector<std::vector<std::pair<double, double>>> holes;  // optional explicit
};

struct CheckConfig {
    std::vector<std::string> require = {"classM", "A1", "A2", "A4"};
};

struct RunConfig {
    double a = 2.0;
    std::vector<std::pair<double, double>> hole = {{0.28, 0.30}};
    double delta0 = 0.4;
    int k0 = 6;
    int kmax = 40;
    int m0 = 10;
    int orbit_horizon = 1000;
    int excursion_horizon = 100;
    int n_cells = 8192;
    std::uint64_t samples = 1000000;
    std::uint64_t seed = 20260809;
    int threads = 1;
    TowerConfig tower;
    EscapeConfig escape;
    AccimConfig accim;
    ShrinkConfig shrink;
    CheckConfig check;

    OpenIntervalSet hole_set() const { return OpenIntervalSet::make(hole); }
    // validates every module precondition it can see; throws ConfigError
    // naming the offending field
    void validate() const;
};

// Parses a JSON document; unknown keys are rejected with their path.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config_file(const std::string& path);
std::string config_to_json(const RunConfig& c);  // canonical echo

}  // namespace openmap
