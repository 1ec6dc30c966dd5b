#include "openmap/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace openmap {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::string& path,
                    const std::set<std::string>& known) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key()))
            throw ConfigError("unknown key '" + path + it.key() + "'");
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void RunConfig::validate() const {
    if (!(a >= 0.0 && a <= 2.0)) throw ConfigError("a: must lie in [0,2]");
    for (auto& [l, r] : hole) {
        if (!(l < r)) throw ConfigError("hole: component with l >= r");
        if (l < -1.0 || r > 1.0) throw ConfigError("hole: component outside [-1,1]");
    }
    if (!(delta0 > 0.0 && delta0 < 1.0)) throw ConfigError("delta0: must lie in (0,1)");
    if (k0 < 1 || kmax < k0) throw ConfigError("k0/kmax: need 1 <= k0 <= kmax");
    if (m0 < 1) throw ConfigError("m0: must be >= 1");
    if (orbit_horizon < 10) throw ConfigError("orbit_horizon: must be >= 10");
    if (excursion_horizon < 10) throw ConfigError("excursion_horizon: must be >= 10");
    if (n_cells < 64) throw ConfigError("n_cells: must be >= 64");
    if (samples < 10000) throw ConfigError("samples: must be >= 10^4");
    if (threads < 1) throw ConfigError("threads: must be >= 1");
    if (tower.time_cap < 10) throw ConfigError("tower.time_cap: must be >= 10");
    if (tower.chain_rounds < 1) throw ConfigError("tower.chain_rounds: must be >= 1");
    if (tower.seed_sample < 1) throw ConfigError("tower.seed_sample: must be >= 1");
    if (tower.pilot_seed_sample < 1)
        throw ConfigError("tower.pilot_seed_sample: must be >= 1");
    if (escape.n_max < 1) throw ConfigError("escape.n_max: must be >= 1");
    if (escape.fit_window < 2) throw ConfigError("escape.fit_window: must be >= 2");
    if (escape.hist_cells < 2) throw ConfigError("escape.hist_cells: must be >= 2");
    if (escape.init != "uniform" && escape.init != "bump")
        throw ConfigError("escape.init: must be 'uniform' or 'bump'");
    if (escape.n_star < 1 || escape.n_star > escape.n_max)
        throw ConfigError("escape.n_star: must lie in [1, escape.n_max]");
    if (!(accim.tol > 0.0)) throw ConfigError("accim.tol: must be > 0");
    if (accim.max_iter < 1) throw ConfigError("accim.max_iter: must be >= 1");
    if (accim.spike_count < 1 || accim.spike_count > 20)
        throw ConfigError("accim.spike_count: must lie in [1,20]");
    if (shrink.holes.empty()) {
        if (shrink.widths.empty()) throw ConfigError("shrink.widths: must be nonempty");
        for (std::size_t i = 0; i < shrink.widths.size(); ++i) {
            if (!(shrink.widths[i] > 0.0))
                throw ConfigError("shrink.widths: entries must be > 0");
            if (i > 0 && shrink.widths[i] > shrink.widths[i - 1])
                throw ConfigError("shrink.widths: must be nonincreasing");
        }
    }
    for (auto& name : check.require)
        if (name != "classM" && name != "A1" && name != "A2" && name != "A4" &&
            name != "A3" && name != "eq1")
            throw ConfigError("check.require: unknown check '" + name + "'");
    (void)hole_set();  // sortedness/disjointness
}

RunConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    RunConfig c;
    reject_unknown(j, "", {"a", "hole", "delta0", "k0", "kmax", "m0",
                           "orbit_horizon", "excursion_horizon", "n_cells",
                           "samples", "seed", "threads", "tower", "escape",
                           "accim", "shrink", "check"});
    get_if(j, "a", c.a);
    if (j.contains("hole")) {
        c.hole.clear();
        for (auto& comp : j.at("hole")) {
            if (!comp.is_array() || comp.size() != 2)
                throw ConfigError("hole: components must be [l, r] pairs");
            c.hole.push_back({comp[0].get<double>(), comp[1].get<double>()});
        }
    }
    get_if(j, "delta0", c.delta0);
    get_if(j, "k0", c.k0);
    get_if(j, "kmax", c.kmax);
    get_if(j, "m0", c.m0);
    get_if(j, "orbit_horizon", c.orbit_horizon);
    get_if(j, "excursion_horizon", c.excursion_horizon);
    get_if(j, "n_cells", c.n_cells);
    get_if(j, "samples", c.samples);
    get_if(j, "seed", c.seed);
    get_if(j, "threads", c.threads);
    if (j.contains("tower")) {
        const auto& t = j.at("tower");
        reject_unknown(t, "tower.",
                       {"time_cap", "chain_rounds", "width_floor", "mass_floor_rel",
                        "seed_sample", "pilot_seed_sample", "eps_override",
                        "distortion_samples"});
        get_if(t, "time_cap", c.tower.time_cap);
        get_if(t, "chain_rounds", c.tower.chain_rounds);
        get_if(t, "width_floor", c.tower.width_floor);
        get_if(t, "mass_floor_rel", c.tower.mass_floor_rel);
        get_if(t, "seed_sample", c.tower.seed_sample);
        get_if(t, "pilot_seed_sample", c.tower.pilot_seed_sample);
        get_if(t, "eps_override", c.tower.eps_override);
        get_if(t, "distortion_samples", c.tower.distortion_samples);
    }
    if (j.contains("escape")) {
        const auto& e = j.at("escape");
        reject_unknown(e, "escape.",
                       {"n_max", "fit_window", "hist_cells", "init", "bump", "n_star"});
        get_if(e, "n_max", c.escape.n_max);
        get_if(e, "fit_window", c.escape.fit_window);
        get_if(e, "hist_cells", c.escape.hist_cells);
        get_if(e, "init", c.escape.init);
        if (e.contains("bump")) {
            c.escape.bump_lo = e.at("bump")[0].get<double>();
            c.escape.bump_hi = e.at("bump")[1].get<double>();
        }
        get_if(e, "n_star", c.escape.n_star);
    }
    if (j.contains("accim")) {
        const auto& a = j.at("accim");
        reject_unknown(a, "accim.", {"tol", "max_iter", "spike_count"});
        get_if(a, "tol", c.accim.tol);
        get_if(a, "max_iter", c.accim.max_iter);
        get_if(a, "spike_count", c.accim.spike_count);
    }
    if (j.contains("shrink")) {
        const auto& s = j.at("shrink");
        reject_unknown(s, "shrink.", {"left", "widths", "holes"});
        get_if(s, "left", c.shrink.left);
        if (s.contains("widths"))
            c.shrink.widths = s.at("widths").get<std::vector<double>>();
        if (s.contains("holes")) {
            c.shrink.holes.clear();
            for (auto& fam : s.at("holes")) {
                std::vector<std::pair<double, double>> H;
                for (auto& comp : fam)
                    H.push_back({comp[0].get<double>(), comp[1].get<double>()});
                c.shrink.holes.push_back(std::move(H));
            }
        }
    }
    if (j.contains("check")) {
        const auto& k = j.at("check");
        reject_unknown(k, "check.", {"require"});
        if (k.contains("require"))
            c.check.require = k.at("require").get<std::vector<std::string>>();
    }
    c.validate();
    return c;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string config_to_json(const RunConfig& c) {
    json j;
    j["a"] = c.a;
    j["hole"] = json::array();
    for (auto& [l, r] : c.hole) j["hole"].push_back({l, r});
    j["delta0"] = c.delta0;
    j["k0"] = c.k0;
    j["kmax"] = c.kmax;
    j["m0"] = c.m0;
    j["orbit_horizon"] = c.orbit_horizon;
    j["excursion_horizon"] = c.excursion_horizon;
    j["n_cells"] = c.n_cells;
    j["samples"] = c.samples;
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    j["tower"] = {{"time_cap", c.tower.time_cap},
                  {"chain_rounds", c.tower.chain_rounds},
                  {"width_floor", c.tower.width_floor},
                  {"mass_floor_rel", c.tower.mass_floor_rel},
                  {"seed_sample", c.tower.seed_sample},
                  {"pilot_seed_sample", c.tower.pilot_seed_sample},
                  {"eps_override", c.tower.eps_override},
                  {"distortion_samples", c.tower.distortion_samples}};
    j["escape"] = {{"n_max", c.escape.n_max},
                   {"fit_window", c.escape.fit_window},
                   {"hist_cells", c.escape.hist_cells},
                   {"init", c.escape.init},
                   {"bump", {c.escape.bump_lo, c.escape.bump_hi}},
                   {"n_star", c.escape.n_star}};
    j["accim"] = {{"tol", c.accim.tol},
                  {"max_iter", c.accim.max_iter},
                  {"spike_count", c.accim.spike_count}};
    j["shrink"] = {{"left", c.shrink.left}, {"widths", c.shrink.widths}};
    j["check"] = {{"require", c.check.require}};
    return j.dump(2);
}

}  // namespace openmap
