#include "openmap/report.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include <json.hpp>

#include "openmap/admissibility.hpp"
#include "openmap/simulate.hpp"
#include "openmap/tower.hpp"
#include "openmap/tower_ops.hpp"
#include "openmap/ulam.hpp"

namespace openmap {

using nlohmann::json;

std::string fnv1a_hex(const std::string& content) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : content) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

// collects output files, then writes them plus the manifest
class Artifacts {
  public:
    Artifacts(std::string command, const RunConfig& cfg, std::string out_dir)
        : command_(std::move(command)), out_dir_(std::move(out_dir)),
          config_echo_(config_to_json(cfg)),
          config_digest_(fnv1a_hex(config_echo_)),
          start_(std::chrono::steady_clock::now()) {}

    const std::string& config_digest() const { return config_digest_; }

    void add(const std::string& name, const std::string& content) {
        files_[name] = content;
    }

    std::string csv_header(const std::string& columns) const {
        return "# config=" + config_digest_ + "\n" + columns + "\n";
    }

    void set_report(json j) { report_ = std::move(j); }

    void write() {
        namespace fs = std::filesystem;
        fs::create_directories(out_dir_);
        files_["report.json"] = report_.dump(2) + "\n";
        json manifest;
        manifest["command"] = command_;
        manifest["version"] = "openmap 0.1.0";
        manifest["rng"] = "splitmix64-stream";
        manifest["config"] = json::parse(config_echo_);
        manifest["config_digest"] = config_digest_;
        json digests;
        for (auto& [name, content] : files_) digests[name] = fnv1a_hex(content);
        manifest["files"] = digests;
        const auto elapsed = std::chrono::duration<double>(
                                 std::chrono::steady_clock::now() - start_)
                                 .count();
        manifest["timing_seconds"] = elapsed;
        for (auto& [name, content] : files_) {
            std::ofstream out(fs::path(out_dir_) / name, std::ios::binary);
            out << content;
        }
        std::ofstream out(fs::path(out_dir_) / "manifest.json", std::ios::binary);
        out << manifest.dump(2) << "\n";
    }

  private:
    std::string command_;
    std::string out_dir_;
    std::string config_echo_;
    std::string config_digest_;
    std::chrono::steady_clock::time_point start_;
    std::map<std::string, std::string> files_;
    json report_;
};

json interval_set_json(const OpenIntervalSet& s) {
    json out = json::array();
    for (auto& [l, r] : s.comp) out.push_back({l, r});
    return out;
}

// ---- shared tower pipeline -------------------------------------------

struct TowerPipeline {
    QuadMap map;
    OpenIntervalSet hole;
    NeighborhoodPartition part;
    BoundRecoveryTables tables;
    A1Report a1;
    A2Report a2;
    LengthScales scales_pilot, scales;
    MeasuredConstants pilot_mc, mc;
    ReferenceCover cover;
    TowerModel tower;
    TowerParams params;

    TowerPipeline(const RunConfig& cfg)
        : map(cfg.a), hole(cfg.hole_set()), part(cfg.k0, cfg.kmax) {
        a1 = check_A1(map, hole, cfg.delta0, cfg.orbit_horizon);
        if (!a1.pass)
            throw std::runtime_error(
                "tower pipeline: (A1) fails, the critical orbit meets the hole");
        a2 = check_A2(map, hole, cfg.m0);
        tables = BoundRecoveryTables::build(map, part, a1.r);

        double eps = cfg.tower.eps_override;
        if (eps <= 0.0) {
            if (!a2.pass || a2.eps0 <= 0.0)
                throw std::runtime_error(
                    "tower pipeline: (A2) yields no eps0 at m0=" +
                    std::to_string(cfg.m0) +
                    "; lower m0 or set tower.eps_override");
            // two-phase: pilot run measures C~, then eps is fixed
            scales_pilot = derive_length_scales(tables.eps_prime, a2.eps0, 0.0);
            TowerParams pp = base_params(cfg);
            pp.eps = scales_pilot.eps;
            auto pilot_cover = build_reference_cover(map, hole, part.delta, pp.eps);
            auto pilot = build_tower(map, hole, pilot_cover, part, tables, pp,
                                     sample_seed_tiles(pilot_cover,
                                                       std::size_t(cfg.tower.pilot_seed_sample)));
            pilot_mc = measure_constants(map, pilot, part, tables, hole.measure(),
                                         cfg.tower.distortion_samples);
            scales = derive_length_scales(tables.eps_prime, a2.eps0, pilot_mc.C_tilde);
            eps = scales.eps;
        } else {
            scales_pilot = scales = derive_length_scales(
                std::max(tables.eps_prime, eps * 65536.0),
                std::max(eps * 65536.0, 1e-12), 0.0);
            scales.eps = eps;
        }
        params = base_params(cfg);
        params.eps = eps;
        cover = build_reference_cover(map, hole, part.delta, eps);
        tower = build_tower(map, hole, cover, part, tables, params,
                            sample_seed_tiles(cover, std::size_t(cfg.tower.seed_sample)));
        mc = measure_constants(map, tower, part, tables, hole.measure(),
                               cfg.tower.distortion_samples);
    }

    static TowerParams base_params(const RunConfig& cfg) {
        TowerParams p;
        p.time_cap = cfg.tower.time_cap;
        p.chain_rounds = cfg.tower.chain_rounds;
        p.width_floor = cfg.tower.width_floor;
        p.mass_floor_rel = cfg.tower.mass_floor_rel;
        return p;
    }
};

json constants_json(const MeasuredConstants& mc) {
    return json{{"C_prime", mc.C_prime},
                {"S_rate", mc.S_rate},
                {"C_dprime", mc.C_dprime},
                {"theta", mc.theta},
                {"D", mc.D},
                {"D_prime", mc.D_prime},
                {"c1", mc.c1},
                {"c2", mc.c2},
                {"C_tilde", mc.C_tilde},
                {"d0", mc.d0},
                {"c0_prime", mc.c0_prime},
                {"min_return_expansion", mc.min_return_expansion},
                {"weak_bound_max", mc.weak_bound_max}};
}

json scales_json(const LengthScales& ls) {
    return json{{"eps_prime", ls.eps_prime}, {"eps0", ls.eps0},
                {"C_tilde", ls.C_tilde},     {"eps", ls.eps},
                {"guard_ok", ls.guard_ok}};
}

}  // namespace

// ---- check --------------------------------------------------------------

int cmd_check(const RunConfig& cfg, const std::string& out_dir) {
    Artifacts art("check", cfg, out_dir);
    QuadMap map(cfg.a);
    auto hole = cfg.hole_set();

    json rep;
    rep["hole"] = interval_set_json(hole);
    rep["hole_measure"] = hole.measure();
    std::map<std::string, bool> verdicts;

    auto cm = check_class_M(map, cfg.delta0, cfg.orbit_horizon,
                            cfg.excursion_horizon);
    verdicts["classM"] = cm.pass();
    rep["classM"] = {{"pass", cm.pass()},
                     {"a_pass", cm.a_pass},
                     {"b_pass", cm.b_pass},
                     {"c_pass", cm.c_pass},
                     {"orbit_min_dist", cm.orbit_min_dist},
                     {"lambda0_measured", cm.lambda0_measured},
                     {"M0", cm.constants.M0},
                     {"c0", cm.constants.c0},
                     {"s0_max", cm.s0_max},
                     {"failure", cm.failure},
                     {"orbit_horizon", cm.orbit_horizon},
                     {"excursion_horizon", cm.excursion_horizon}};

    auto hr = check_hole_assumptions(map, hole, cfg.delta0, cfg.m0,
                                     cfg.orbit_horizon);
    verdicts["A1"] = hr.a1_pass;
    verdicts["A2"] = hr.a2_pass;
    verdicts["A4"] = hr.a4_pass;
    rep["A1"] = {{"pass", hr.a1_pass}, {"r", hr.r}, {"min_dist", hr.a1.min_dist}};
    rep["A2"] = {{"pass", hr.a2_pass}, {"eps0", hr.eps0}, {"m0", cfg.m0},
                 {"note", hr.a2.note}};
    rep["n0"] = hr.n0;
    rep["A4"] = {{"pass", hr.a4_pass},
                 {"clause", std::string(1, hr.a4.clause)},
                 {"i", hr.a4.i},
                 {"j", hr.a4.j},
                 {"k", hr.a4.k}};

    // A3 and the no-piece-left-behind bound need tower-measured constants;
    // run the pilot pipeline when the prerequisites hold
    verdicts["A3"] = false;
    verdicts["eq1"] = false;
    if (hr.a1_pass && (hr.a2_pass || cfg.tower.eps_override > 0.0)) {
        try {
            TowerPipeline pipe(cfg);
            auto a3 = check_A3(hole.measure(), pipe.scales.eps, pipe.mc.theta,
                               std::max(pipe.mc.D, 1e-300));
            verdicts["A3"] = a3.pass;
            rep["A3"] = {{"pass", a3.pass},
                         {"mH", a3.mH},
                         {"rhs", a3.rhs},
                         {"slack", a3.slack},
                         {"max_admissible", a3.max_admissible}};
            auto e1 = check_no_piece_left_behind(hole.measure(), pipe.scales.eps,
                                                 std::log(1.9), cfg.m0,
                                                 pipe.mc.c0_prime, pipe.part.delta);
            verdicts["eq1"] = e1.pass;
            rep["eq1"] = {{"pass", e1.pass}, {"mH", e1.mH}, {"rhs", e1.rhs}};
            rep["length_scales"] = scales_json(pipe.scales);
            rep["measured_constants"] = constants_json(pipe.mc);
        } catch (const std::exception& e) {
            rep["A3"] = {{"pass", false}, {"error", e.what()}};
        }
    } else if (hole.empty()) {
        // vacuous: zero hole measure passes (A3) with full slack
        verdicts["A3"] = true;
        verdicts["eq1"] = true;
        rep["A3"] = {{"pass", true}, {"mH", 0.0}, {"note", "empty hole"}};
        rep["eq1"] = {{"pass", true}, {"mH", 0.0}, {"note", "empty hole"}};
    }

    bool all_required = true;
    for (auto& name : cfg.check.require)
        if (!verdicts.count(name) || !verdicts.at(name)) all_required = false;
    rep["required"] = cfg.check.require;
    rep["pass"] = all_required;

    art.set_report(rep);
    art.write();
    return all_required ? 0 : 3;
}

// ---- tower --------------------------------------------------------------

int cmd_tower(const RunConfig& cfg, const std::string& out_dir) {
    Artifacts art("tower", cfg, out_dir);
    TowerPipeline pipe(cfg);
    const auto& tower = pipe.tower;

    auto tS = tail_S(tower);
    auto tR = tail_R(tower);
    auto hf = hole_fall_stats(tower, pipe.hole.measure(), pipe.mc.theta);
    auto pc = piece_count_audit(tower);
    auto mk = markov_return_check(pipe.map, tower, pipe.cover);
    auto gr = growth_lemma_check(pipe.map, pipe.hole, pipe.cover, pipe.part,
                                 pipe.tables, pipe.params, 100, cfg.seed);

    const int cap = tower.params.time_cap;
    auto lm = tower.level_mass(cap);
    auto lh = tower.level_hole_mass(cap);

    // levels.csv: level, unreturned mass, hole mass, max coexisting pieces
    {
        std::string csv = art.csv_header(
            "level,mass_interval_units,hole_mass_interval_units,max_pieces");
        int last = cap;
        while (last > 0 && lm[std::size_t(last)] == 0 && lh[std::size_t(last)] == 0)
            --last;
        for (int l = 0; l <= last; ++l)
            csv += std::to_string(l) + "," + fmt17(lm[std::size_t(l)]) + "," +
                   fmt17(lh[std::size_t(l)]) + "," +
                   std::to_string(pc.max_count[std::size_t(l)]) + "\n";
        art.add("levels.csv", csv);
    }
    // tails.csv and plot data
    {
        std::string csv = art.csv_header("n,mass_S_gt_n,mass_R_gt_n");
        std::string datS, datR;
        int last = cap;
        while (last > 0 && tR.mass_gt[std::size_t(last)] ==
                               tR.mass_gt[std::size_t(cap)] && last > tR.fit_hi + 5)
            --last;
        for (int n = 0; n <= last; ++n) {
            csv += std::to_string(n) + "," + fmt17(tS.mass_gt[std::size_t(n)]) + "," +
                   fmt17(tR.mass_gt[std::size_t(n)]) + "\n";
            datS += std::to_string(n) + " " + fmt17(tS.mass_gt[std::size_t(n)]) + "\n";
            datR += std::to_string(n) + " " + fmt17(tR.mass_gt[std::size_t(n)]) + "\n";
        }
        art.add("tails.csv", csv);
        art.add("S_tail.dat", datS);
        art.add("R_tail.dat", datR);
    }
    // holefall.csv
    {
        std::string csv = art.csv_header("n,mass_R_eq_n_fell_per_seed_mass");
        for (std::size_t n = 0; n < hf.mass_at.size(); ++n)
            if (hf.mass_at[n] > 0)
                csv += std::to_string(n) + "," + fmt17(hf.mass_at[n]) + "\n";
        art.add("holefall.csv", csv);
    }
    // cells.csv: the partition elements of the sampled columns
    {
        std::string csv = art.csv_header(
            "seed_tile,stop_abs,stop_rel,fell,hole_component,mass,img_lo,img_hi,"
            "chain_len,itinerary_len");
        for (auto& c : tower.cells) {
            const auto seed_tile =
                c.span >= 0 && tower.spans[std::size_t(c.span)].seed >= 0
                    ? tower.seeds[std::size_t(tower.spans[std::size_t(c.span)].seed)].tile
                    : 0;
            csv += std::to_string(seed_tile) + "," + std::to_string(c.s_abs) + "," +
                   std::to_string(c.s_rel) + "," + std::to_string(int(c.fell)) + "," +
                   std::to_string(c.hole_component) + "," + fmt17(c.mass) + "," +
                   fmt17(c.img_lo) + "," + fmt17(c.img_hi) + "," +
                   std::to_string(c.chain.size()) + "," +
                   std::to_string(c.itin.size()) + "\n";
        }
        art.add("cells.csv", csv);
    }

    json rep;
    rep["eps"] = pipe.params.eps;
    rep["growth_threshold"] = pipe.params.grown_stop();
    rep["total_tiles"] = tower.total_tiles;
    rep["seed_sample"] = tower.seeds.size();
    rep["length_scales"] = scales_json(pipe.scales);
    rep["pilot_constants"] = constants_json(pipe.pilot_mc);
    rep["measured_constants"] = constants_json(pipe.mc);
    rep["conservation_error"] = tower.conservation_error();
    rep["defect"] = tower.defect();
    rep["seed_mass"] = tower.seed_mass();
    rep["cells"] = tower.cells.size();
    rep["blocks"] = tower.blocks.size();
    rep["hole_cells"] = tower.holes.size();
    {
        double core = 0, degen = 0, capm = 0, chain = 0, fold = 0;
        for (auto& r : tower.residuals) {
            switch (r.kind) {
                case Residual::Kind::Core: core += r.mass; break;
                case Residual::Kind::Degenerate: degen += r.mass; break;
                case Residual::Kind::TimeCap: capm += r.mass; break;
                case Residual::Kind::ChainTruncated: chain += r.mass; break;
                case Residual::Kind::FoldGuard: fold += r.mass; break;
            }
        }
        int flagged = 0;
        for (auto& c : tower.cells)
            if (c.adjoin_flagged) ++flagged;
        rep["residuals"] = {{"core", core},
                            {"degenerate", degen},
                            {"time_cap", capm},
                            {"chain_truncated", chain},
                            {"fold_guard", fold}};
        rep["adjoin_flagged_cells"] = flagged;
    }
    rep["tail_S"] = {{"fit_valid", tS.fit_valid},
                     {"slope", tS.fit.slope},
                     {"r2", tS.fit.r2},
                     {"window", {tS.fit_lo, tS.fit_hi}}};
    rep["tail_R"] = {{"fit_valid", tR.fit_valid},
                     {"slope", tR.fit.slope},
                     {"r2", tR.fit.r2},
                     {"theta", std::exp(tR.fit.slope)},
                     {"window", {tR.fit_lo, tR.fit_hi}}};
    rep["hole_fall"] = {{"total", hf.total},
                        {"fit_valid", hf.fit_valid},
                        {"theta", hf.fit_valid ? std::exp(hf.fit.slope) : 0.0},
                        {"r2", hf.fit_valid ? hf.fit.r2 : 0.0},
                        {"D_envelope", hf.D_envelope},
                        {"Dprime_envelope", hf.Dprime_envelope}};
    rep["piece_count"] = {{"max_ratio", pc.max_ratio},
                          {"max_ratio_level", pc.max_ratio_level}};
    rep["markov"] = {{"sampled", mk.sampled},
                     {"max_endpoint_error", mk.max_endpoint_error},
                     {"min_grown_length", mk.min_grown_length},
                     {"min_return_fraction", mk.min_return_fraction}};
    rep["growth"] = {{"trials", gr.trials},
                     {"grew", gr.grew},
                     {"absorbed", gr.absorbed},
                     {"stalled", gr.stalled}};
    art.set_report(rep);
    art.write();
    return 0;
}

// ---- accim ----------------------------------------------------------------

int cmd_accim(const RunConfig& cfg, const std::string& out_dir) {
    Artifacts art("accim", cfg, out_dir);
    QuadMap map(cfg.a);
    auto hole = cfg.hole_set();
    UlamGrid grid(cfg.n_cells);

    auto op = build_ulam(map, hole, cfg.n_cells);
    double max_row = 0, min_row = 2;
    for (int i = 0; i < op.n_cells; ++i) {
        max_row = std::max(max_row, op.row_sum[std::size_t(i)]);
        min_row = std::min(min_row, op.row_sum[std::size_t(i)]);
    }
    auto spec = power_iterate(op, grid, cfg.accim.tol, cfg.accim.max_iter);
    if (!spec.converged && !spec.total_escape)
        throw std::runtime_error("accim: power iteration did not converge");

    auto srb = map.a == 2.0 ? srb_closed_form_a2(map, grid)
                            : srb_orbit_histogram(map, grid);
    const double l1_srb = density_l1(grid, spec.density, srb, 1);
    auto dec = density_decomposition_check(spec.density, grid, map,
                                           cfg.accim.spike_count, hole);

    {
        std::string csv = art.csv_header("x_lo,x_hi,psi");
        std::string dat;
        for (int g = 0; g < grid.n_cells; ++g) {
            csv += fmt17(grid.cell_lo(g)) + "," + fmt17(grid.cell_hi(g)) + "," +
                   fmt17(spec.density[std::size_t(g)]) + "\n";
            dat += fmt17(grid.center(g)) + " " + fmt17(spec.density[std::size_t(g)]) + "\n";
        }
        art.add("density.csv", csv);
        art.add("density.dat", dat);
    }

    json rep;
    rep["lambda"] = spec.lambda;
    rep["iterations"] = spec.iterations;
    rep["residual"] = spec.residual;
    rep["row_sum_max"] = max_row;
    rep["row_sum_min"] = min_row;
    rep["l1_to_srb_excl_boundary"] = l1_srb;
    rep["decomposition"] = {{"c_flat", dec.c_flat},
                            {"c_spike", dec.c_spike},
                            {"violations", dec.violations},
                            {"spike_cells", dec.spike_cells},
                            {"min_density_in_range", dec.min_density_in_range},
                            {"mean_density", dec.mean_density}};

    // tower-side verdicts (eigenvalue bounds, H1/H2, cross-method distances)
    if (!hole.empty()) {
        try {
            TowerPipeline pipe(cfg);
            auto np = derive_norm_params(pipe.tower, pipe.mc, pipe.params.eps,
                                         std::log(1.9), 1.0, pipe.part.delta);
            auto eb = eigenvalue_bound_check(spec.lambda, pipe.tower, np, pipe.mc,
                                             hole.measure(), pipe.params.eps,
                                             pipe.tower.total_tiles);
            auto h12 = check_H1_H2(pipe.tower, np);
            auto tspec = tower_power_iterate(pipe.tower);
            // the sampled-column projection is compared on a coarser grid so
            // per-cell sampling noise does not swamp the distance
            UlamGrid pgrid(std::min(cfg.n_cells, 512));
            auto pspec = cfg.n_cells <= 512
                             ? spec
                             : power_iterate(build_ulam(map, hole, pgrid.n_cells),
                                             pgrid, cfg.accim.tol, cfg.accim.max_iter);
            int below = 0;
            auto proj = project_density(pipe.tower, tspec.phi, pgrid, &below);
            auto norms = tower_norms(pipe.tower, tspec.phi, np, pgrid);
            rep["tower"] = {
                {"lambda", tspec.lambda},
                {"lambda_delta_vs_ulam", std::fabs(tspec.lambda - spec.lambda)},
                {"projection_l1_vs_ulam", density_l1(pgrid, proj, pspec.density, 1)},
                {"projection_grid", pgrid.n_cells},
                {"projection_below_resolution", below},
                {"defect", pipe.tower.defect()},
                {"norms",
                 {{"sup", norms.sup_norm},
                  {"r", norms.r_norm},
                  {"skipped_narrow", norms.skipped_narrow},
                  {"in_XM", norms.in_XM}}},
                {"norm_params",
                 {{"applicable", np.applicable},
                  {"theta", np.theta},
                  {"xi", np.xi},
                  {"A", np.A},
                  {"a0", np.a0},
                  {"b", np.b},
                  {"M", np.M},
                  {"nu", np.nu},
                  {"beta", np.beta}}},
                {"H2",
                 {{"applicable", h12.applicable},
                  {"lhs_per_base", h12.h2_lhs_per_base},
                  {"lhs_extrapolated", h12.h2_lhs_extrapolated},
                  {"rhs", h12.h2_rhs},
                  {"pass_per_base", h12.h2_pass_per_base},
                  {"sufficient_hole_bound", h12.sufficient_hole_bound}}},
                {"eigen_bounds",
                 {{"bound_tower", eb.bound_tower},
                  {"bound_interval", eb.bound_interval},
                  {"sqrt_theta", eb.sqrt_theta},
                  {"tower_ok", eb.tower_ok},
                  {"interval_ok", eb.interval_ok},
                  {"sqrt_theta_ok", eb.sqrt_theta_ok}}}};
        } catch (const std::exception& e) {
            rep["tower"] = {{"error", e.what()}};
        }
    }
    art.set_report(rep);
    art.write();
    return 0;
}

// ---- escape ---------------------------------------------------------------

int cmd_escape(const RunConfig& cfg, const std::string& out_dir) {
    Artifacts art("escape", cfg, out_dir);
    QuadMap map(cfg.a);
    auto hole = cfg.hole_set();

    auto init = cfg.escape.init == "bump"
                    ? InitDensity::bump(cfg.escape.bump_lo, cfg.escape.bump_hi)
                    : InitDensity::uniform();
    auto run = survival_mc(map, hole, init, cfg.escape.n_max, cfg.samples, cfg.seed,
                           cfg.escape.hist_cells, cfg.threads);
    auto fit = escape_rate_fit(run.series, cfg.escape.fit_window);

    UlamGrid grid(cfg.n_cells);
    auto ulam = power_iterate(build_ulam(map, hole, cfg.n_cells), grid,
                              cfg.accim.tol, cfg.accim.max_iter);

    const double cond_l1 = conditional_limit_test(
        map, hole, InitDensity::uniform(),
        InitDensity::bump(cfg.escape.bump_lo, cfg.escape.bump_hi), cfg.escape.n_star,
        cfg.samples, cfg.seed, std::min(cfg.escape.hist_cells, 256), cfg.threads);

    {
        std::string csv = art.csv_header("n,p_n");
        std::string dat;
        for (std::size_t n = 0; n < run.series.p.size(); ++n) {
            csv += std::to_string(n) + "," + fmt17(run.series.p[n]) + "\n";
            dat += std::to_string(n) + " " + fmt17(run.series.p[n]) + "\n";
        }
        art.add("survival.csv", csv);
        art.add("survival.dat", dat);
    }

    json rep;
    rep["lambda_mc"] = fit.lambda;
    rep["lambda_mc_stderr"] = fit.stderr_lambda;
    rep["fit_points"] = fit.points;
    rep["fit_window"] = {fit.n_lo, fit.n_hi};
    rep["lambda_ulam"] = ulam.lambda;
    rep["cross_method_delta"] = std::fabs(fit.lambda - ulam.lambda);
    rep["samples"] = cfg.samples;
    rep["seed"] = cfg.seed;
    rep["generator"] = run.series.generator;
    rep["truncated"] = run.series.truncated;
    rep["conditional_limit_l1"] = cond_l1;
    rep["conditional_limit_n_star"] = cfg.escape.n_star;
    art.set_report(rep);
    art.write();
    return 0;
}

// ---- shrink ---------------------------------------------------------------

int cmd_shrink(const RunConfig& cfg, const std::string& out_dir) {
    Artifacts art("shrink", cfg, out_dir);
    QuadMap map(cfg.a);

    std::vector<OpenIntervalSet> family;
    if (!cfg.shrink.holes.empty()) {
        for (auto& comps : cfg.shrink.holes) family.push_back(OpenIntervalSet::make(comps));
    } else {
        for (double w : cfg.shrink.widths)
            family.push_back(OpenIntervalSet::make({{cfg.shrink.left, cfg.shrink.left + w}}));
    }
    const double delta = std::exp(-double(cfg.k0));
    auto res = shrink_study(map, family, cfg.n_cells, delta, cfg.accim.tol,
                            cfg.accim.max_iter);

    {
        std::string csv = art.csv_header("hole_measure,lambda,l1_to_srb");
        std::string dat;
        for (auto& r : res.records) {
            csv += fmt17(r.mH) + "," + fmt17(r.lambda) + "," + fmt17(r.l1_to_srb) + "\n";
            dat += fmt17(r.mH) + " " + fmt17(r.lambda) + "\n";
        }
        art.add("shrink.csv", csv);
        art.add("shrink.dat", dat);
    }

    json rep;
    rep["lambda_increasing"] = res.lambda_increasing;
    rep["l1_decreasing"] = res.l1_decreasing;
    json recs = json::array();
    for (auto& r : res.records)
        recs.push_back({{"mH", r.mH}, {"lambda", r.lambda}, {"l1_to_srb", r.l1_to_srb}});
    rep["records"] = recs;
    art.set_report(rep);
    art.write();
    return 0;
}

}  // namespace openmap
