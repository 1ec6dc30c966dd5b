#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "openmap/admissibility.hpp"
#include "openmap/simulate.hpp"
#include "openmap/tower.hpp"
#include "openmap/tower_ops.hpp"
#include "openmap/ulam.hpp"

using namespace openmap;

namespace {

struct Fixture {
    QuadMap map{2.0};
    OpenIntervalSet hole = OpenIntervalSet::make({{0.28, 0.30}});
    NeighborhoodPartition part{6, 40};
    BoundRecoveryTables tables;
    ReferenceCover cover;
    TowerParams params;

    Fixture() {
        auto a1 = check_A1(map, hole, 0.4);
        auto a2 = check_A2(map, hole, 4);
        tables = BoundRecoveryTables::build(map, part, a1.r);
        auto ls = derive_length_scales(tables.eps_prime, a2.eps0, 0.0);
        params.eps = ls.eps;
        cover = build_reference_cover(map, hole, part.delta, params.eps);
    }

    TowerModel tower(std::size_t n) const {
        return build_tower(map, hole, cover, part, tables, params,
                           sample_seed_tiles(cover, n));
    }
};

// single-base self-returning toy tower: K branches of slope F' tiling the
// base, each with R = 1
TowerModel toy_tower(int branches, double Fprime, double width) {
    TowerModel t;
    t.params.eps = width;
    t.params.time_cap = 4;
    t.total_tiles = 1;
    SeedInfo si;
    si.tile = 0;
    si.lo = 0;
    si.hi = width;
    t.seeds.push_back(si);
    PieceSpan root;
    root.seed = 0;
    root.birth = 0;
    root.death = 1;
    root.mass = width;
    root.parent = -1;
    root.death_kind = 'g';
    root.traj.push_back({0.0, width, 1.0, 1.0});
    t.spans.push_back(root);
    for (int b = 0; b < branches; ++b) {
        StoppedCell c;
        c.seed_lo = width * double(b) / double(branches);
        c.seed_hi = width * double(b + 1) / double(branches);
        c.s_abs = c.s_rel = 1;
        c.img_lo = 0;
        c.img_hi = width;
        c.mass = width / Fprime;  // preimage width of the base per branch
        c.d_lo = c.d_hi = Fprime;
        c.span = 0;
        t.cells.push_back(c);
        ReturnBlock blk;
        blk.tile_first = blk.tile_last = 0;
        blk.R = 1;
        blk.mass = c.mass;
        blk.img_lo = 0;
        blk.img_hi = width;
        blk.d_lo = blk.d_hi = Fprime;
        blk.cell = int(t.cells.size()) - 1;
        blk.seed = 0;
        blk.span = 0;
        t.blocks.push_back(blk);
    }
    return t;
}

}  // namespace

TEST_CASE("toy tower: Pf = branch count / F'") {
    const int K = 3;
    const double Fp = 3.0;  // measure-consistent: K branches of slope K
    auto t = toy_tower(K, Fp, 0.5);
    auto f = TowerFunction::zeros(t);
    f.fill(1.0);
    TowerFunction out;
    auto st = tower_pf_apply(t, f, out);
    const std::size_t base = out.slot(t, 0, 0);
    CHECK(out.v1[base] == doctest::Approx(double(K) / Fp));
    CHECK(out.v2[base] == doctest::Approx(double(K) / Fp));
    CHECK(st.escaped == 0.0);
}

TEST_CASE("mass identity: integral of Pf equals f-mass over F^{-1} of the tower") {
    Fixture fx;
    auto tower = fx.tower(192);
    auto f = TowerFunction::zeros(tower);
    f.fill(1.0);
    const double norm = f.integral(tower);
    for (auto& v : f.v1) v /= norm;
    for (auto& v : f.v2) v /= norm;
    TowerFunction out;
    auto st = tower_pf_apply(tower, f, out);
    // escape deficit equals the mass over hole-preimage cells up to the
    // (reported) defect flux
    CHECK(st.integral_in == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(st.integral_out + st.escaped + st.defect ==
          doctest::Approx(st.integral_in).epsilon(1e-6));
    CHECK(st.escaped > 0.0);
    CHECK(st.defect < 0.05);
}

TEST_CASE("tower fixed point: lambda within 0.05 of the Ulam lambda") {
    Fixture fx;
    auto tower = fx.tower(768);
    auto spec = tower_power_iterate(tower, 1e-8, 600);
    CHECK(spec.converged);
    CHECK(spec.lambda > 0.8);
    CHECK(spec.lambda < 1.0);

    UlamGrid grid(4096);
    auto ulam = power_iterate(build_ulam(fx.map, fx.hole, 4096), grid);
    CHECK(std::fabs(spec.lambda - ulam.lambda) <= 0.05);
}

TEST_CASE("norm parameters and H1/H2") {
    Fixture fx;
    auto tower = fx.tower(512);
    auto mc = measure_constants(fx.map, tower, fx.part, fx.tables, fx.hole.measure());
    auto np = derive_norm_params(tower, mc, fx.params.eps, std::log(1.9), 1.0,
                                 fx.part.delta);
    REQUIRE(np.applicable);
    CHECK(np.theta > 0.0);
    CHECK(np.theta < 1.0);
    CHECK(np.xi == doctest::Approx(-0.5 * std::log(np.theta)));
    CHECK(np.a0 >= std::exp(-np.xi));
    CHECK(np.M > 0.0);

    // (H1) envelope holds at every level by construction of the fit
    auto lm = tower.level_mass(tower.params.time_cap);
    auto lh = tower.level_hole_mass(tower.params.time_cap);
    for (int l = 0; l <= tower.params.time_cap; ++l) {
        const double m = (lm[std::size_t(l)] + lh[std::size_t(l)]) / tower.seed_mass();
        CHECK(m <= np.A * std::pow(np.theta, double(l)) * (1.0 + 1e-9));
    }

    auto rep = check_H1_H2(tower, np);
    REQUIRE(rep.applicable);
    CHECK(rep.h2_rhs > 0.0);
    CHECK(rep.h2_lhs_per_base >= 0.0);
    CHECK(rep.sufficient_hole_bound > 0.0);

    // empty hole: (H2) left side vanishes
    auto cover0 = build_reference_cover(fx.map, OpenIntervalSet{}, fx.part.delta,
                                        fx.params.eps);
    auto tower0 = build_tower(fx.map, OpenIntervalSet{}, cover0, fx.part, fx.tables,
                              fx.params, sample_seed_tiles(cover0, 64));
    auto mc0 = measure_constants(fx.map, tower0, fx.part, fx.tables, 0.0);
    auto np0 = derive_norm_params(tower0, mc0, fx.params.eps, std::log(1.9), 1.0,
                                  fx.part.delta);
    if (np0.applicable) {
        auto rep0 = check_H1_H2(tower0, np0);
        CHECK(rep0.h2_lhs_per_base == 0.0);
        CHECK(rep0.h2_pass_per_base);
    }

    // slack decreases as the hole widens; the nested-family comparison keeps
    // the constants of the base configuration (the construction chooses the
    // same constants for every member of a shrinking family)
    Fixture fxw;
    fxw.hole = OpenIntervalSet::make({{0.28, 0.32}});
    auto coverw = build_reference_cover(fxw.map, fxw.hole, fxw.part.delta, fxw.params.eps);
    auto towerw = build_tower(fxw.map, fxw.hole, coverw, fxw.part, fxw.tables,
                              fxw.params, sample_seed_tiles(coverw, 512));
    auto repw = check_H1_H2(towerw, np);
    CHECK(repw.h2_lhs_per_base > rep.h2_lhs_per_base);
}

TEST_CASE("projection of the tower fixed point") {
    Fixture fx;
    // seed-sampling noise dominates the cross-method distance; 4096 sampled
    // columns bring it under the 0.1 target
    auto tower = fx.tower(4096);
    auto spec = tower_power_iterate(tower, 1e-8, 600);
    REQUIRE(spec.converged);

    UlamGrid grid(512);
    int below = 0;
    auto proj = project_density(tower, spec.phi, grid, &below);

    // normalization
    double total = 0;
    for (int g = 0; g < grid.n_cells; ++g) total += proj[std::size_t(g)] * grid.width();
    CHECK(total == doctest::Approx(1.0).epsilon(1e-6));

    // cross-method: L1 distance to the Ulam fixed density
    auto ulam = power_iterate(build_ulam(fx.map, fx.hole, 512), grid);
    CHECK(density_l1(grid, proj, ulam.density, 1) <= 0.1);
    CHECK(std::fabs(spec.lambda - ulam.lambda) <= 0.05);
}

TEST_CASE("single-cell tower projects to a uniform density") {
    auto t = toy_tower(1, 1.0, 0.25);
    auto f = TowerFunction::zeros(t);
    f.fill(1.0);
    UlamGrid grid(256);
    auto proj = project_density(t, f, grid);
    // support is [0, 0.25]: uniform density 4 there
    for (int g = 0; g < grid.n_cells; ++g) {
        const double c = grid.center(g);
        if (c > 0.01 && c < 0.24)
            CHECK(proj[std::size_t(g)] == doctest::Approx(4.0).epsilon(0.05));
    }
}

TEST_CASE("eigenvalue bounds") {
    Fixture fx;
    auto tower = fx.tower(512);
    auto mc = measure_constants(fx.map, tower, fx.part, fx.tables, fx.hole.measure());
    auto np = derive_norm_params(tower, mc, fx.params.eps, std::log(1.9), 1.0,
                                 fx.part.delta);
    REQUIRE(np.applicable);

    UlamGrid grid(4096);
    auto ulam = power_iterate(build_ulam(fx.map, fx.hole, 4096), grid);
    auto rep = eigenvalue_bound_check(ulam.lambda, tower, np, mc, fx.hole.measure(),
                                      fx.params.eps, tower.total_tiles);
    CHECK(rep.tower_ok);
    CHECK(rep.interval_ok);
    CHECK(rep.sqrt_theta_ok);  // lambda >= sqrt(theta)
    CHECK(rep.lambda >= rep.sqrt_theta);
}

TEST_CASE("density decomposition") {
    QuadMap map(2.0);
    UlamGrid grid(2048);

    // uniform density: the flat constant suffices, no spike part
    std::vector<double> uni(2048, 0.5);
    auto du = density_decomposition_check(uni, grid, map, 12, OpenIntervalSet{});
    CHECK(du.c_spike == 0.0);
    CHECK(du.c_flat == doctest::Approx(0.5));
    CHECK(du.violations == 0);

    // closed-map SRB density: spikes at +-1 dominate within the envelope
    auto srb = srb_closed_form_a2(map, grid);
    auto ds = density_decomposition_check(srb, grid, map, 12, OpenIntervalSet{});
    CHECK(ds.violations == 0);
    CHECK(std::isfinite(ds.c_spike));
    CHECK(ds.min_density_in_range > 0.0);

    // small-hole fixed density stays positive on [1-a,1] \ H
    auto H = OpenIntervalSet::make({{0.28, 0.30}});
    auto spec = power_iterate(build_ulam(map, H, 2048), grid);
    auto dh = density_decomposition_check(spec.density, grid, map, 12, H);
    CHECK(dh.violations == 0);
    CHECK(dh.min_density_in_range > 1e-4 * dh.mean_density);
}
