#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "openmap/fitting.hpp"
#include "openmap/simulate.hpp"

using namespace openmap;

TEST_CASE("no hole: p_n stays 1") {
    QuadMap map(2.0);
    auto r = survival_mc(map, OpenIntervalSet{}, InitDensity::uniform(), 50, 20000, 7);
    for (double p : r.series.p) CHECK(p == 1.0);
}

TEST_CASE("hole covering the range kills by step 1") {
    QuadMap map(2.0);
    auto H = OpenIntervalSet::make({{-1.0, 1.0}});
    auto r = survival_mc(map, H, InitDensity::uniform(), 5, 20000, 7);
    CHECK(r.series.p[1] == 0.0);
    CHECK(r.series.p[2] == 0.0);
    CHECK(r.series.truncated);
}

TEST_CASE("exact-escape rate at H = (0,1)") {
    QuadMap map(2.0);
    auto H = OpenIntervalSet::make({{0.0, 1.0}});
    auto r = survival_mc(map, H, InitDensity::uniform(), 18, 1000000, 20260809);
    auto fit = escape_rate_fit(r.series, 12);
    // exact survivor mass is 1 - cos(pi/2^{n+1}): ratio tends to 1/4
    CHECK(std::fabs(fit.lambda - 0.25) <= 0.03);
    for (int n = 1; n <= 6; ++n) {
        const double exact = 0.5 * (1.0 - std::cos(std::acos(-1.0) / std::pow(2.0, n + 1)));
        CHECK(r.series.p[std::size_t(n)] == doctest::Approx(exact).epsilon(0.05));
    }
}

TEST_CASE("escape fit on exact inputs") {
    SurvivalSeries s;
    s.samples = 1000000;
    s.n_max = 30;
    for (int n = 0; n <= 30; ++n) s.p.push_back(std::pow(0.9, n));
    auto fit = escape_rate_fit(s, 10);
    CHECK(fit.lambda == doctest::Approx(0.9).epsilon(1e-12));

    SurvivalSeries c;
    c.samples = 1000000;
    c.n_max = 30;
    c.p.assign(31, 0.37);
    CHECK(escape_rate_fit(c, 10).lambda == doctest::Approx(1.0));

    SurvivalSeries bad;
    bad.samples = 1000;
    bad.n_max = 30;
    bad.p.assign(31, 0.0);
    bad.p[0] = 1.0;
    CHECK_THROWS_AS(escape_rate_fit(bad, 10), std::runtime_error);
}

TEST_CASE("SRB references") {
    QuadMap map(2.0);
    UlamGrid grid(8192);
    auto srb = srb_closed_form_a2(map, grid);
    double total = 0.0;
    for (int i = 0; i < grid.n_cells; ++i) total += srb[std::size_t(i)] * grid.width();
    CHECK(total == doctest::Approx(1.0).epsilon(1e-6));

    CHECK_THROWS_AS(srb_closed_form_a2(QuadMap(1.9), grid), std::invalid_argument);

    auto hist = srb_orbit_histogram(map, grid, 20000000ULL, 1000);
    CHECK(density_l1(grid, hist, srb) <= 0.05);

    // evenness of the a = 2 SRB density: histogram symmetry defect
    double defect = 0.0;
    for (int i = 0; i < grid.n_cells / 2; ++i)
        defect += std::fabs(hist[std::size_t(i)] -
                            hist[std::size_t(grid.n_cells - 1 - i)]) *
                  grid.width();
    CHECK(defect <= 0.02);
}

TEST_CASE("kill-state correctness against a scalar reference") {
    QuadMap map(2.0);
    auto H = OpenIntervalSet::make({{0.28, 0.30}, {-0.7, -0.65}});
    const std::uint64_t seed = 99;
    const int n_max = 60;
    auto r = survival_mc(map, H, InitDensity::uniform(), n_max, 1000, seed);

    // plain per-trajectory reference
    std::vector<std::uint64_t> surv(std::size_t(n_max) + 1, 0);
    for (std::uint64_t s = 0; s < 1000; ++s) {
        double x = -1.0 + 2.0 * stream_u01(seed, s);
        for (int n = 0; n <= n_max; ++n) {
            bool dead = false;
            for (auto& [l, rr] : H.comp)
                if (x > l && x < rr) dead = true;
            if (dead) break;
            surv[std::size_t(n)] += 1;
            x = 1.0 - 2.0 * x * x;
        }
    }
    for (int n = 0; n <= n_max; ++n)
        CHECK(r.series.p[std::size_t(n)] == doctest::Approx(double(surv[std::size_t(n)]) / 1000.0));
}

TEST_CASE("reproducibility across thread counts") {
    QuadMap map(2.0);
    auto H = OpenIntervalSet::make({{0.28, 0.30}});
    auto r1 = survival_mc(map, H, InitDensity::uniform(), 40, 200000, 5, 128, 1);
    auto r2 = survival_mc(map, H, InitDensity::uniform(), 40, 200000, 5, 128, 4);
    for (std::size_t n = 0; n < r1.series.p.size(); ++n)
        CHECK(r1.series.p[n] == r2.series.p[n]);
    for (std::size_t c = 0; c < r1.hist[40].size(); ++c)
        CHECK(r1.hist[40][c] == r2.hist[40][c]);
}

TEST_CASE("conditional limit: identical inits differ only by noise") {
    QuadMap map(2.0);
    auto H = OpenIntervalSet::make({{0.28, 0.30}});
    auto u = InitDensity::uniform();
    const double d_same = conditional_limit_test(map, H, u, u, 40, 200000, 11, 128);
    CHECK(d_same <= 3.0 * 1.6 * std::sqrt(128.0 / (200000.0 * 0.5)));

    auto bump = InitDensity::bump(-0.25, 0.25);
    const double d5 = conditional_limit_test(map, H, u, bump, 5, 200000, 11, 128);
    const double d40 = conditional_limit_test(map, H, u, bump, 40, 200000, 11, 128);
    CHECK(d40 <= d5 + 0.02);  // monotone trend within noise
    CHECK(d40 <= 0.08);
}

TEST_CASE("shrink study validation and monotonicity") {
    QuadMap map(2.0);
    std::vector<OpenIntervalSet> fam = {
        OpenIntervalSet::make({{0.28, 0.32}}),
        OpenIntervalSet::make({{0.28, 0.30}}),
        OpenIntervalSet::make({{0.28, 0.29}}),
    };
    auto res = shrink_study(map, fam, 2048, std::exp(-6.0));
    CHECK(res.lambda_increasing);
    CHECK(res.records.size() == 3);
    CHECK(res.records.front().lambda < res.records.back().lambda);

    // non-nested family is rejected with the violated condition named
    std::vector<OpenIntervalSet> bad = {
        OpenIntervalSet::make({{0.28, 0.30}}),
        OpenIntervalSet::make({{0.5, 0.51}}),
    };
    CHECK_THROWS_WITH_AS(shrink_study(map, bad, 1024, std::exp(-6.0)),
                         doctest::Contains("condition 1"), std::invalid_argument);

    // empty-hole endpoint reproduces the closed system
    std::vector<OpenIntervalSet> with_empty = {
        OpenIntervalSet::make({{0.28, 0.29}}), OpenIntervalSet{}};
    auto res2 = shrink_study(map, with_empty, 2048, std::exp(-6.0));
    CHECK(res2.records.back().lambda == doctest::Approx(1.0).epsilon(5e-3));
}
