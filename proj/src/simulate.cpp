#include "openmap/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "openmap/fitting.hpp"

namespace openmap {

InitDensity InitDensity::uniform() {
    InitDensity d;
    d.breaks = {-1.0, 1.0};
    d.weights = {0.5};
    return d;
}

InitDensity InitDensity::bump(double lo, double hi) {
    if (!(lo < hi) || lo < -1.0 || hi > 1.0)
        throw std::invalid_argument("InitDensity::bump: bad support");
    InitDensity d;
    d.breaks = {-1.0, lo, hi, 1.0};
    d.weights = {0.0, 1.0 / (hi - lo), 0.0};
    if (lo == -1.0) {
        d.breaks.erase(d.breaks.begin());
        d.weights.erase(d.weights.begin());
    }
    if (hi == 1.0) {
        d.breaks.pop_back();
        d.weights.pop_back();
    }
    return d;
}

void InitDensity::validate() const {
    if (breaks.size() != weights.size() + 1 || weights.empty())
        throw std::invalid_argument("InitDensity: inconsistent sizes");
    if (breaks.front() != -1.0 || breaks.back() != 1.0)
        throw std::invalid_argument("InitDensity: support must be [-1,1]");
    double total = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (!(breaks[i] < breaks[i + 1]))
            throw std::invalid_argument("InitDensity: breaks not increasing");
        if (weights[i] < 0.0) throw std::invalid_argument("InitDensity: negative weight");
        total += weights[i] * (breaks[i + 1] - breaks[i]);
    }
    if (std::fabs(total - 1.0) > 1e-9)
        throw std::invalid_argument("InitDensity: must integrate to 1");
}

double InitDensity::sample(double u) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double seg = weights[i] * (breaks[i + 1] - breaks[i]);
        if (u < acc + seg || i + 1 == weights.size()) {
            if (seg <= 0.0) continue;
            const double t = std::min(1.0, std::max(0.0, (u - acc) / seg));
            return breaks[i] + t * (breaks[i + 1] - breaks[i]);
        }
        acc += seg;
    }
    return breaks.back();
}

SurvivalResult survival_mc(const QuadMap& map, const OpenIntervalSet& hole,
                           const InitDensity& init, int n_max,
                           std::uint64_t samples, std::uint64_t seed,
                           int hist_cells, int threads) {
    init.validate();
    if (samples < 1) throw std::invalid_argument("survival_mc: samples < 1");
    if (n_max < 0) throw std::invalid_argument("survival_mc: n_max < 0");
    threads = std::max(1, threads);

    const int H = hist_cells;
    const std::size_t T = std::size_t(n_max) + 1;

    struct Acc {
        std::vector<std::uint64_t> surv;
        std::vector<std::uint64_t> hist;  // (n, cell) flattened
    };
    auto acc = std::vector<Acc>(std::size_t(threads));
    UlamGrid hgrid(H > 0 ? H : 2);

    auto worker = [&](int t) {
        Acc& a = acc[std::size_t(t)];
        a.surv.assign(T, 0);
        if (H > 0) a.hist.assign(T * std::size_t(H), 0);
        const std::uint64_t lo = samples * std::uint64_t(t) / std::uint64_t(threads);
        const std::uint64_t hi = samples * std::uint64_t(t + 1) / std::uint64_t(threads);
        for (std::uint64_t s = lo; s < hi; ++s) {
            double x = init.sample(stream_u01(seed, s));
            for (int n = 0; n <= n_max; ++n) {
                if (hole.contains(x)) break;  // strict interior kill
                a.surv[std::size_t(n)] += 1;
                if (H > 0) a.hist[std::size_t(n) * std::size_t(H) + std::size_t(hgrid.locate(x))] += 1;
                if (n < n_max) x = map.step(x);
            }
        }
    };
    if (threads == 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker, t);
        for (auto& th : pool) th.join();
    }

    std::vector<std::uint64_t> surv(T, 0);
    for (auto& a : acc)
        for (std::size_t n = 0; n < T; ++n) surv[n] += a.surv[n];

    SurvivalResult out;
    out.series.samples = samples;
    out.series.seed = seed;
    out.series.n_max = n_max;
    out.series.p.resize(T);
    for (std::size_t n = 0; n < T; ++n)
        out.series.p[n] = double(surv[n]) / double(samples);
    out.series.truncated = surv[T - 1] == 0;

    if (H > 0) {
        out.hist_cells = H;
        out.hist.assign(T, std::vector<double>(std::size_t(H), 0.0));
        for (std::size_t n = 0; n < T; ++n) {
            std::uint64_t tot = 0;
            for (auto& a : acc)
                for (int c = 0; c < H; ++c) tot += a.hist[n * std::size_t(H) + std::size_t(c)];
            if (tot == 0) continue;
            for (int c = 0; c < H; ++c) {
                std::uint64_t v = 0;
                for (auto& a : acc) v += a.hist[n * std::size_t(H) + std::size_t(c)];
                out.hist[n][std::size_t(c)] = double(v) / double(tot);
            }
        }
    }
    return out;
}

EscapeFit escape_rate_fit(const SurvivalSeries& s, int window) {
    if (window < 2) throw std::invalid_argument("escape_rate_fit: window < 2");
    const double floor_p = 100.0 / double(s.samples);
    std::vector<double> xs, ys;
    int n_hi = -1;
    for (int n = int(s.p.size()) - 1; n >= 0; --n)
        if (s.p[std::size_t(n)] >= floor_p) {
            n_hi = n;
            break;
        }
    const int n_lo = std::max(0, n_hi - window + 1);
    for (int n = n_lo; n <= n_hi; ++n)
        if (s.p[std::size_t(n)] > 0.0) {
            xs.push_back(double(n));
            ys.push_back(std::log(s.p[std::size_t(n)]));
        }
    if (xs.size() < 5)
        throw std::runtime_error(
            "escape_rate_fit: fewer than 5 usable points; usable window [" +
            std::to_string(n_lo) + "," + std::to_string(n_hi) + "]");
    auto fit = linear_fit(xs, ys);
    EscapeFit ef;
    ef.lambda = std::exp(fit.slope);
    ef.stderr_lambda = ef.lambda * fit.slope_stderr;
    ef.points = int(xs.size());
    ef.n_lo = n_lo;
    ef.n_hi = n_hi;
    return ef;
}

std::vector<double> srb_closed_form_a2(const QuadMap& map, const UlamGrid& grid) {
    if (map.a != 2.0)
        throw std::invalid_argument("srb_closed_form_a2: only valid at a = 2");
    std::vector<double> density(std::size_t(grid.n_cells));
    const double pi = std::acos(-1.0);
    for (int i = 0; i < grid.n_cells; ++i) {
        const double lo = std::max(-1.0, grid.cell_lo(i));
        const double hi = std::min(1.0, grid.cell_hi(i));
        const double mass = (std::asin(hi) - std::asin(lo)) / pi;
        density[std::size_t(i)] = mass / grid.width();
    }
    return density;
}

std::vector<double> srb_orbit_histogram(const QuadMap& map, const UlamGrid& grid,
                                        std::uint64_t steps, std::uint64_t burn_in,
                                        double x0) {
    std::vector<std::uint64_t> counts(std::size_t(grid.n_cells), 0);
    double x = x0;
    for (std::uint64_t i = 0; i < burn_in; ++i) x = map.step(x);
    for (std::uint64_t i = 0; i < steps; ++i) {
        counts[std::size_t(grid.locate(x))] += 1;
        x = map.step(x);
    }
    std::vector<double> density(std::size_t(grid.n_cells));
    for (int i = 0; i < grid.n_cells; ++i)
        density[std::size_t(i)] =
            double(counts[std::size_t(i)]) / double(steps) / grid.width();
    return density;
}

double conditional_limit_test(const QuadMap& map, const OpenIntervalSet& hole,
                              const InitDensity& init1, const InitDensity& init2,
                              int n_star, std::uint64_t samples, std::uint64_t seed,
                              int hist_cells, int threads) {
    if (hist_cells < 2) throw std::invalid_argument("conditional_limit_test: hist_cells < 2");
    auto r1 = survival_mc(map, hole, init1, n_star, samples, seed ^ 0x1111111111111111ULL,
                          hist_cells, threads);
    auto r2 = survival_mc(map, hole, init2, n_star, samples, seed ^ 0x2222222222222222ULL,
                          hist_cells, threads);
    const auto& h1 = r1.hist[std::size_t(n_star)];
    const auto& h2 = r2.hist[std::size_t(n_star)];
    double l1 = 0.0;
    for (std::size_t c = 0; c < h1.size(); ++c) l1 += std::fabs(h1[c] - h2[c]);
    return l1;
}

ShrinkStudyResult shrink_study(const QuadMap& map,
                               const std::vector<OpenIntervalSet>& family,
                               int n_cells, double delta, double tol, int max_iter) {
    if (family.empty()) throw std::invalid_argument("shrink_study: empty family");

    // condition (1): nested, componentwise, largest hole first
    for (std::size_t s = 1; s < family.size(); ++s) {
        const auto& big = family[s - 1];
        const auto& small = family[s];
        if (small.measure() > big.measure() + 1e-15)
            throw std::invalid_argument("shrink_study: family not shrinking (condition 1)");
        std::vector<int> used(big.count(), 0);
        for (auto& [l, r] : small.comp) {
            int host = -1;
            for (std::size_t j = 0; j < big.count(); ++j)
                if (l >= big.comp[j].first && r <= big.comp[j].second) host = int(j);
            if (host < 0)
                throw std::invalid_argument(
                    "shrink_study: component not nested in predecessor (condition 1)");
            if (used[std::size_t(host)]++)
                throw std::invalid_argument(
                    "shrink_study: two components share a host component (condition 1)");
        }
    }
    // condition (2): 0, delta, -delta either avoid H_t or lie in every H_s
    for (double pt : {0.0, delta, -delta}) {
        const bool in_t = family.front().contains(pt);
        if (!in_t) continue;
        for (auto& Hs : family)
            if (!Hs.contains(pt))
                throw std::invalid_argument(
                    "shrink_study: 0/delta/-delta not in every hole (condition 2)");
    }

    UlamGrid grid(n_cells);
    const auto srb = map.a == 2.0 ? srb_closed_form_a2(map, grid)
                                  : srb_orbit_histogram(map, grid);

    ShrinkStudyResult out;
    out.lambda_increasing = true;
    out.l1_decreasing = true;
    for (auto& H : family) {
        auto op = build_ulam(map, H, n_cells);
        auto spec = power_iterate(op, grid, tol, max_iter);
        ShrinkRecord rec;
        rec.mH = H.measure();
        rec.lambda = spec.lambda;
        rec.l1_to_srb = density_l1(grid, spec.density, srb, 1);
        if (!out.records.empty()) {
            if (!(rec.lambda > out.records.back().lambda)) out.lambda_increasing = false;
            if (!(rec.l1_to_srb < out.records.back().l1_to_srb)) out.l1_decreasing = false;
        }
        out.records.push_back(rec);
    }
    return out;
}

}  // namespace openmap
