#include "openmap/tower_ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace openmap {

namespace {

constexpr double kTiny = 1e-300;

int span_lifetime(const PieceSpan& s) {
    return int(s.traj.size());
}

double seed_width_of(const TowerModel& t, int span) {
    return t.seeds[std::size_t(t.spans[std::size_t(span)].seed)].width();
}

// unit-coordinate measure of one cell of the span's column
double unit_mass(const TowerModel& t, int span) {
    const auto& s = t.spans[std::size_t(span)];
    return s.mass / seed_width_of(t, span);
}

double lerp(double a, double b, double t) { return a + (b - a) * t; }

}  // namespace

TowerFunction TowerFunction::zeros(const TowerModel& tower) {
    TowerFunction f;
    f.offset.resize(tower.spans.size());
    std::size_t total = 0;
    for (std::size_t i = 0; i < tower.spans.size(); ++i) {
        f.offset[i] = total;
        total += std::size_t(span_lifetime(tower.spans[i]));
    }
    f.v1.assign(total, 0.0);
    f.v2.assign(total, 0.0);
    return f;
}

void TowerFunction::fill(double value) {
    std::fill(v1.begin(), v1.end(), value);
    std::fill(v2.begin(), v2.end(), value);
}

std::size_t TowerFunction::slot(const TowerModel& tower, int span, int level) const {
    const auto& s = tower.spans[std::size_t(span)];
    return offset[std::size_t(span)] + std::size_t(level - s.birth);
}

double TowerFunction::mean_at(const TowerModel& tower, int span, int level) const {
    const std::size_t k = slot(tower, span, level);
    return 0.5 * (v1[k] + v2[k]);
}

double TowerFunction::integral(const TowerModel& tower) const {
    double total = 0;
    for (std::size_t i = 0; i < tower.spans.size(); ++i) {
        const auto& s = tower.spans[i];
        const double mu = unit_mass(tower, int(i));
        const int life = span_lifetime(s);
        for (int l = 0; l < life; ++l) {
            const std::size_t k = offset[i] + std::size_t(l);
            total += 0.5 * (v1[k] + v2[k]) * mu;
        }
    }
    return total;
}

TowerPFStats tower_pf_apply(const TowerModel& tower, const TowerFunction& f,
                            TowerFunction& out) {
    TowerPFStats st;
    st.integral_in = f.integral(tower);
    out = TowerFunction::zeros(tower);

    const std::size_t n_seeds = tower.seeds.size();
    double pooled_return = 0;  // total flux deposited onto the sampled bases

    // climb within spans
    for (std::size_t i = 0; i < tower.spans.size(); ++i) {
        const auto& s = tower.spans[i];
        const int life = span_lifetime(s);
        for (int l = 1; l < life; ++l) {
            const std::size_t src = f.offset[i] + std::size_t(l - 1);
            const std::size_t dst = f.offset[i] + std::size_t(l);
            out.v1[dst] = f.v1[src];
            out.v2[dst] = f.v2[src];
        }
    }

    // cross-span flow at deaths: children inherit the parent profile at
    // their image-fraction range
    for (std::size_t i = 0; i < tower.spans.size(); ++i) {
        const auto& s = tower.spans[i];
        if (s.parent < 0 || s.birth == 0) continue;
        const auto& par = tower.spans[std::size_t(s.parent)];
        const int plife = span_lifetime(par);
        if (plife == 0) continue;
        const std::size_t src = f.offset[std::size_t(s.parent)] + std::size_t(plife - 1);
        // parent profile in ascending-image order
        const auto& row = par.traj.back();
        const bool rising = row.img_lo <= row.img_hi;
        const double a = rising ? f.v1[src] : f.v2[src];
        const double b = rising ? f.v2[src] : f.v1[src];
        const std::size_t dst = f.offset[i];
        if (dst < out.v1.size() && span_lifetime(s) > 0) {
            out.v1[dst] = lerp(a, b, s.frac_lo);
            out.v2[dst] = lerp(a, b, s.frac_hi);
        }
    }

    // f-value carried by a dying span's cell: its own last profile when the
    // span climbed, else the parent profile at the cell's fraction range
    auto exit_value = [&](int span) {
        const auto& s = tower.spans[std::size_t(span)];
        const int plife = span_lifetime(s);
        if (plife > 0) {
            const std::size_t src = f.offset[std::size_t(span)] + std::size_t(plife - 1);
            return 0.5 * (f.v1[src] + f.v2[src]);
        }
        if (s.parent >= 0) {
            const auto& par = tower.spans[std::size_t(s.parent)];
            const int pl = span_lifetime(par);
            if (pl > 0) {
                const std::size_t src =
                    f.offset[std::size_t(s.parent)] + std::size_t(pl - 1);
                const auto& row = par.traj.back();
                const bool rising = row.img_lo <= row.img_hi;
                const double a = rising ? f.v1[src] : f.v2[src];
                const double b = rising ? f.v2[src] : f.v1[src];
                return lerp(a, b, 0.5 * (s.frac_lo + s.frac_hi));
            }
        }
        return 1.0;
    };

    // returns and escapes
    for (auto& b : tower.blocks)
        pooled_return +=
            exit_value(tower.cells[std::size_t(b.cell)].span) * b.mass /
            tower.seeds[std::size_t(b.seed)].width();
    for (auto& h : tower.holes)
        st.escaped += exit_value(h.span) * h.mass /
                      tower.seeds[std::size_t(h.seed)].width();

    // rewired deposit: the sampled bases stand in for the full cover, each
    // base receiving an equal share of the pooled return flux
    const double per_base = n_seeds > 0 ? pooled_return / double(n_seeds) : 0.0;
    for (std::size_t i = 0; i < tower.spans.size(); ++i) {
        const auto& s = tower.spans[i];
        if (s.parent >= 0 || s.birth != 0) continue;  // seed roots only
        if (span_lifetime(s) == 0) continue;
        const std::size_t dst = f.offset[i];
        out.v1[dst] += per_base;
        out.v2[dst] += per_base;
    }

    st.integral_out = out.integral(tower);
    st.defect = std::max(0.0, st.integral_in - st.integral_out - st.escaped);
    st.defect_warning = tower.defect() > 0.01 * tower.seed_mass();
    return st;
}

TowerSpectral tower_power_iterate(const TowerModel& tower, double tol, int max_iter) {
    TowerSpectral res;
    res.phi = TowerFunction::zeros(tower);
    res.phi.fill(1.0);
    double norm = res.phi.integral(tower);
    if (norm <= 0) return res;
    for (auto& v : res.phi.v1) v /= norm;
    for (auto& v : res.phi.v2) v /= norm;

    // the deposit pulse climbs the tower with period ~ typical R, so the
    // pointwise residual oscillates; convergence is declared on lambda
    // stability over a window covering the period
    std::vector<double> window;
    const std::size_t wlen = 24;
    TowerFunction next;
    for (int it = 1; it <= max_iter; ++it) {
        auto st = tower_pf_apply(tower, res.phi, next);
        res.lambda = st.integral_out;  // integral_in is 1
        if (st.integral_out <= 0) {
            res.converged = true;
            res.iterations = it;
            break;
        }
        double dist = 0;
        for (std::size_t k = 0; k < next.v1.size(); ++k) {
            next.v1[k] /= st.integral_out;
            next.v2[k] /= st.integral_out;
            dist += std::fabs(next.v1[k] - res.phi.v1[k]) +
                    std::fabs(next.v2[k] - res.phi.v2[k]);
        }
        std::swap(res.phi.v1, next.v1);
        std::swap(res.phi.v2, next.v2);
        res.residual = dist / double(std::max<std::size_t>(1, next.v1.size()));
        res.iterations = it;
        window.push_back(res.lambda);
        if (window.size() > wlen) window.erase(window.begin());
        if (res.residual < tol) {
            res.converged = true;
            break;
        }
        if (window.size() == wlen) {
            const auto [mn, mx] = std::minmax_element(window.begin(), window.end());
            if (*mx - *mn < 1e-5 * std::max(1e-12, *mx)) {
                double mean = 0;
                for (double l : window) mean += l;
                res.lambda = mean / double(wlen);
                res.converged = true;
                break;
            }
        }
    }
    return res;
}

NormParams derive_norm_params(const TowerModel& tower, const MeasuredConstants& mc,
                              double eps, double lambda0, double c0, double delta) {
    NormParams np;
    np.theta = mc.theta;
    if (!(np.theta > 0 && np.theta < 1)) return np;  // not applicable
    np.applicable = true;
    np.xi = -0.5 * std::log(np.theta);

    // envelope prefactor A over the per-base level masses
    const int cap = tower.params.time_cap;
    auto lm = tower.level_mass(cap);
    auto lh = tower.level_hole_mass(cap);
    const double base = tower.seed_mass();
    np.A = 0;
    for (int l = 0; l <= cap; ++l) {
        const double m = (lm[std::size_t(l)] + lh[std::size_t(l)]) / base;
        if (m > 0) np.A = std::max(np.A, m / std::pow(np.theta, double(l)));
    }

    // nu: least integer with (c0 c0' delta / 2) e^{lambda0 (nu+1)/6} >= 2
    const double c = std::max(kTiny, c0 * mc.c0_prime * delta / 2.0);
    np.nu = 1;
    while (c * std::exp(lambda0 * double(np.nu + 1) / 6.0) < 2.0 && np.nu < 10000)
        ++np.nu;
    np.gamma = 2.0;
    np.beta = std::min(lambda0 / 6.0, 5.0 * std::log(4.0) / double(np.nu));
    np.a0 = std::max(std::exp(-np.xi), 1.0 / np.gamma);
    np.b = 1.0 + 2.0 * mc.C_tilde * eps;
    np.M = np.b / (1.0 - np.a0);
    return np;
}

FunctionalNorms tower_norms(const TowerModel& tower, const TowerFunction& f,
                            const NormParams& np, const UlamGrid& grid) {
    FunctionalNorms out;
    out.integral = f.integral(tower);
    out.min_value = std::numeric_limits<double>::infinity();
    const double res3 = 3.0 * grid.width();
    for (std::size_t i = 0; i < tower.spans.size(); ++i) {
        const auto& s = tower.spans[i];
        const double mu = unit_mass(tower, int(i));
        for (int l = 0; l < span_lifetime(s); ++l) {
            const std::size_t k = f.offset[i] + std::size_t(l);
            const double w = std::exp(-np.xi * double(s.birth + l));
            const double lo = std::min(f.v1[k], f.v2[k]);
            const double hi = std::max(f.v1[k], f.v2[k]);
            out.min_value = std::min(out.min_value, lo);
            out.sup_norm = std::max(out.sup_norm, std::max(std::fabs(lo), std::fabs(hi)) * w);
            const auto& row = s.traj[std::size_t(l)];
            const double img_len = std::fabs(row.img_hi - row.img_lo);
            if (img_len < res3) {
                ++out.skipped_narrow;
                continue;
            }
            if (mu > 0 && hi > kTiny) {
                const double slope = std::fabs(f.v2[k] - f.v1[k]) / mu;
                const double fmin = std::max(lo, kTiny);
                out.r_norm = std::max(out.r_norm, slope / fmin * w);
            }
        }
    }
    out.norm = std::max(out.sup_norm, out.r_norm);
    out.in_XM = np.applicable && out.norm <= np.M && out.min_value >= -1e-12 &&
                std::fabs(out.integral - 1.0) <= 1e-6;
    return out;
}

H1H2Report check_H1_H2(const TowerModel& tower, const NormParams& np) {
    H1H2Report rep;
    rep.applicable = np.applicable;
    if (!np.applicable) return rep;
    rep.A = np.A;
    rep.theta = np.theta;
    rep.xi = np.xi;

    const int cap = tower.params.time_cap;
    auto lh = tower.level_hole_mass(cap);
    const double n_bases = double(tower.seeds.size());
    double lhs = 0;
    for (int l = 1; l <= cap; ++l) {
        const double m_unit =
            lh[std::size_t(l)] / tower.seed_mass();  // per-base average
        lhs += std::exp(np.xi * double(l - 1)) * m_unit;
    }
    rep.h2_lhs_per_base = lhs;
    rep.h2_lhs_extrapolated = lhs * double(tower.total_tiles);
    rep.h2_rhs = (1.0 - np.a0) * (1.0 - np.a0) / np.b;
    rep.h2_pass_per_base = rep.h2_lhs_per_base <= rep.h2_rhs;
    (void)n_bases;

    // sufficient hole size from the measured constants (full cover):
    // m(H) < (1-sqrt(theta))^2/(1+C) * eps (1-sqrt(theta)) / (N D theta)
    const double s = 1.0 - std::sqrt(np.theta);
    if (tower.total_tiles > 0)
        rep.sufficient_hole_bound = s * s / np.b * tower.params.eps * s /
                                    (double(tower.total_tiles) * std::max(kTiny, np.A) *
                                     np.theta);
    return rep;
}

std::vector<double> project_density(const TowerModel& tower, const TowerFunction& f,
                                    const UlamGrid& grid, int* below_resolution) {
    std::vector<double> mass(std::size_t(grid.n_cells), 0.0);
    int below = 0;
    for (std::size_t i = 0; i < tower.spans.size(); ++i) {
        const auto& s = tower.spans[i];
        const double mu = unit_mass(tower, int(i));
        if (mu <= 0) continue;
        for (int l = 0; l < span_lifetime(s); ++l) {
            const std::size_t k = f.offset[i] + std::size_t(l);
            const double contribution = 0.5 * (f.v1[k] + f.v2[k]) * mu;
            if (contribution <= 0) continue;
            const auto& row = s.traj[std::size_t(l)];
            const double A = std::min(row.img_lo, row.img_hi);
            const double B = std::max(row.img_lo, row.img_hi);
            const double dA = row.img_lo <= row.img_hi ? row.d_lo : row.d_hi;
            const double dB = row.img_lo <= row.img_hi ? row.d_hi : row.d_lo;
            if (B - A < grid.width()) {
                ++below;
                mass[std::size_t(grid.locate(0.5 * (A + B)))] += contribution;
                continue;
            }
            // distribute with weights overlap / pi'(center), pi' ~ chain
            // derivative log-interpolated across the image
            const int i_lo = grid.locate(A), i_hi = grid.locate(B);
            double wsum = 0;
            std::vector<std::pair<int, double>> parts;
            for (int g = i_lo; g <= i_hi; ++g) {
                const double ov =
                    std::min(B, grid.cell_hi(g)) - std::max(A, grid.cell_lo(g));
                if (ov <= 0) continue;
                const double c = 0.5 * (std::max(A, grid.cell_lo(g)) +
                                        std::min(B, grid.cell_hi(g)));
                const double t = (c - A) / (B - A);
                const double d = std::exp(std::log(std::max(dA, kTiny)) * (1 - t) +
                                          std::log(std::max(dB, kTiny)) * t);
                const double w = ov / d;
                parts.push_back({g, w});
                wsum += w;
            }
            if (wsum <= 0) continue;
            for (auto& [g, w] : parts) mass[std::size_t(g)] += contribution * w / wsum;
        }
    }
    if (below_resolution) *below_resolution = below;
    double total = 0;
    for (double m : mass) total += m;
    std::vector<double> density(std::size_t(grid.n_cells), 0.0);
    if (total > 0)
        for (int g = 0; g < grid.n_cells; ++g)
            density[std::size_t(g)] = mass[std::size_t(g)] / total / grid.width();
    return density;
}

EigenBoundReport eigenvalue_bound_check(double lambda, const TowerModel& tower,
                                        const NormParams& np,
                                        const MeasuredConstants& mc, double mH,
                                        double eps, std::uint64_t total_tiles) {
    EigenBoundReport rep;
    rep.lambda = lambda;
    if (np.applicable) {
        const int cap = tower.params.time_cap;
        auto lh = tower.level_hole_mass(cap);
        double lhs = 0;
        for (int l = 1; l <= cap; ++l)
            lhs += std::exp(np.xi * double(l - 1)) * lh[std::size_t(l)] /
                   tower.seed_mass();
        rep.bound_tower = 1.0 - np.M * lhs * double(total_tiles);
        rep.sqrt_theta = std::sqrt(np.theta);
        const double s = 1.0 - rep.sqrt_theta;
        rep.bound_interval =
            1.0 - double(total_tiles) * mc.D * np.theta / (eps * s) * mH;
        rep.tower_ok = lambda >= rep.bound_tower - 1e-12;
        rep.interval_ok = lambda >= rep.bound_interval - 1e-12;
        rep.sqrt_theta_ok = lambda >= rep.sqrt_theta - 1e-12;
    }
    return rep;
}

DensityDecomposition density_decomposition_check(const std::vector<double>& psi,
                                                 const UlamGrid& grid,
                                                 const QuadMap& map, int K,
                                                 const OpenIntervalSet& hole) {
    if (K < 1 || K > 20)
        throw std::invalid_argument("density_decomposition_check: K outside [1,20]");
    DensityDecomposition out;

    std::vector<double> centers, weights;
    double x = 0;
    for (int k = 1; k <= K; ++k) {
        x = map.step(x);
        centers.push_back(x);
        weights.push_back(std::pow(1.9, -double(k) / 3.0));
    }

    // spike shape per grid cell, excluding cells containing a center
    std::vector<double> shape(std::size_t(grid.n_cells), 0.0);
    std::vector<std::uint8_t> is_spike(std::size_t(grid.n_cells), 0);
    for (std::size_t c = 0; c < centers.size(); ++c)
        is_spike[std::size_t(grid.locate(centers[c]))] = 1;
    for (int g = 0; g < grid.n_cells; ++g) {
        if (is_spike[std::size_t(g)]) {
            ++out.spike_cells;
            continue;
        }
        const double xc = grid.center(g);
        double s = 0;
        for (std::size_t c = 0; c < centers.size(); ++c)
            s += weights[c] / std::sqrt(std::fabs(xc - centers[c]));
        shape[std::size_t(g)] = s;
    }

    // flat part: the max of psi over the cells with the weakest spike shape
    std::vector<double> sorted_shape;
    for (int g = 0; g < grid.n_cells; ++g)
        if (!is_spike[std::size_t(g)]) sorted_shape.push_back(shape[std::size_t(g)]);
    std::sort(sorted_shape.begin(), sorted_shape.end());
    const double shape_median = sorted_shape[sorted_shape.size() / 2];
    for (int g = 0; g < grid.n_cells; ++g)
        if (!is_spike[std::size_t(g)] && shape[std::size_t(g)] <= shape_median)
            out.c_flat = std::max(out.c_flat, psi[std::size_t(g)]);
    // spike coefficient: smallest making the envelope dominate everywhere
    for (int g = 0; g < grid.n_cells; ++g) {
        if (is_spike[std::size_t(g)] || shape[std::size_t(g)] <= 0) continue;
        const double need = (psi[std::size_t(g)] - out.c_flat) / shape[std::size_t(g)];
        out.c_spike = std::max(out.c_spike, need);
    }
    for (int g = 0; g < grid.n_cells; ++g) {
        if (is_spike[std::size_t(g)]) continue;
        if (psi[std::size_t(g)] >
            out.c_flat + out.c_spike * shape[std::size_t(g)] + 1e-12)
            ++out.violations;
    }

    // positivity over [1-a, 1] \ H
    out.min_density_in_range = std::numeric_limits<double>::infinity();
    double mean = 0;
    int counted = 0;
    for (int g = 0; g < grid.n_cells; ++g) {
        const double lo = grid.cell_lo(g), hi = grid.cell_hi(g);
        if (lo < map.range_lo() || hi > map.range_hi()) continue;
        bool in_hole = false;
        for (auto& [l, r] : hole.comp)
            if (lo >= l && hi <= r) in_hole = true;
        if (in_hole) continue;
        out.min_density_in_range = std::min(out.min_density_in_range, psi[std::size_t(g)]);
        mean += psi[std::size_t(g)];
        ++counted;
    }
    out.mean_density = counted > 0 ? mean / double(counted) : 0.0;
    return out;
}

}  // namespace openmap
