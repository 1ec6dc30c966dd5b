#include "openmap/admissibility.hpp"

#include "openmap/fitting.hpp"

#include <algorithm>
#include <limits>

namespace openmap {

ClassMReport check_class_M(const QuadMap& map, double delta0, int orbit_horizon,
                           int excursion_horizon, double lambda0_target,
                           int sample_grid) {
    if (!(delta0 > 0.0 && delta0 < 1.0))
        throw std::invalid_argument("check_class_M: need 0 < delta0 < 1");
    if (orbit_horizon < 10) throw std::invalid_argument("check_class_M: horizon < 10");

    ClassMReport rep;
    rep.orbit_horizon = orbit_horizon;
    rep.excursion_horizon = excursion_horizon;
    rep.constants.delta0 = delta0;
    rep.constants.lambda0 = lambda0_target;
    rep.constants.horizon = orbit_horizon;

    // (a) critical orbit bounded away from 0
    rep.orbit_min_dist = critical_orbit_stats(map, orbit_horizon).min_dist_zero;
    rep.a_pass = rep.orbit_min_dist > 2.0 * delta0;
    if (!rep.a_pass) rep.failure = "(a)";

    // (b) expansion outside (-delta0, delta0): sweep excursions started on a
    // grid outside the interval, keeping the full derivative-product history.
    struct Excursion {
        std::vector<double> log_prod;  // log |(f^n)'(x)|, n = 1..len
        bool entered = false;          // f^len(x) in (-delta0, delta0)
    };
    std::vector<Excursion> excursions;
    excursions.reserve(std::size_t(sample_grid));
    for (int side = 0; side < 2; ++side) {
        const double lo = delta0, hi = 1.0;
        for (int i = 0; i <= sample_grid / 2; ++i) {
            double x = lo + (hi - lo) * double(i) / double(sample_grid / 2);
            if (side == 1) x = -x;
            if (std::fabs(x) > 1.0) continue;
            Excursion e;
            double y = x, lp = 0.0;
            for (int n = 1; n <= excursion_horizon; ++n) {
                lp += std::log(std::fabs(map.deriv(y)));
                y = map.step(y);
                e.log_prod.push_back(lp);
                if (std::fabs(y) < delta0) {
                    e.entered = true;
                    break;
                }
            }
            excursions.push_back(std::move(e));
        }
    }

    // smallest M0 such that (b)(i) holds at the target rate for all n >= M0
    int worst_violation = 0;
    for (auto& e : excursions) {
        const std::size_t len = e.log_prod.size() - (e.entered ? 1 : 0);
        for (std::size_t n = 1; n <= len; ++n)
            if (e.log_prod[n - 1] < lambda0_target * double(n))
                worst_violation = std::max(worst_violation, int(n));
    }
    rep.constants.M0 = worst_violation + 1;
    rep.b_pass = rep.constants.M0 <= excursion_horizon;

    double lam_meas = std::numeric_limits<double>::infinity();
    for (auto& e : excursions) {
        const std::size_t len = e.log_prod.size() - (e.entered ? 1 : 0);
        for (std::size_t n = std::size_t(rep.constants.M0); n <= len; ++n)
            lam_meas = std::min(lam_meas, e.log_prod[n - 1] / double(n));
    }
    rep.lambda0_measured = std::isfinite(lam_meas) ? lam_meas : 0.0;

    // (b)(ii) margin at entry times
    double c0 = 1.0;
    for (auto& e : excursions)
        if (e.entered && !e.log_prod.empty()) {
            const std::size_t n = e.log_prod.size();
            c0 = std::min(c0, std::exp(e.log_prod[n - 1] - lambda0_target * double(n)));
        }
    rep.c0_entry_margin = c0;
    rep.constants.c0 = c0;
    if (!rep.b_pass && rep.failure.empty()) rep.failure = "(b)(i)";

    // (c) recovery for points inside (-delta0, delta0); |x| swept on a log grid
    rep.s0_margin_min = std::numeric_limits<double>::infinity();
    rep.s0_over_log_min = std::numeric_limits<double>::infinity();
    rep.s0_over_log_max = 0.0;
    rep.c_pass = true;
    for (int side = 0; side < 2; ++side) {
        for (int i = 1; i <= sample_grid / 4; ++i) {
            const double t = 28.0 * double(i) / double(sample_grid / 4);
            double x = delta0 * std::exp(-t);
            if (side == 1) x = -x;
            double y = x, lp = 0.0;
            int s0 = -1;
            double margin = 0.0;
            for (int s = 1; s <= orbit_horizon; ++s) {
                lp += std::log(std::fabs(map.deriv(y)));
                y = map.step(y);
                if (lp >= -std::log(c0) + lambda0_target * double(s) / 3.0) {
                    s0 = s;
                    margin = std::exp(lp - lambda0_target * double(s) / 3.0) * c0;
                    break;
                }
                if (std::fabs(y) < delta0) break;  // re-entered before recovery
            }
            if (s0 < 0) {
                rep.c_pass = false;
                if (rep.failure.empty()) rep.failure = "(c)";
                continue;
            }
            rep.s0_max = std::max(rep.s0_max, s0);
            rep.s0_margin_min = std::min(rep.s0_margin_min, margin);
            const double ratio = double(s0) / std::log(1.0 / std::fabs(x));
            rep.s0_over_log_min = std::min(rep.s0_over_log_min, ratio);
            rep.s0_over_log_max = std::max(rep.s0_over_log_max, ratio);
        }
    }
    return rep;
}

A1Report check_A1(const QuadMap& map, const OpenIntervalSet& hole, double delta0,
                  int horizon) {
    A1Report rep;
    rep.horizon = horizon;
    if (hole.empty()) {
        rep.min_dist = std::numeric_limits<double>::infinity();
        rep.r = delta0;
        rep.pass = true;
        return rep;
    }
    rep.min_dist = critical_orbit_stats(map, horizon, &hole).min_dist_hole;
    rep.r = std::min(rep.min_dist, delta0);
    rep.pass = rep.r > 0.0;
    return rep;
}

A2Report check_A2(const QuadMap& map, const OpenIntervalSet& hole, int m0,
                  double eps0_cap) {
    if (m0 < 1) throw std::invalid_argument("check_A2: m0 < 1");
    A2Report rep;
    rep.m0 = m0;
    if (hole.empty()) {
        rep.pass = true;
        rep.eps0 = eps0_cap;
        rep.note = "empty hole: vacuous";
        return rep;
    }

    // interval images of every hole component at times 0..m0
    std::vector<std::vector<Interval>> images(std::size_t(m0) + 1);
    for (auto& [l, r] : hole.comp) {
        Interval J{l, r};
        images[0].push_back(J);
        for (int i = 1; i <= m0; ++i) {
            J = map_interval(map, J);
            images[std::size_t(i)].push_back(J);
        }
    }

    auto pairwise_ok = [&](double eps0) {
        for (int i = 0; i <= m0; ++i)
            for (int j = i + 1; j <= m0; ++j)
                for (auto& A : images[std::size_t(i)])
                    for (auto& B : images[std::size_t(j)]) {
                        const double gap = std::max(B.lo - A.hi, A.lo - B.hi);
                        if (gap < 2.0 * eps0) return false;
                    }
        return true;
    };

    if (!pairwise_ok(0.0)) {
        rep.pass = false;
        rep.eps0 = 0.0;
        rep.note = "images overlap at eps0 = 0";
        return rep;
    }
    double lo = 0.0, hi = eps0_cap;
    if (pairwise_ok(hi)) {
        rep.pass = true;
        rep.eps0 = hi;
        return rep;
    }
    for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        (pairwise_ok(mid) ? lo : hi) = mid;
    }
    rep.eps0 = lo;
    rep.pass = lo > 0.0;
    return rep;
}

int first_cover_time(const QuadMap& map, Interval J, int cap) {
    const double lo_target = map.range_lo() + 1e-12;
    const double hi_target = map.range_hi() - 1e-12;
    for (int n = 1; n <= cap; ++n) {
        J = map_interval(map, J);
        if (J.lo <= lo_target && J.hi >= hi_target) return n;
    }
    throw std::runtime_error("first_cover_time: cap exceeded (map may not be "
                             "transitive at this parameter)");
}

int derive_n0(const QuadMap& map, double eps0, int cap) {
    if (!(eps0 > 0.0)) throw std::invalid_argument("derive_n0: eps0 <= 0");
    // Dominating family: members of length (7/8)(eps0/2) stepped by eps0/32,
    // so every interval of length >= eps0/2 contains a member.
    const double len = 0.875 * (eps0 / 2.0);
    const double step = eps0 / 32.0;
    int n0 = 1;
    for (double x = -1.0; x + len <= 1.0; x += step)
        n0 = std::max(n0, first_cover_time(map, {x, x + len}, cap));
    return n0;
}

A4Report check_A4(const QuadMap& map, const OpenIntervalSet& hole, int n0) {
    A4Report rep;
    rep.n0 = n0;
    rep.pass = true;
    if (hole.empty()) return rep;
    const OpenIntervalSet refl = hole_reflection(hole);

    auto overlaps = [](const Interval& A, double l, double r) {
        return std::min(A.hi, r) - std::max(A.lo, l) > 0.0;
    };

    for (std::size_t j = 0; j < hole.count(); ++j) {
        Interval J{hole.comp[j].first, hole.comp[j].second};
        for (int i = 0; i <= n0; ++i) {
            if (i > 0) J = map_interval(map, J);
            for (std::size_t k = 0; k < hole.count(); ++k) {
                if (overlaps(J, refl.comp[k].first, refl.comp[k].second)) {
                    rep.pass = false;
                    rep.clause = 'a';
                    rep.i = i;
                    rep.j = int(j);
                    rep.k = int(k);
                    return rep;
                }
                if (i >= 1 && overlaps(J, hole.comp[k].first, hole.comp[k].second)) {
                    rep.pass = false;
                    rep.clause = 'b';
                    rep.i = i;
                    rep.j = int(j);
                    rep.k = int(k);
                    return rep;
                }
            }
        }
    }
    return rep;
}

LengthScales derive_length_scales(double eps_prime, double eps0, double C_tilde,
                                  double theta, double D) {
    if (!(eps_prime > 0.0) || !(eps0 > 0.0))
        throw std::invalid_argument("derive_length_scales: need eps_prime, eps0 > 0");
    LengthScales ls;
    ls.eps_prime = eps_prime;
    ls.eps0 = eps0;
    ls.C_tilde = C_tilde;
    ls.theta_target = theta;
    ls.D_measured = D;
    double m = std::min(eps_prime, eps0);
    if (C_tilde > 0.0) m = std::min(m, 1.0 / (4.0 * C_tilde));
    ls.eps = m / 65536.0;  // 4^8
    ls.guard_ok = C_tilde <= 0.0 || ls.eps <= 1.0 / (262144.0 * C_tilde);  // 4^9
    return ls;
}

A3Report check_A3(double mH, double eps, double theta, double D) {
    if (!(theta > 0.0 && theta < 1.0) || !(D > 0.0) || !(eps > 0.0))
        throw std::invalid_argument("check_A3: need theta in (0,1), D > 0, eps > 0");
    A3Report rep;
    rep.mH = mH;
    const double s = 1.0 - std::sqrt(theta);
    rep.rhs = (s * s * s / 3.0) * eps * eps / (D * theta);
    rep.slack = rep.rhs - mH;
    rep.max_admissible = rep.rhs;
    rep.pass = mH < rep.rhs;
    return rep;
}

Eq1Report check_no_piece_left_behind(double mH, double eps, double lambda0, int m0,
                                     double c0_prime, double delta) {
    Eq1Report rep;
    rep.mH = mH;
    rep.rhs = 0.5 * eps * (std::exp(lambda0 * double(m0) / 3.0) - 2.0) /
              std::exp(lambda0 * double(m0 - 1) / 3.0) * c0_prime * delta;
    rep.pass = mH <= rep.rhs;
    return rep;
}

namespace {

// union of closed intervals kept sorted and merged
void add_interval(std::vector<std::pair<double, double>>& u, double lo, double hi) {
    if (!(lo < hi)) return;
    u.push_back({lo, hi});
}

void normalize_union(std::vector<std::pair<double, double>>& u) {
    std::sort(u.begin(), u.end());
    std::vector<std::pair<double, double>> merged;
    for (auto& [l, r] : u) {
        if (!merged.empty() && l <= merged.back().second + 1e-15)
            merged.back().second = std::max(merged.back().second, r);
        else
            merged.push_back({l, r});
    }
    u.swap(merged);
}

}  // namespace

CoveringCheck covering_property_check(const QuadMap& map, const OpenIntervalSet& hole,
                                      double eps0, int n0, int trials,
                                      std::uint64_t seed, double tol) {
    if (!(eps0 > 0.0) || n0 < 1)
        throw std::invalid_argument("covering_property_check: need eps0 > 0, n0 >= 1");
    CoveringCheck out;

    // target: maximal intervals of [1-a,1] \ H
    std::vector<std::pair<double, double>> target;
    {
        double cursor = map.range_lo();
        for (auto& [l, r] : hole.comp) {
            if (r <= map.range_lo() || l >= map.range_hi()) continue;
            if (l > cursor) add_interval(target, cursor, std::min(l, map.range_hi()));
            cursor = std::max(cursor, r);
        }
        if (cursor < map.range_hi()) add_interval(target, cursor, map.range_hi());
    }

    std::uint64_t st = seed;
    for (int t = 0; t < trials; ++t) {
        const double len = eps0 / 2.0;
        const double x = -1.0 + (2.0 - len) * u01_from_bits(splitmix64(st));
        std::vector<std::pair<double, double>> current = {{x, x + len}};
        std::vector<std::pair<double, double>> covered = current;
        for (int i = 1; i <= 2 * n0; ++i) {
            std::vector<std::pair<double, double>> next;
            for (auto& [lo, hi] : current) {
                // remove the hole, then map each surviving piece
                double cursor = lo;
                std::vector<std::pair<double, double>> pieces;
                for (auto& [hl, hr] : hole.comp) {
                    if (hr <= lo || hl >= hi) continue;
                    if (hl > cursor) add_interval(pieces, cursor, std::min(hl, hi));
                    cursor = std::max(cursor, hr);
                    if (cursor >= hi) break;
                }
                if (cursor < hi) add_interval(pieces, cursor, hi);
                for (auto& [pl, pr] : pieces) {
                    const auto img = map_interval(map, {pl, pr});
                    add_interval(next, img.lo, img.hi);
                }
            }
            normalize_union(next);
            current = next;
            for (auto& seg : current) covered.push_back(seg);
            normalize_union(covered);
        }
        // coverage of the target up to tol
        double gap = 0.0;
        for (auto& [tl, tr] : target) {
            double cursor = tl;
            for (auto& [cl, cr] : covered) {
                if (cr <= cursor || cl >= tr) continue;
                if (cl > cursor) gap = std::max(gap, cl - cursor);
                cursor = std::max(cursor, cr);
                if (cursor >= tr) break;
            }
            if (cursor < tr) gap = std::max(gap, tr - cursor);
        }
        ++out.trials;
        if (gap <= tol) ++out.covered;
        out.worst_gap = std::max(out.worst_gap, gap);
    }
    return out;
}

HoleAssumptionReport check_hole_assumptions(const QuadMap& map,
                                            const OpenIntervalSet& hole,
                                            double delta0, int m0, int horizon) {
    HoleAssumptionReport rep;
    rep.m0 = m0;
    rep.a1 = check_A1(map, hole, delta0, horizon);
    rep.a1_pass = rep.a1.pass;
    rep.r = rep.a1.r;
    rep.a2 = check_A2(map, hole, m0);
    rep.a2_pass = rep.a2.pass;
    rep.eps0 = rep.a2.eps0;
    if (rep.a2_pass && rep.eps0 > 0.0) {
        rep.n0 = derive_n0(map, rep.eps0);
        rep.a4 = check_A4(map, hole, rep.n0);
        rep.a4_pass = rep.a4.pass;
    }
    return rep;
}

}  // namespace openmap
