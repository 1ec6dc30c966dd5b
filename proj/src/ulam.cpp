#include "openmap/ulam.hpp"

#include <algorithm>
#include <cmath>

namespace openmap {

void SparseOperator::apply(const std::vector<double>& mass,
                           std::vector<double>& out) const {
    out.assign(std::size_t(n_cells), 0.0);
    for (int i = 0; i < n_cells; ++i) {
        const double m = mass[std::size_t(i)];
        if (m == 0.0) continue;
        for (auto& [j, frac] : rows[std::size_t(i)]) out[std::size_t(j)] += m * frac;
    }
}

namespace {

// assemble rows from (source, target, fraction) triplets
SparseOperator assemble(int n_cells, const std::vector<std::uint8_t>& alive,
                        std::vector<std::tuple<int, int, double>>& trip) {
    std::sort(trip.begin(), trip.end());
    SparseOperator op;
    op.n_cells = n_cells;
    op.alive = alive;
    op.rows.assign(std::size_t(n_cells), {});
    op.row_sum.assign(std::size_t(n_cells), 0.0);
    for (std::size_t t = 0; t < trip.size();) {
        auto [i, j, f] = trip[t];
        double acc = f;
        ++t;
        while (t < trip.size() && std::get<0>(trip[t]) == i && std::get<1>(trip[t]) == j) {
            acc += std::get<2>(trip[t]);
            ++t;
        }
        op.rows[std::size_t(i)].push_back({j, acc});
        op.row_sum[std::size_t(i)] += acc;
    }
    return op;
}

// Split [c,d] by the hole, returning the surviving closed pieces.
std::vector<std::pair<double, double>> survive_pieces(const OpenIntervalSet& hole,
                                                      double c, double d) {
    std::vector<std::pair<double, double>> out;
    double cursor = c;
    for (auto& [l, r] : hole.comp) {
        if (r <= c || l >= d) continue;
        if (l > cursor) out.push_back({cursor, std::min(l, d)});
        cursor = std::max(cursor, r);
        if (cursor >= d) break;
    }
    if (cursor < d) out.push_back({cursor, d});
    return out;
}

template <typename PreimageFn>
SparseOperator build_generic(const OpenIntervalSet& hole, int n_cells,
                             PreimageFn&& preimages) {
    UlamGrid grid(n_cells);
    std::vector<std::uint8_t> alive(std::size_t(n_cells), 1);
    for (int i = 0; i < n_cells; ++i)
        for (auto& [l, r] : hole.comp)
            if (grid.cell_lo(i) >= l && grid.cell_hi(i) <= r) alive[std::size_t(i)] = 0;

    std::vector<std::tuple<int, int, double>> trip;
    const double w = grid.width();
    for (int j = 0; j < n_cells; ++j) {
        if (!alive[std::size_t(j)]) continue;
        for (auto& [c, d] : survive_pieces(hole, grid.cell_lo(j), grid.cell_hi(j))) {
            for (auto& [u, v] : preimages(c, d)) {
                if (!(u < v)) continue;
                const int i_lo = grid.locate(u), i_hi = grid.locate(v);
                for (int i = i_lo; i <= i_hi; ++i) {
                    if (!alive[std::size_t(i)]) continue;
                    const double ov =
                        std::min(v, grid.cell_hi(i)) - std::max(u, grid.cell_lo(i));
                    if (ov > 0.0) trip.push_back({i, j, ov / w});
                }
            }
        }
    }
    return assemble(n_cells, alive, trip);
}

}  // namespace

SparseOperator build_ulam(const QuadMap& map, const OpenIntervalSet& hole,
                          int n_cells) {
    if (n_cells < 64) throw std::invalid_argument("build_ulam: n_cells < 64");
    const double a = map.a;
    auto preim = [a](double c, double d) {
        std::vector<std::pair<double, double>> br;
        // 1 - a x^2 in [c,d]  <=>  x^2 in [(1-d)/a, (1-c)/a]
        const double s_lo = std::max(0.0, (1.0 - d) / a);
        const double s_hi = (1.0 - c) / a;
        if (s_hi <= 0.0) return br;
        const double u = std::sqrt(s_lo);
        const double v = std::min(1.0, std::sqrt(s_hi));
        if (u < v) {
            br.push_back({u, v});
            br.push_back({-v, -u});
        }
        return br;
    };
    return build_generic(hole, n_cells, preim);
}

SparseOperator build_ulam_tent(const OpenIntervalSet& hole, int n_cells) {
    if (n_cells < 64) throw std::invalid_argument("build_ulam_tent: n_cells < 64");
    auto preim = [](double c, double d) {
        std::vector<std::pair<double, double>> br;
        // 1 - 2|y| in [c,d]  <=>  |y| in [(1-d)/2, (1-c)/2]
        const double u = std::max(0.0, (1.0 - d) / 2.0);
        const double v = std::min(1.0, (1.0 - c) / 2.0);
        if (u < v) {
            br.push_back({u, v});
            br.push_back({-v, -u});
        }
        return br;
    };
    return build_generic(hole, n_cells, preim);
}

SpectralResult power_iterate(const SparseOperator& op, const UlamGrid& grid,
                             double tol, int max_iter) {
    SpectralResult res;
    const int n = op.n_cells;
    std::vector<double> mass(std::size_t(n), 0.0), next;

    int alive_count = 0;
    for (int i = 0; i < n; ++i)
        if (op.alive[std::size_t(i)]) ++alive_count;
    if (alive_count == 0) {
        res.total_escape = true;
        res.converged = true;
        res.density.assign(std::size_t(n), 0.0);
        res.mass.assign(std::size_t(n), 0.0);
        return res;
    }
    for (int i = 0; i < n; ++i)
        if (op.alive[std::size_t(i)]) mass[std::size_t(i)] = 1.0 / double(alive_count);

    for (int it = 1; it <= max_iter; ++it) {
        op.apply(mass, next);
        double total = 0.0;
        for (double m : next) total += m;
        if (total <= 0.0) {
            res.total_escape = true;
            res.converged = true;
            res.lambda = 0.0;
            res.iterations = it;
            break;
        }
        double dist = 0.0;
        for (std::size_t i = 0; i < next.size(); ++i) {
            next[i] /= total;
            dist += std::fabs(next[i] - mass[i]);
        }
        mass.swap(next);
        res.lambda = total;
        res.iterations = it;
        res.residual = dist;
        if (dist < tol) {
            res.converged = true;
            break;
        }
    }
    res.mass = mass;
    res.density.resize(std::size_t(n));
    for (int i = 0; i < n; ++i) res.density[std::size_t(i)] = mass[std::size_t(i)] / grid.width();
    return res;
}

double density_l1(const UlamGrid& grid, const std::vector<double>& f,
                  const std::vector<double>& g, int skip_boundary_cells) {
    double l1 = 0.0;
    for (int i = skip_boundary_cells; i < grid.n_cells - skip_boundary_cells; ++i)
        l1 += std::fabs(f[std::size_t(i)] - g[std::size_t(i)]) * grid.width();
    return l1;
}

}  // namespace openmap
