#pragma once

#include <cstdint>
#include <vector>

#include "openmap/quadmap.hpp"

namespace openmap {

struct UlamGrid {
    int n_cells;
    double lo = -1.0, hi = 1.0;

    explicit UlamGrid(int n) : n_cells(n) {
        if (n < 2) throw std::invalid_argument("UlamGrid: n_cells < 2");
    }
    double width() const { return (hi - lo) / double(n_cells); }
    double cell_lo(int i) const { return lo + (hi - lo) * double(i) / double(n_cells); }
    double cell_hi(int i) const { return lo + (hi - lo) * double(i + 1) / double(n_cells); }
    double center(int i) const { return 0.5 * (cell_lo(i) + cell_hi(i)); }
    int locate(double x) const {
        int i = int((x - lo) / (hi - lo) * double(n_cells));
        return std::max(0, std::min(n_cells - 1, i));
    }
};

// Row-major substochastic transition fractions
//   P[i -> j] = m(cell_i  n  T^{-1}(cell_j \ H)) / m(cell_i),
// restricted to alive cells (cells not contained in H).  The row-sum deficit
// is the one-step escape mass of the cell.
struct SparseOperator {
    int n_cells = 0;
    std::vector<std::uint8_t> alive;
    std::vector<std::vector<std::pair<int, double>>> rows;  // (target, fraction)
    std::vector<double> row_sum;

    // mass vector push-forward: out[j] = sum_i mass[i] P[i -> j]
    void apply(const std::vector<double>& mass, std::vector<double>& out) const;
};

SparseOperator build_ulam(const QuadMap& map, const OpenIntervalSet& hole, int n_cells);

// Same discretization for the tent map 1 - 2|y|; conjugate to a = 2 via
// h(y) = sin(pi y / 2).  Used as an internal cross-check oracle.
SparseOperator build_ulam_tent(const OpenIntervalSet& hole, int n_cells);

struct SpectralResult {
    double lambda = 0.0;
    std::vector<double> density;  // per-cell, L1-normalized w.r.t. Lebesgue
    std::vector<double> mass;     // per-cell masses, sum = 1
    int iterations = 0;
    double residual = 0.0;
    bool converged = false;
    bool total_escape = false;
};

// Power iteration of the normalized operator from the uniform density.
SpectralResult power_iterate(const SparseOperator& op, const UlamGrid& grid,
                             double tol = 1e-10, int max_iter = 100000);

// L1 distance between two per-cell density vectors on the same grid.
double density_l1(const UlamGrid& grid, const std::vector<double>& f,
                  const std::vector<double>& g, int skip_boundary_cells = 0);

}  // namespace openmap
