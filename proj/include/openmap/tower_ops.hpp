#pragma once

#include <cstdint>
#include <vector>

#include "openmap/tower.hpp"
#include "openmap/ulam.hpp"

namespace openmap {

// Function on the tower: a linear profile per (piece span, level), indexed by
// the span's trajectory rows.  Profile endpoints follow the span's image
// endpoints, so the climb step is an endpoint copy.
struct TowerFunction {
    std::vector<std::size_t> offset;  // per span: first slot index
    std::vector<double> v1, v2;       // per slot: values at the two endpoints

    static TowerFunction zeros(const TowerModel& tower);
    void fill(double value);
    std::size_t slot(const TowerModel& tower, int span, int level) const;
    double mean_at(const TowerModel& tower, int span, int level) const;
    // integral over the tower in unit-base coordinates
    double integral(const TowerModel& tower) const;
};

struct TowerPFStats {
    double integral_in = 0;
    double integral_out = 0;
    double escaped = 0;  // flux into tower holes
    double defect = 0;   // flux lost to residual/truncated pieces
    bool defect_warning = false;  // tower defect above 1% of the seed mass
};

// One Perron-Frobenius step on the tower: climbing cells shift up, returning
// blocks deposit onto the sampled bases (rewired proportionally to base
// measure), hole-feeding cells deposit nothing.
TowerPFStats tower_pf_apply(const TowerModel& tower, const TowerFunction& f,
                            TowerFunction& out);

struct TowerSpectral {
    double lambda = 0;
    TowerFunction phi;
    int iterations = 0;
    double residual = 0;
    bool converged = false;
};

TowerSpectral tower_power_iterate(const TowerModel& tower, double tol = 1e-8,
                                  int max_iter = 500);

// Weight and norm parameters of the functional space, from measured
// constants: xi = -log(theta)/2, gamma = 2, beta = min(lambda0/6,
// 5 log4 / nu), a0 = max(e^-xi, 1/gamma), b = 1 + 2 C~ eps, M = b/(1-a0).
struct NormParams {
    bool applicable = false;  // false when the fitted theta is >= 1
    double A = 0, theta = 0, xi = 0;
    int nu = 0;
    double gamma = 2.0, beta = 0;
    double a0 = 0, b = 0, M = 0;
};

NormParams derive_norm_params(const TowerModel& tower, const MeasuredConstants& mc,
                              double eps, double lambda0, double c0, double delta);

struct FunctionalNorms {
    double sup_norm = 0;   // sup |f| e^{-xi l}
    double r_norm = 0;     // sup |f'/f| e^{-xi l}, finite differences in cells
    double norm = 0;       // max of the two
    int skipped_narrow = 0;  // cells narrower than 3 grid cells
    double integral = 0;
    double min_value = 0;
    bool in_XM = false;  // ||f|| <= M, f >= 0, integral == 1
};

FunctionalNorms tower_norms(const TowerModel& tower, const TowerFunction& f,
                            const NormParams& np, const UlamGrid& grid);

struct H1H2Report {
    bool applicable = false;
    double A = 0, theta = 0, xi = 0;
    double h2_lhs_per_base = 0;      // sum_l e^{xi(l-1)} m(H~_l) per base
    double h2_lhs_extrapolated = 0;  // scaled to the full reference cover
    double h2_rhs = 0;               // (1-a0)^2 / b
    bool h2_pass_per_base = false;
    double sufficient_hole_bound = 0;  // hole size making (H2) hold, full tower
};

H1H2Report check_H1_H2(const TowerModel& tower, const NormParams& np);

// Projection of a tower function to an interval density via pi' =
// (T^l)'(pi y) |Lambda^(i)| (chain-total derivative at the cell endpoints,
// log-interpolated inside).  Returns an L1-normalized per-cell density.
std::vector<double> project_density(const TowerModel& tower, const TowerFunction& f,
                                    const UlamGrid& grid, int* below_resolution = nullptr);

struct EigenBoundReport {
    double lambda = 0;
    double bound_tower = 0;     // 1 - M sum e^{xi(l-1)} m(H~_l)
    double bound_interval = 0;  // 1 - N D theta / (eps (1 - sqrt theta)) m(H)
    double sqrt_theta = 0;
    bool tower_ok = false, interval_ok = false, sqrt_theta_ok = false;
};

EigenBoundReport eigenvalue_bound_check(double lambda, const TowerModel& tower,
                                        const NormParams& np,
                                        const MeasuredConstants& mc, double mH,
                                        double eps, std::uint64_t total_tiles);

struct DensityDecomposition {
    double c_flat = 0, c_spike = 0;
    int violations = 0;   // grid cells above the fitted envelope
    int spike_cells = 0;  // cells containing a spike center, excluded
    double min_density_in_range = 0;  // min psi over [1-a,1] \ H cells
    double mean_density = 0;
};

// Fits the smallest flat + spike-envelope constants dominating psi, the
// spike centers being the critical orbit points T^k(0), k = 1..K, with
// weights (1.9)^{-k/3}.
DensityDecomposition density_decomposition_check(const std::vector<double>& psi,
                                                 const UlamGrid& grid,
                                                 const QuadMap& map, int K,
                                                 const OpenIntervalSet& hole);

}  // namespace openmap
