#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "openmap/quadmap.hpp"
#include "openmap/ulam.hpp"

namespace openmap {

// Piecewise-constant initial density on [-1,1].
struct InitDensity {
    std::vector<double> breaks;   // m+1 ascending points, first -1, last 1
    std::vector<double> weights;  // m nonnegative values, Lebesgue-integrating to 1

    static InitDensity uniform();
    static InitDensity bump(double lo, double hi);  // uniform on [lo,hi]
    double sample(double u) const;                  // inverse CDF, u in [0,1)
    void validate() const;
};

struct SurvivalSeries {
    std::vector<double> p;  // p_0 .. p_{n_max}
    std::uint64_t samples = 0;
    std::uint64_t seed = 0;
    int n_max = 0;
    bool truncated = false;  // all samples dead before n_max
    std::string generator = "splitmix64-stream";
};

struct SurvivalResult {
    SurvivalSeries series;
    int hist_cells = 0;
    // survivor histograms per time (only when hist_cells > 0); each row is
    // L1-normalized over survivors (sums to 1), all-zero when none survive
    std::vector<std::vector<double>> hist;
};

SurvivalResult survival_mc(const QuadMap& map, const OpenIntervalSet& hole,
                           const InitDensity& init, int n_max,
                           std::uint64_t samples, std::uint64_t seed,
                           int hist_cells = 0, int threads = 1);

struct EscapeFit {
    double lambda = 0.0;
    double stderr_lambda = 0.0;
    int points = 0;
    int n_lo = 0, n_hi = 0;
};

// Least squares on log p_n over the last `window` usable points
// (p_n >= 100/samples).  Throws when fewer than 5 points qualify.
EscapeFit escape_rate_fit(const SurvivalSeries& s, int window);

// SRB density 1/(pi sqrt(1-x^2)) for a = 2 as exact per-cell means
// (cell mass = (asin(hi) - asin(lo))/pi).  Rejects a != 2.
std::vector<double> srb_closed_form_a2(const QuadMap& map, const UlamGrid& grid);

// Long-orbit histogram estimate of the closed-map invariant density.
std::vector<double> srb_orbit_histogram(const QuadMap& map, const UlamGrid& grid,
                                        std::uint64_t steps = 100000000ULL,
                                        std::uint64_t burn_in = 1000,
                                        double x0 = 0.17);

// L1 distance of normalized survivor histograms of two initial densities at
// time n_star; sub-seeds are derived from `seed` so the two runs use
// independent streams.
double conditional_limit_test(const QuadMap& map, const OpenIntervalSet& hole,
                              const InitDensity& init1, const InitDensity& init2,
                              int n_star, std::uint64_t samples, std::uint64_t seed,
                              int hist_cells = 256, int threads = 1);

struct ShrinkRecord {
    double mH = 0.0;
    double lambda = 0.0;
    double l1_to_srb = 0.0;
};

struct ShrinkStudyResult {
    std::vector<ShrinkRecord> records;  // ordered as given (largest hole first)
    bool lambda_increasing = false;     // strictly, toward 1
    bool l1_decreasing = false;         // strictly
};

// Validates the nesting conditions on the family (largest hole first) and
// computes per-hole Ulam eigenpairs plus L1 distances to the SRB reference.
ShrinkStudyResult shrink_study(const QuadMap& map,
                               const std::vector<OpenIntervalSet>& family,
                               int n_cells, double delta,
                               double tol = 1e-10, int max_iter = 100000);

}  // namespace openmap
