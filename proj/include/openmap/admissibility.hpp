#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "openmap/quadmap.hpp"

namespace openmap {

// Constants of the expanding-outside / recovery-inside structure measured on
// a finite horizon.  All "for all n" clauses are truncated and the horizons
// are carried in the report.
struct ClassMConstants {
    double delta0 = 0.4;
    double lambda0 = std::log(1.9);
    int M0 = 1;
    double c0 = 1.0;
    int horizon = 1000;
};

struct ClassMReport {
    bool a_pass = false, b_pass = false, c_pass = false;
    double orbit_min_dist = 0.0;     // min dist(f^n(0), 0), n <= orbit horizon
    double lambda0_measured = 0.0;   // largest per-step rate over n >= M0 windows
    double c0_entry_margin = 0.0;    // min |(f^n)'| e^{-lambda0 n} at entries
    double s0_margin_min = 0.0;      // min c0 |(f^{s0})'| e^{-lambda0 s0/3}
    int s0_max = 0;
    double s0_over_log_min = 0.0, s0_over_log_max = 0.0;  // recorded, not asserted
    std::string failure;             // clause identifier when some clause fails
    ClassMConstants constants;
    int orbit_horizon = 0, excursion_horizon = 0;
    bool pass() const { return a_pass && b_pass && c_pass; }
};

ClassMReport check_class_M(const QuadMap& map, double delta0,
                           int orbit_horizon = 1000, int excursion_horizon = 100,
                           double lambda0_target = std::log(1.9),
                           int sample_grid = 4000);

struct A1Report {
    bool pass = false;
    double r = 0.0;        // min(dist(critical orbit, H), delta0)
    double min_dist = 0.0; // distance before capping at delta0
    int horizon = 0;
};

A1Report check_A1(const QuadMap& map, const OpenIntervalSet& hole, double delta0,
                  int horizon = 1000);

struct A2Report {
    bool pass = false;
    double eps0 = 0.0;  // largest radius with pairwise disjoint neighborhoods
    int m0 = 10;
    std::string note;
};

// Sufficient condition: the images T^i H, 0 <= i <= m0, must have disjoint
// deleted eps0-neighborhoods.  Largest eps0 located by binary search.
A2Report check_A2(const QuadMap& map, const OpenIntervalSet& hole, int m0,
                  double eps0_cap = 0.5);

// First n with T^n J containing [1-a,1].  Throws past cap.
int first_cover_time(const QuadMap& map, Interval J, int cap = 500);

// Least n such that every interval of length >= eps0/2 covers [1-a,1] by
// time n, via a dominating family of slightly shorter intervals.
int derive_n0(const QuadMap& map, double eps0, int cap = 500);

struct A4Report {
    bool pass = false;
    char clause = ' ';  // 'a' or 'b' at the first violation
    int i = -1, j = -1, k = -1;
    int n0 = 0;
};

A4Report check_A4(const QuadMap& map, const OpenIntervalSet& hole, int n0);

// Length scales of the construction.  eps follows
//   4^8 eps = min(eps_prime, eps0, 1/(4 C~)),
// and the guard eps <= 1/(4^9 C~) validates the return-time expansion.
struct LengthScales {
    double eps_prime = 0.0;
    double eps0 = 0.0;
    double C_tilde = 0.0;
    double eps = 0.0;
    double theta_target = 0.0;
    double D_measured = 0.0;
    bool guard_ok = false;
};

LengthScales derive_length_scales(double eps_prime, double eps0, double C_tilde,
                                  double theta = 0.0, double D = 0.0);

struct A3Report {
    bool pass = false;
    double mH = 0.0;
    double rhs = 0.0;    // (1-sqrt(theta))^3/3 * eps^2 / (D theta)
    double slack = 0.0;  // rhs - mH (affine in mH)
    double max_admissible = 0.0;
};

A3Report check_A3(double mH, double eps, double theta, double D);

struct Eq1Report {
    bool pass = false;
    double mH = 0.0;
    double rhs = 0.0;
};

// m(H) <= eps/2 * (e^{lambda0 m0/3} - 2)/e^{lambda0 (m0-1)/3} * c0' delta
Eq1Report check_no_piece_left_behind(double mH, double eps, double lambda0, int m0,
                                     double c0_prime, double delta);

// Aggregate hole-placement report (A3 requires tower-measured constants and
// is attached separately when available).
struct HoleAssumptionReport {
    double r = 0.0;
    int m0 = 10;
    double eps0 = 0.0;
    int n0 = 0;
    bool a1_pass = false, a2_pass = false, a4_pass = false;
    bool a3_evaluated = false, a3_pass = false;
    A1Report a1;
    A2Report a2;
    A4Report a4;
    A3Report a3;
};

HoleAssumptionReport check_hole_assumptions(const QuadMap& map,
                                            const OpenIntervalSet& hole,
                                            double delta0, int m0,
                                            int horizon = 1000);

struct CoveringCheck {
    int trials = 0;
    int covered = 0;   // union of T^i J, i <= 2 n0, covers [1-a,1] \ H
    double worst_gap = 0.0;
    bool pass() const { return trials > 0 && covered == trials; }
};

// Open-system covering property: for random intervals J with |J| >= eps0/2,
// the union of the first 2 n0 open-map images covers [1-a,1] \ H.  Points
// falling into the hole are removed before each step.
CoveringCheck covering_property_check(const QuadMap& map, const OpenIntervalSet& hole,
                                      double eps0, int n0, int trials,
                                      std::uint64_t seed, double tol = 1e-9);

}  // namespace openmap
