#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace openmap {

// The quadratic family f_a(x) = 1 - a x^2 on [-1,1], 0 <= a <= 2.
// The invariant range is [1-a, 1]; the critical point is x = 0.
struct QuadMap {
    double a = 2.0;

    QuadMap() = default;
    explicit QuadMap(double a_) : a(a_) {
        if (!(a >= 0.0 && a <= 2.0))
            throw std::invalid_argument("QuadMap: parameter a must lie in [0,2]");
    }

    double range_lo() const { return 1.0 - a; }
    double range_hi() const { return 1.0; }

    // Checked evaluation (domain [-1,1]).
    double eval(double x) const {
        if (std::fabs(x) > 1.0 + 4e-16)
            throw std::domain_error("QuadMap::eval: |x| > 1");
        return 1.0 - a * x * x;
    }

    // Unchecked step, used in hot loops.
    double step(double x) const { return 1.0 - a * x * x; }

    double deriv(double x) const { return -2.0 * a * x; }

    // n-fold iterate (unchecked).
    double iterate(double x, int n) const {
        for (int i = 0; i < n; ++i) x = step(x);
        return x;
    }

    // |(f^n)'(x)| accumulated along the orbit.
    double deriv_product_abs(double x, int n) const {
        double p = 1.0;
        for (int i = 0; i < n; ++i) {
            p *= std::fabs(deriv(x));
            x = step(x);
        }
        return p;
    }
};

struct Orbit {
    std::vector<double> points;  // x, f(x), ..., f^n(x)
    double deriv_product;        // prod_{i<n} f'(f^i(x)), signed
};

Orbit orbit_deriv(const QuadMap& map, double x, int n);

// A hole: finite union of open intervals, sorted and pairwise disjoint.
struct OpenIntervalSet {
    std::vector<std::pair<double, double>> comp;

    OpenIntervalSet() = default;
    static OpenIntervalSet make(std::vector<std::pair<double, double>> intervals);

    bool empty() const { return comp.empty(); }
    std::size_t count() const { return comp.size(); }
    double measure() const;

    // Strict interior membership (holes are open).
    bool contains(double x) const;
    // Index of the component whose open interior contains x, or -1.
    int component_of(double x) const;
    // Distance of x to the set; 0 if x lies in the closure of a component.
    double distance(double x) const;
};

// G_j = -H_j; f_a is even so T^{-1}(T H_j) = H_j u G_j.
OpenIntervalSet hole_reflection(const OpenIntervalSet& holes);

struct CriticalOrbitStats {
    std::vector<double> points;  // T^k(0) for k = 1..horizon
    double min_dist_zero;
    double min_dist_hole;  // +inf if no hole supplied
};

CriticalOrbitStats critical_orbit_stats(const QuadMap& map, int horizon,
                                        const OpenIntervalSet* hole = nullptr);

// Closed-interval image under one fold-aware map step: if 0 lies strictly
// inside, the image is [min(f(lo),f(hi)), 1].
struct Interval {
    double lo, hi;
    double length() const { return hi - lo; }
};

Interval map_interval(const QuadMap& map, Interval J);
Interval map_interval_n(const QuadMap& map, Interval J, int n);

// Partition {I_k} of (-delta,delta) with delta = e^{-k0}:
// I_k = (e^{-(k+1)}, e^{-k}) for k0 <= k <= kmax, I_{-k} = -I_k,
// plus the unresolved core (-e^{-(kmax+1)}, e^{-(kmax+1)}).
struct NeighborhoodPartition {
    int k0 = 6;
    int kmax = 40;
    double delta;       // e^{-k0}
    double core_bound;  // e^{-(kmax+1)}

    NeighborhoodPartition(int k0_, int kmax_);

    double cell_outer(int k) const { return std::exp(-double(std::abs(k))); }
    double cell_inner(int k) const { return std::exp(-double(std::abs(k) + 1)); }

    enum class Region { Outside, Cell, Core };
    struct Classify {
        Region region;
        int k;  // signed cell index, valid when region == Cell
    };
    Classify classify(double x) const;
};

// ptilde(x) = min{ j >= 1 : |T^j x - T^j 0| >= 1/j^2 }, capped.
int bound_period_pointwise(const QuadMap& map, double x, int cap);

// p(k) = inf over y in I_k of ptilde(y), via endpoint-inclusive grid sampling
// refined (grid doubling) until two successive passes agree.
int bound_period(const QuadMap& map, const NeighborhoodPartition& part, int k,
                 int grid = 16, int cap = 4096);

// q(k) = max{ n : |T^j((0, e^{-k}))| <= r/2 for all j <= n }.  Throws if the
// cap is exceeded before the interval grows past r/2.
int recovery_time(const QuadMap& map, int k, double r, int cap = 100000);

// Tabulated bound periods and recovery times for k0 <= |k| <= kmax (values
// are symmetric in k since f is even).
struct BoundRecoveryTables {
    int k0, kmax;
    double r;          // min(dist(critical orbit, H), delta0)
    double eps_prime;  // min over k of |T^{q(k)}(I_k)|
    std::vector<int> p;  // index k - k0
    std::vector<int> q;

    int p_of(int k) const { return p.at(std::size_t(std::abs(k) - k0)); }
    int q_of(int k) const { return q.at(std::size_t(std::abs(k) - k0)); }

    static BoundRecoveryTables build(const QuadMap& map,
                                     const NeighborhoodPartition& part,
                                     double r, int q_cap = 100000);
};

}  // namespace openmap
