#include "openmap/quadmap.hpp"

#include <algorithm>
#include <limits>

namespace openmap {

Orbit orbit_deriv(const QuadMap& map, double x, int n) {
    if (n < 0) throw std::invalid_argument("orbit_deriv: n < 0");
    map.eval(x);  // domain check
    Orbit o;
    o.points.reserve(std::size_t(n) + 1);
    o.points.push_back(x);
    double prod = 1.0;
    for (int i = 0; i < n; ++i) {
        prod *= map.deriv(x);
        x = map.step(x);
        o.points.push_back(x);
    }
    o.deriv_product = prod;
    return o;
}

OpenIntervalSet OpenIntervalSet::make(std::vector<std::pair<double, double>> intervals) {
    std::sort(intervals.begin(), intervals.end());
    for (std::size_t i = 0; i < intervals.size(); ++i) {
        auto [l, r] = intervals[i];
        if (!(l < r))
            throw std::invalid_argument("OpenIntervalSet: component with l >= r");
        if (!(l >= -1.0 && r <= 1.0))
            throw std::invalid_argument("OpenIntervalSet: component not inside (-1,1)");
        if (i > 0 && intervals[i - 1].second >= l)
            throw std::invalid_argument("OpenIntervalSet: overlapping components");
    }
    OpenIntervalSet s;
    s.comp = std::move(intervals);
    return s;
}

double OpenIntervalSet::measure() const {
    double m = 0;
    for (auto& [l, r] : comp) m += r - l;
    return m;
}

bool OpenIntervalSet::contains(double x) const { return component_of(x) >= 0; }

int OpenIntervalSet::component_of(double x) const {
    for (std::size_t j = 0; j < comp.size(); ++j)
        if (x > comp[j].first && x < comp[j].second) return int(j);
    return -1;
}

double OpenIntervalSet::distance(double x) const {
    double d = std::numeric_limits<double>::infinity();
    for (auto& [l, r] : comp) {
        const double dj = std::max(0.0, std::max(l - x, x - r));
        d = std::min(d, dj);
    }
    return d;
}

OpenIntervalSet hole_reflection(const OpenIntervalSet& holes) {
    std::vector<std::pair<double, double>> refl;
    refl.reserve(holes.comp.size());
    for (auto& [l, r] : holes.comp) refl.emplace_back(-r, -l);
    return OpenIntervalSet::make(std::move(refl));
}

CriticalOrbitStats critical_orbit_stats(const QuadMap& map, int horizon,
                                        const OpenIntervalSet* hole) {
    if (horizon < 1) throw std::invalid_argument("critical_orbit_stats: horizon < 1");
    CriticalOrbitStats s;
    s.points.reserve(std::size_t(horizon));
    s.min_dist_zero = std::numeric_limits<double>::infinity();
    s.min_dist_hole = std::numeric_limits<double>::infinity();
    double x = 0.0;
    for (int n = 1; n <= horizon; ++n) {
        x = map.step(x);
        s.points.push_back(x);
        s.min_dist_zero = std::min(s.min_dist_zero, std::fabs(x));
        if (hole) s.min_dist_hole = std::min(s.min_dist_hole, hole->distance(x));
    }
    return s;
}

Interval map_interval(const QuadMap& map, Interval J) {
    const double fl = map.step(J.lo), fh = map.step(J.hi);
    Interval out{std::min(fl, fh), std::max(fl, fh)};
    if (J.lo < 0.0 && J.hi > 0.0) out.hi = 1.0;  // fold at the critical point
    return out;
}

Interval map_interval_n(const QuadMap& map, Interval J, int n) {
    for (int i = 0; i < n; ++i) J = map_interval(map, J);
    return J;
}

NeighborhoodPartition::NeighborhoodPartition(int k0_, int kmax_) : k0(k0_), kmax(kmax_) {
    if (k0 < 1 || kmax < k0)
        throw std::invalid_argument("NeighborhoodPartition: need 1 <= k0 <= kmax");
    delta = std::exp(-double(k0));
    core_bound = std::exp(-double(kmax + 1));
}

NeighborhoodPartition::Classify NeighborhoodPartition::classify(double x) const {
    const double ax = std::fabs(x);
    if (ax >= delta) return {Region::Outside, 0};
    if (ax <= core_bound) return {Region::Core, 0};
    int k = int(std::floor(-std::log(ax)));
    k = std::max(k0, std::min(kmax, k));
    // log rounding can be off by one at cell edges
    while (k > k0 && ax >= cell_outer(k)) --k;
    while (k < kmax && ax < cell_inner(k)) ++k;
    return {Region::Cell, x >= 0 ? k : -k};
}

// Deviation of T^j(z + dev) from T^j(z) stepped without cancellation:
// f(z+d) - f(z) = -a (2z + d) d.  Needed because naive endpoint iteration
// underflows to zero for points within ~e^{-19} of the critical point.
namespace {
struct DeviationTracker {
    double a, z, dev;
    DeviationTracker(double a_, double z0, double dev0) : a(a_), z(z0), dev(dev0) {}
    void step() {
        dev = -a * (2.0 * z + dev) * dev;
        z = 1.0 - a * z * z;
    }
};
}  // namespace

int bound_period_pointwise(const QuadMap& map, double x, int cap) {
    DeviationTracker t(map.a, 0.0, x);
    for (int j = 1; j <= cap; ++j) {
        t.step();
        if (std::fabs(t.dev) >= 1.0 / (double(j) * double(j))) return j;
    }
    return cap;
}

int bound_period(const QuadMap& map, const NeighborhoodPartition& part, int k,
                 int grid, int cap) {
    if (std::abs(k) < part.k0 || std::abs(k) > part.kmax)
        throw std::invalid_argument("bound_period: cell index outside [k0, kmax]");
    if (grid < 2) throw std::invalid_argument("bound_period: grid < 2");
    const double lo = part.cell_inner(k), hi = part.cell_outer(k);
    const double sign = k >= 0 ? 1.0 : -1.0;
    auto sweep = [&](int g) {
        int pmin = cap;
        for (int i = 0; i <= g; ++i) {
            const double y = sign * (lo + (hi - lo) * double(i) / double(g));
            pmin = std::min(pmin, bound_period_pointwise(map, y, cap));
        }
        return pmin;
    };
    int prev = sweep(grid);
    for (int g = 2 * grid; g <= (1 << 20); g *= 2) {
        const int cur = sweep(g);
        if (cur == prev) return cur;
        prev = cur;
    }
    return prev;
}

int recovery_time(const QuadMap& map, int k, double r, int cap) {
    if (!(r > 0.0)) throw std::invalid_argument("recovery_time: r <= 0");
    DeviationTracker t(map.a, 0.0, std::exp(-double(std::abs(k))));
    for (int j = 1; j <= cap; ++j) {
        t.step();
        if (std::fabs(t.dev) > r / 2.0) return j - 1;
    }
    throw std::runtime_error("recovery_time: cap exceeded before growth past r/2");
}

BoundRecoveryTables BoundRecoveryTables::build(const QuadMap& map,
                                               const NeighborhoodPartition& part,
                                               double r, int q_cap) {
    if (!(r > 0.0)) throw std::invalid_argument("BoundRecoveryTables: r <= 0");
    BoundRecoveryTables t;
    t.k0 = part.k0;
    t.kmax = part.kmax;
    t.r = r;
    t.eps_prime = std::numeric_limits<double>::infinity();
    for (int k = part.k0; k <= part.kmax; ++k) {
        t.p.push_back(bound_period(map, part, k));
        t.q.push_back(recovery_time(map, k, r, q_cap));
        // |T^{q(k)}(I_k)| via deviations of both cell endpoints from the
        // critical orbit; their ratio stays ~e^2 so the difference is stable.
        DeviationTracker inner(map.a, 0.0, part.cell_inner(k));
        DeviationTracker outer(map.a, 0.0, part.cell_outer(k));
        for (int j = 0; j < t.q.back(); ++j) {
            inner.step();
            outer.step();
        }
        t.eps_prime = std::min(t.eps_prime, std::fabs(outer.dev - inner.dev));
    }
    return t;
}

}  // namespace openmap
