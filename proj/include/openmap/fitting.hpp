#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace openmap {

// Ordinary least squares y = intercept + slope * x.
struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    double slope_stderr = 0.0;
    std::size_t n = 0;
};

inline LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("linear_fit: need >= 2 matched points");
    const std::size_t n = x.size();
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < n; ++i) { sx += x[i]; sy += y[i]; }
    const double mx = sx / double(n), my = sy / double(n);
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    LinearFit f;
    f.n = n;
    if (sxx == 0.0) throw std::invalid_argument("linear_fit: degenerate abscissa");
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss_res = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = y[i] - (f.intercept + f.slope * x[i]);
        ss_res += e * e;
    }
    f.r2 = (syy == 0.0) ? 1.0 : 1.0 - ss_res / syy;
    if (n > 2) f.slope_stderr = std::sqrt(ss_res / double(n - 2) / sxx);
    return f;
}

// Deterministic 64-bit splitmix; used both for per-sample RNG streams and for
// seeded test generators.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Uniform double in [0,1) from a 64-bit word (53-bit mantissa).
inline double u01_from_bits(std::uint64_t w) {
    return double(w >> 11) * 0x1.0p-53;
}

// k-th value of the stream derived from (seed, k); order-independent.
inline double stream_u01(std::uint64_t seed, std::uint64_t k, std::uint64_t round = 0) {
    std::uint64_t s = seed ^ (0x517cc1b727220a95ULL * (k + 1)) ^ (round << 32);
    splitmix64(s);
    return u01_from_bits(splitmix64(s));
}

}  // namespace openmap
