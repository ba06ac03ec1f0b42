#pragma once

// Shared helpers for the test suites: finite-difference oracles and
// relative-error comparison independent of the library's gradient path.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace testsupport {

/// Central finite difference of f at x with step h, via an in-place poke.
inline double central_difference(double& slot, const std::function<double()>& f,
                                 double h = 1e-5) {
    const double saved = slot;
    slot = saved + h;
    const double up = f();
    slot = saved - h;
    const double down = f();
    slot = saved;
    return (up - down) / (2.0 * h);
}

/// Relative error with an absolute floor: differences below abs_floor
/// count as exact (finite-difference noise near zero).
inline double gradient_error(double analytic, double fd, double abs_floor = 1e-9) {
    const double diff = std::fabs(analytic - fd);
    if (diff <= abs_floor) return 0.0;
    return diff / std::max(std::fabs(analytic), std::fabs(fd));
}

inline std::vector<double> random_values(std::mt19937_64& rng, std::size_t n,
                                         double lo = -1.0, double hi = 1.0) {
    std::vector<double> out(n);
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& v : out) v = dist(rng);
    return out;
}

}  // namespace testsupport
