#pragma once

// Test-only oracles, independent of the library's analytic code paths:
// central finite differences, brute-force integrals and grid searches.

#include <array>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace oracles {

inline double central_diff(const std::function<double(double)>& f, double x, double h = 1e-5) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Mixed second difference d^2 F / dx dy.
inline double mixed_diff(const std::function<double(double, double)>& f, double x, double y,
                         double h = 1e-4) {
    return (f(x + h, y + h) - f(x + h, y - h) - f(x - h, y + h) + f(x - h, y - h)) /
           (4.0 * h * h);
}

inline double rel_err(double got, double want) {
    const double scale = std::max({std::fabs(got), std::fabs(want), 1e-12});
    return std::fabs(got - want) / scale;
}

// Tensor midpoint quadrature of f over the rectangle [lo, hi] in d dims.
inline double midpoint_integral(const std::function<double(std::span<const double>)>& f,
                                std::span<const double> lo, std::span<const double> hi,
                                int nodes_per_axis) {
    const std::size_t d = lo.size();
    std::vector<double> widths(d);
    for (std::size_t j = 0; j < d; ++j) widths[j] = (hi[j] - lo[j]) / nodes_per_axis;
    std::vector<int> idx(d, 0);
    std::vector<double> pt(d);
    double vol = 1.0;
    for (std::size_t j = 0; j < d; ++j) vol *= widths[j];
    double acc = 0.0;
    for (;;) {
        for (std::size_t j = 0; j < d; ++j) pt[j] = lo[j] + (idx[j] + 0.5) * widths[j];
        acc += f(pt);
        std::size_t j = 0;
        for (; j < d; ++j) {
            if (++idx[j] < nodes_per_axis) break;
            idx[j] = 0;
        }
        if (j == d) break;
    }
    return acc * vol;
}

} // namespace oracles
