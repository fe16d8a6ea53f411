#pragma once

#include <cmath>

namespace copgof {

inline constexpr double inv_sqrt_2pi = 0.3989422804014326779399460599343819;
inline constexpr double sqrt2 = 1.4142135623730950488016887242096981;

inline double norm_pdf(double x) { return inv_sqrt_2pi * std::exp(-0.5 * x * x); }

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / sqrt2); }

// Standard normal quantile, Wichura's PPND16 algorithm (AS 241).
// Accurate to about 1e-16 relative over (0,1).
double norm_quantile(double p);

} // namespace copgof
