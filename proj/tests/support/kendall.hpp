#pragma once

// Empirical Kendall tau via Knight's O(n log n) inversion count (test-only;
// assumes no ties, which holds a.s. for the continuous samplers under test).

#include <algorithm>
#include <cstddef>
#include <utility>
#include <vector>

namespace oracles {

inline std::size_t merge_count(std::vector<double>& v, std::vector<double>& buf, std::size_t lo,
                               std::size_t hi) {
    if (hi - lo < 2) return 0;
    const std::size_t mid = (lo + hi) / 2;
    std::size_t inv = merge_count(v, buf, lo, mid) + merge_count(v, buf, mid, hi);
    std::size_t i = lo, j = mid, k = lo;
    while (i < mid && j < hi) {
        if (v[i] <= v[j])
            buf[k++] = v[i++];
        else {
            inv += mid - i;
            buf[k++] = v[j++];
        }
    }
    while (i < mid) buf[k++] = v[i++];
    while (j < hi) buf[k++] = v[j++];
    std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo),
              buf.begin() + static_cast<std::ptrdiff_t>(hi),
              v.begin() + static_cast<std::ptrdiff_t>(lo));
    return inv;
}

inline double empirical_tau(std::vector<std::pair<double, double>> xy) {
    const std::size_t n = xy.size();
    std::sort(xy.begin(), xy.end());
    std::vector<double> y(n), buf(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = xy[i].second;
    const std::size_t disc = merge_count(y, buf, 0, n);
    const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
    return 1.0 - 2.0 * static_cast<double>(disc) / pairs;
}

} // namespace oracles
