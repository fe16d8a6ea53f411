#include "copgof/grid.hpp"

#include <cmath>

#include "copgof/errors.hpp"

namespace copgof {

GridSpec GridSpec::midpoints(const std::vector<int>& counts) {
    GridSpec g;
    for (int n : counts) {
        if (n < 1) throw invalid_parameters("grid axis needs at least one node");
        std::vector<double> axis(static_cast<std::size_t>(n));
        for (int i = 1; i <= n; ++i)
            axis[static_cast<std::size_t>(i) - 1] = (2.0 * i - 1.0) / (2.0 * n);
        g.axes.push_back(std::move(axis));
    }
    return g;
}

std::size_t GridSpec::total() const {
    std::size_t t = 1;
    for (const auto& a : axes) t *= a.size();
    return axes.empty() ? 0 : t;
}

double GridSpec::mesh(int axis) const {
    const auto& a = axes.at(static_cast<std::size_t>(axis));
    if (a.size() < 2) return 1.0;
    const double h = a[1] - a[0];
    for (std::size_t i = 2; i < a.size(); ++i)
        if (std::fabs(a[i] - a[i - 1] - h) > 1e-12)
            throw invalid_parameters("grid axis is not equally spaced");
    return h;
}

bool GridSpec::same_as(const GridSpec& other, double tol) const {
    if (axes.size() != other.axes.size()) return false;
    for (std::size_t j = 0; j < axes.size(); ++j) {
        if (axes[j].size() != other.axes[j].size()) return false;
        for (std::size_t i = 0; i < axes[j].size(); ++i)
            if (std::fabs(axes[j][i] - other.axes[j][i]) > tol) return false;
    }
    return true;
}

Statistics test_statistics(const TestProcessGrid& w) {
    if (w.values.empty() || w.grid.total() != w.values.size())
        throw invalid_parameters("empty or inconsistent test-process grid");
    Statistics s;
    double sumsq = 0.0;
    for (double v : w.values) {
        s.kappa = std::max(s.kappa, std::fabs(v));
        sumsq += v * v;
    }
    double cellvol = 1.0;
    for (int j = 0; j < w.grid.dim(); ++j) cellvol *= w.grid.mesh(j);
    s.omega2 = cellvol * sumsq;
    return s;
}

} // namespace copgof
