#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace copgof {

// Axis-aligned evaluation grid over (0,1)^d. Values attached to a grid are
// stored row-major with the last axis fastest.
struct GridSpec {
    std::vector<std::vector<double>> axes;

    // Equally spaced midpoints (2i-1)/(2n) per axis, so the mesh is exactly
    // 1/n and sums over the grid are proper Riemann sums.
    static GridSpec midpoints(const std::vector<int>& counts);

    int dim() const { return static_cast<int>(axes.size()); }
    std::size_t total() const;
    double mesh(int axis) const; // uniform spacing; throws otherwise
    bool same_as(const GridSpec& other, double tol = 1e-12) const;
};

struct TestProcessGrid {
    GridSpec grid;
    std::vector<double> values;
    double delta = 0.0;
    long sample_size = 0;
    std::string provenance;
};

struct Statistics {
    double kappa = 0.0;  // sup |W| over the grid
    double omega2 = 0.0; // product-mesh Riemann sum of W^2
};

Statistics test_statistics(const TestProcessGrid& w);

} // namespace copgof
