#pragma once

#include <cstddef>
#include <vector>

namespace copgof {

// Gauss-Legendre nodes/weights on [a,b]. Used for the dependence-measure
// integrals and test oracles; the transform itself uses the midpoint rule.
struct GaussLegendre {
    std::vector<double> nodes;
    std::vector<double> weights;
    GaussLegendre(std::size_t n, double a, double b);
};

} // namespace copgof
