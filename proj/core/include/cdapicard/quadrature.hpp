#pragma once

#include <array>
#include <vector>

namespace cdapicard {

/// Quadrature on a triangle in barycentric coordinates. Weights sum to 1 and
/// are multiplied by the physical area at the call site.
struct QuadratureRule {
    std::vector<std::array<double, 3>> points;
    std::vector<double> weights;
    int degree = 0;

    [[nodiscard]] std::size_t size() const { return weights.size(); }
};

/// 12-point symmetric rule, exact for polynomials of total degree <= 6.
const QuadratureRule& triangle_rule_degree6();

}  // namespace cdapicard
