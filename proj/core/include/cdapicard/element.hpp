#pragma once

/// @file element.hpp
/// @brief Affine P2 / P1 shape functions on triangles.
///
/// Local P2 ordering: vertex functions 0..2, then edge functions 3..5 where
/// edge function 3+i lives on the edge opposite vertex i.

#include "cdapicard/mesh.hpp"

#include <array>

namespace cdapicard {

using Vec2 = std::array<double, 2>;

struct CellGeometry {
    double area = 0.0;
    std::array<Point, 3> vertices{};
    /// Constant gradients of the barycentric coordinates.
    std::array<Vec2, 3> grad_lambda{};

    [[nodiscard]] Point map(const std::array<double, 3>& lambda) const
    {
        return {lambda[0] * vertices[0].x + lambda[1] * vertices[1].x + lambda[2] * vertices[2].x,
                lambda[0] * vertices[0].y + lambda[1] * vertices[1].y + lambda[2] * vertices[2].y};
    }
};

CellGeometry cell_geometry(const Mesh& m, int t);

inline std::array<double, 6> p2_values(const std::array<double, 3>& l)
{
    return {l[0] * (2.0 * l[0] - 1.0), l[1] * (2.0 * l[1] - 1.0), l[2] * (2.0 * l[2] - 1.0),
            4.0 * l[1] * l[2],         4.0 * l[2] * l[0],         4.0 * l[0] * l[1]};
}

inline std::array<Vec2, 6> p2_gradients(const std::array<double, 3>& l, const std::array<Vec2, 3>& g)
{
    std::array<Vec2, 6> out{};
    for (int i = 0; i < 3; ++i) {
        const double s = 4.0 * l[static_cast<std::size_t>(i)] - 1.0;
        out[static_cast<std::size_t>(i)] = {s * g[static_cast<std::size_t>(i)][0], s * g[static_cast<std::size_t>(i)][1]};
    }
    for (int i = 0; i < 3; ++i) {
        const auto j = static_cast<std::size_t>((i + 1) % 3);
        const auto k = static_cast<std::size_t>((i + 2) % 3);
        out[static_cast<std::size_t>(3 + i)] = {4.0 * (l[j] * g[k][0] + l[k] * g[j][0]),
                                                4.0 * (l[j] * g[k][1] + l[k] * g[j][1])};
    }
    return out;
}

}  // namespace cdapicard
