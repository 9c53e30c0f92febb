#pragma once

/// @file mesh.hpp
/// @brief Conforming triangulations of the unit square.
///
/// Meshes are built once and never mutated. Vertices carry a bitmask of the
/// walls they touch (corners touch two); boundary edges carry exactly one wall.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

namespace cdapicard {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

enum class Side : std::uint8_t { left = 0, right = 1, bottom = 2, top = 3 };

inline constexpr std::uint8_t side_bit(Side s) { return static_cast<std::uint8_t>(1u << static_cast<unsigned>(s)); }

using Triangle = std::array<int, 3>;
using Edge = std::array<int, 2>;

class Mesh {
public:
    /// Builds the derived edge/adjacency tables and boundary tags from raw
    /// connectivity. Triangles are reoriented counter-clockwise.
    Mesh(std::vector<Point> vertices, std::vector<Triangle> triangles);

    [[nodiscard]] int num_vertices() const { return static_cast<int>(vertices_.size()); }
    [[nodiscard]] int num_triangles() const { return static_cast<int>(triangles_.size()); }
    [[nodiscard]] int num_edges() const { return static_cast<int>(edges_.size()); }

    [[nodiscard]] const std::vector<Point>& vertices() const { return vertices_; }
    [[nodiscard]] const std::vector<Triangle>& triangles() const { return triangles_; }
    /// Sorted (lo, hi) vertex pairs in lexicographic order.
    [[nodiscard]] const std::vector<Edge>& edges() const { return edges_; }

    [[nodiscard]] const Point& vertex(int v) const { return vertices_[static_cast<std::size_t>(v)]; }
    [[nodiscard]] const Triangle& triangle(int t) const { return triangles_[static_cast<std::size_t>(t)]; }
    [[nodiscard]] const Edge& edge(int e) const { return edges_[static_cast<std::size_t>(e)]; }

    /// Edges of triangle t; local edge i is opposite local vertex i.
    [[nodiscard]] const std::array<int, 3>& triangle_edges(int t) const
    {
        return triangle_edges_[static_cast<std::size_t>(t)];
    }

    /// Number of triangles incident to edge e (1 on the boundary, 2 inside).
    [[nodiscard]] int edge_valence(int e) const { return edge_valence_[static_cast<std::size_t>(e)]; }

    /// Wall of a boundary edge, nullopt for interior edges.
    [[nodiscard]] std::optional<Side> edge_side(int e) const;

    /// Bitmask of side_bit() values for the walls touching vertex v.
    [[nodiscard]] std::uint8_t vertex_sides(int v) const { return vertex_sides_[static_cast<std::size_t>(v)]; }

    [[nodiscard]] double signed_area(int t) const;
    [[nodiscard]] Point centroid(int t) const;
    [[nodiscard]] double diameter(int t) const;
    [[nodiscard]] double max_diameter() const;

    /// Index of edge (a, b) in edges(), or -1 if absent.
    [[nodiscard]] int find_edge(int a, int b) const;

private:
    std::vector<Point> vertices_;
    std::vector<Triangle> triangles_;
    std::vector<Edge> edges_;
    std::vector<std::array<int, 3>> triangle_edges_;
    std::vector<int> edge_valence_;
    std::vector<std::int8_t> edge_side_;  // -1 for interior
    std::vector<std::uint8_t> vertex_sides_;
};

/// Structured (n+1)^2-vertex mesh; every square split bottom-left to top-right.
Mesh unit_square(int n);

/// Splits every triangle into three by inserting its centroid. New vertices
/// are appended in triangle order; child k of triangle t is 3t + k.
Mesh barycentric_refine(const Mesh& m);

/// Convenience for the velocity/pressure pair: unit_square(n) then refinement.
Mesh cavity_mesh(int n);

/// Barycentric coordinates of p with respect to triangle t.
std::array<double, 3> barycentric(const Mesh& m, int t, Point p);

/// Lowest-indexed triangle containing p. Throws std::domain_error if p lies
/// outside the unit square.
int locate_cell(const Mesh& m, Point p);

/// Throws std::logic_error naming the first violated invariant.
void validate(const Mesh& m);

/// Plain-text dump: header `VERTICES n / TRIANGLES m`, coordinates, 0-based triples.
void write_mesh(std::ostream& os, const Mesh& m);

}  // namespace cdapicard
