#include "cdapicard/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

namespace cdapicard {

namespace {

constexpr double kWallTol = 1e-14;

std::uint8_t sides_of(const Point& p)
{
    std::uint8_t s = 0;
    if (std::abs(p.x) <= kWallTol) s |= side_bit(Side::left);
    if (std::abs(p.x - 1.0) <= kWallTol) s |= side_bit(Side::right);
    if (std::abs(p.y) <= kWallTol) s |= side_bit(Side::bottom);
    if (std::abs(p.y - 1.0) <= kWallTol) s |= side_bit(Side::top);
    return s;
}

double distance(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

}  // namespace

Mesh::Mesh(std::vector<Point> vertices, std::vector<Triangle> triangles)
    : vertices_(std::move(vertices)), triangles_(std::move(triangles))
{
    const auto nv = static_cast<int>(vertices_.size());
    for (auto& tri : triangles_) {
        for (int v : tri) {
            if (v < 0 || v >= nv) throw std::invalid_argument("Mesh: triangle references missing vertex");
        }
        const Point& a = vertices_[static_cast<std::size_t>(tri[0])];
        const Point& b = vertices_[static_cast<std::size_t>(tri[1])];
        const Point& c = vertices_[static_cast<std::size_t>(tri[2])];
        const double cross = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
        if (cross < 0.0) std::swap(tri[1], tri[2]);
    }

    // Edge table: collect (lo, hi) pairs, sort, unique.
    std::vector<Edge> all;
    all.reserve(3 * triangles_.size());
    for (const auto& tri : triangles_) {
        for (int i = 0; i < 3; ++i) {
            const int a = tri[static_cast<std::size_t>((i + 1) % 3)];
            const int b = tri[static_cast<std::size_t>((i + 2) % 3)];
            all.push_back({std::min(a, b), std::max(a, b)});
        }
    }
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    edges_ = std::move(all);

    triangle_edges_.resize(triangles_.size());
    edge_valence_.assign(edges_.size(), 0);
    for (std::size_t t = 0; t < triangles_.size(); ++t) {
        const auto& tri = triangles_[t];
        for (int i = 0; i < 3; ++i) {
            const int e = find_edge(tri[static_cast<std::size_t>((i + 1) % 3)], tri[static_cast<std::size_t>((i + 2) % 3)]);
            triangle_edges_[t][static_cast<std::size_t>(i)] = e;
            ++edge_valence_[static_cast<std::size_t>(e)];
        }
    }

    vertex_sides_.resize(vertices_.size());
    for (std::size_t v = 0; v < vertices_.size(); ++v) vertex_sides_[v] = sides_of(vertices_[v]);

    edge_side_.assign(edges_.size(), -1);
    for (std::size_t e = 0; e < edges_.size(); ++e) {
        if (edge_valence_[e] != 1) continue;
        const std::uint8_t common = vertex_sides_[static_cast<std::size_t>(edges_[e][0])] &
                                    vertex_sides_[static_cast<std::size_t>(edges_[e][1])];
        for (int s = 0; s < 4; ++s) {
            if (common & (1u << s)) {
                edge_side_[e] = static_cast<std::int8_t>(s);
                break;
            }
        }
    }
}

std::optional<Side> Mesh::edge_side(int e) const
{
    const auto s = edge_side_[static_cast<std::size_t>(e)];
    if (s < 0) return std::nullopt;
    return static_cast<Side>(s);
}

int Mesh::find_edge(int a, int b) const
{
    const Edge key{std::min(a, b), std::max(a, b)};
    const auto it = std::lower_bound(edges_.begin(), edges_.end(), key);
    if (it == edges_.end() || *it != key) return -1;
    return static_cast<int>(it - edges_.begin());
}

double Mesh::signed_area(int t) const
{
    const auto& tri = triangle(t);
    const Point& a = vertex(tri[0]);
    const Point& b = vertex(tri[1]);
    const Point& c = vertex(tri[2]);
    return 0.5 * ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x));
}

Point Mesh::centroid(int t) const
{
    const auto& tri = triangle(t);
    const Point& a = vertex(tri[0]);
    const Point& b = vertex(tri[1]);
    const Point& c = vertex(tri[2]);
    return {(a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0};
}

double Mesh::diameter(int t) const
{
    const auto& tri = triangle(t);
    const Point& a = vertex(tri[0]);
    const Point& b = vertex(tri[1]);
    const Point& c = vertex(tri[2]);
    return std::max({distance(a, b), distance(b, c), distance(c, a)});
}

double Mesh::max_diameter() const
{
    double h = 0.0;
    for (int t = 0; t < num_triangles(); ++t) h = std::max(h, diameter(t));
    return h;
}

Mesh unit_square(int n)
{
    if (n < 1) throw std::invalid_argument("unit_square: n must be >= 1");
    const int np = n + 1;
    std::vector<Point> vertices;
    vertices.reserve(static_cast<std::size_t>(np * np));
    for (int j = 0; j <= n; ++j) {
        for (int i = 0; i <= n; ++i) {
            vertices.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n});
        }
    }
    std::vector<Triangle> triangles;
    triangles.reserve(static_cast<std::size_t>(2 * n * n));
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const int v00 = j * np + i;
            const int v10 = v00 + 1;
            const int v01 = v00 + np;
            const int v11 = v01 + 1;
            triangles.push_back({v00, v10, v11});
            triangles.push_back({v00, v11, v01});
        }
    }
    return Mesh(std::move(vertices), std::move(triangles));
}

Mesh barycentric_refine(const Mesh& m)
{
    std::vector<Point> vertices = m.vertices();
    vertices.reserve(vertices.size() + static_cast<std::size_t>(m.num_triangles()));
    std::vector<Triangle> triangles;
    triangles.reserve(3 * static_cast<std::size_t>(m.num_triangles()));
    for (int t = 0; t < m.num_triangles(); ++t) {
        const int c = static_cast<int>(vertices.size());
        vertices.push_back(m.centroid(t));
        const auto& tri = m.triangle(t);
        triangles.push_back({tri[0], tri[1], c});
        triangles.push_back({tri[1], tri[2], c});
        triangles.push_back({tri[2], tri[0], c});
    }
    return Mesh(std::move(vertices), std::move(triangles));
}

Mesh cavity_mesh(int n) { return barycentric_refine(unit_square(n)); }

std::array<double, 3> barycentric(const Mesh& m, int t, Point p)
{
    const auto& tri = m.triangle(t);
    const Point& a = m.vertex(tri[0]);
    const Point& b = m.vertex(tri[1]);
    const Point& c = m.vertex(tri[2]);
    const double det = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    const double l1 = ((p.x - a.x) * (c.y - a.y) - (p.y - a.y) * (c.x - a.x)) / det;
    const double l2 = ((b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)) / det;
    return {1.0 - l1 - l2, l1, l2};
}

int locate_cell(const Mesh& m, Point p)
{
    if (!(p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0)) {
        throw std::domain_error("locate_cell: point outside the unit square");
    }
    constexpr double tol = 1e-12;
    for (int t = 0; t < m.num_triangles(); ++t) {
        const auto l = barycentric(m, t, p);
        if (l[0] >= -tol && l[1] >= -tol && l[2] >= -tol) return t;
    }
    throw std::domain_error("locate_cell: no triangle contains the point");
}

void validate(const Mesh& m)
{
    auto fail = [](const std::string& what) { throw std::logic_error("invalid mesh: " + what); };

    double total = 0.0;
    for (int t = 0; t < m.num_triangles(); ++t) {
        const double a = m.signed_area(t);
        if (!(a > 0.0)) fail("triangle " + std::to_string(t) + " has non-positive area");
        total += a;
    }
    if (std::abs(total - 1.0) > 1e-12) fail("areas do not sum to 1");

    // Interior edges must be traversed in opposite directions by their two triangles.
    std::vector<int> forward(static_cast<std::size_t>(m.num_edges()), 0);
    for (int t = 0; t < m.num_triangles(); ++t) {
        const auto& tri = m.triangle(t);
        for (int i = 0; i < 3; ++i) {
            const int a = tri[static_cast<std::size_t>((i + 1) % 3)];
            const int b = tri[static_cast<std::size_t>((i + 2) % 3)];
            const int e = m.triangle_edges(t)[static_cast<std::size_t>(i)];
            forward[static_cast<std::size_t>(e)] += (a < b) ? 1 : -1;
        }
    }
    for (int e = 0; e < m.num_edges(); ++e) {
        const int val = m.edge_valence(e);
        if (val > 2) fail("edge " + std::to_string(e) + " shared by more than two triangles");
        if (val == 2 && forward[static_cast<std::size_t>(e)] != 0) fail("inconsistent orientation across edge");
        if (val == 1 && !m.edge_side(e)) fail("boundary edge " + std::to_string(e) + " is not on a wall");
    }
    if (m.num_vertices() - m.num_edges() + m.num_triangles() != 1) fail("Euler characteristic is not that of a disk");
}

void write_mesh(std::ostream& os, const Mesh& m)
{
    os << "VERTICES " << m.num_vertices() << " / TRIANGLES " << m.num_triangles() << '\n';
    os.precision(17);
    for (const auto& p : m.vertices()) os << p.x << ' ' << p.y << '\n';
    for (const auto& t : m.triangles()) os << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

}  // namespace cdapicard
