#include "cdapicard/space.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace cdapicard {

CellGeometry cell_geometry(const Mesh& m, int t)
{
    CellGeometry g;
    const auto& tri = m.triangle(t);
    const Point& a = m.vertex(tri[0]);
    const Point& b = m.vertex(tri[1]);
    const Point& c = m.vertex(tri[2]);
    g.vertices = {a, b, c};
    const double det = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    g.area = 0.5 * det;
    g.grad_lambda[0] = {(b.y - c.y) / det, (c.x - b.x) / det};
    g.grad_lambda[1] = {(c.y - a.y) / det, (a.x - c.x) / det};
    g.grad_lambda[2] = {(a.y - b.y) / det, (b.x - a.x) / det};
    return g;
}

DofMap::DofMap(std::shared_ptr<const Mesh> mesh, Family family) : mesh_(std::move(mesh)), family_(family)
{
    if (!mesh_) throw std::invalid_argument("DofMap: null mesh");
    switch (family_) {
    case Family::p2_scalar:
        component_size_ = mesh_->num_vertices() + mesh_->num_edges();
        num_dofs_ = component_size_;
        break;
    case Family::p2_vector:
        component_size_ = mesh_->num_vertices() + mesh_->num_edges();
        num_dofs_ = 2 * component_size_;
        break;
    case Family::p1_disc:
        component_size_ = 3 * mesh_->num_triangles();
        num_dofs_ = component_size_;
        break;
    }
}

std::array<int, 6> DofMap::p2_cell_dofs(int t) const
{
    const auto& tri = mesh_->triangle(t);
    const auto& ed = mesh_->triangle_edges(t);
    const int nv = mesh_->num_vertices();
    return {tri[0], tri[1], tri[2], nv + ed[0], nv + ed[1], nv + ed[2]};
}

Point DofMap::node(int dof) const
{
    if (family_ == Family::p1_disc) {
        const int t = dof / 3;
        return mesh_->vertex(mesh_->triangle(t)[static_cast<std::size_t>(dof % 3)]);
    }
    const int s = dof % component_size_;
    const int nv = mesh_->num_vertices();
    if (s < nv) return mesh_->vertex(s);
    const auto& e = mesh_->edge(s - nv);
    const Point& a = mesh_->vertex(e[0]);
    const Point& b = mesh_->vertex(e[1]);
    return {0.5 * (a.x + b.x), 0.5 * (a.y + b.y)};
}

std::uint8_t DofMap::node_sides(int dof) const
{
    if (family_ == Family::p1_disc) return 0;
    const int s = dof % component_size_;
    const int nv = mesh_->num_vertices();
    if (s < nv) return mesh_->vertex_sides(s);
    const auto side = mesh_->edge_side(s - nv);
    return side ? side_bit(*side) : std::uint8_t{0};
}

std::shared_ptr<const DofMap> build_dofmap(std::shared_ptr<const Mesh> mesh, Family family)
{
    return std::make_shared<const DofMap>(std::move(mesh), family);
}

Field::Field(std::shared_ptr<const DofMap> dm) : dofmap(std::move(dm)), values(Vector::Zero(dofmap->num_dofs())) {}

Field::Field(std::shared_ptr<const DofMap> dm, Vector v) : dofmap(std::move(dm)), values(std::move(v))
{
    if (values.size() != dofmap->num_dofs()) throw std::invalid_argument("Field: coefficient length mismatch");
}

Field interpolate_scalar(std::shared_ptr<const DofMap> dm, const std::function<double(Point)>& f)
{
    Field out(dm);
    for (int i = 0; i < dm->num_dofs(); ++i) out.values[i] = f(dm->node(i));
    return out;
}

Field interpolate_vector(std::shared_ptr<const DofMap> dm, const std::function<Vec2(Point)>& f)
{
    if (dm->family() != Family::p2_vector) throw std::invalid_argument("interpolate_vector: needs a P2 vector space");
    Field out(dm);
    const int n = dm->component_size();
    for (int i = 0; i < n; ++i) {
        const Vec2 v = f(dm->node(i));
        out.values[i] = v[0];
        out.values[n + i] = v[1];
    }
    return out;
}

double eval_p2(const Field& f, int component, int t, const std::array<double, 3>& lambda)
{
    const auto dofs = f.dofmap->p2_cell_dofs(t);
    const auto phi = p2_values(lambda);
    const int off = component * f.dofmap->component_size();
    double s = 0.0;
    for (std::size_t a = 0; a < 6; ++a) s += f.values[off + dofs[a]] * phi[a];
    return s;
}

Vec2 eval_p2_gradient(const Field& f, int component, int t, const std::array<double, 3>& lambda,
                      const CellGeometry& geo)
{
    const auto dofs = f.dofmap->p2_cell_dofs(t);
    const auto dphi = p2_gradients(lambda, geo.grad_lambda);
    const int off = component * f.dofmap->component_size();
    Vec2 g{0.0, 0.0};
    for (std::size_t a = 0; a < 6; ++a) {
        const double c = f.values[off + dofs[a]];
        g[0] += c * dphi[a][0];
        g[1] += c * dphi[a][1];
    }
    return g;
}

double eval_p1disc(const Field& f, int t, const std::array<double, 3>& lambda)
{
    return f.values[3 * t] * lambda[0] + f.values[3 * t + 1] * lambda[1] + f.values[3 * t + 2] * lambda[2];
}

Constraints Constraints::shifted(int offset) const
{
    Constraints out = *this;
    for (int& d : out.dofs) d += offset;
    return out;
}

Constraints Constraints::homogeneous() const
{
    Constraints out = *this;
    std::fill(out.values.begin(), out.values.end(), 0.0);
    return out;
}

Constraints Constraints::merged(const Constraints& other) const
{
    std::vector<std::pair<int, double>> all;
    all.reserve(size() + other.size());
    for (std::size_t i = 0; i < size(); ++i) all.emplace_back(dofs[i], values[i]);
    for (std::size_t i = 0; i < other.size(); ++i) all.emplace_back(other.dofs[i], other.values[i]);
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    Constraints out;
    for (std::size_t i = 0; i < all.size(); ++i) {
        if (i > 0 && all[i].first == all[i - 1].first) throw std::logic_error("Constraints::merged: overlapping dofs");
        out.dofs.push_back(all[i].first);
        out.values.push_back(all[i].second);
    }
    return out;
}

Constraints make_boundary_constraints(const DofMap& dm, std::vector<int> dofs, std::vector<double> values)
{
    if (dofs.size() != values.size()) throw std::invalid_argument("make_boundary_constraints: size mismatch");
    std::vector<std::size_t> order(dofs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dofs[a] < dofs[b]; });
    Constraints out;
    for (std::size_t k : order) {
        const int d = dofs[k];
        if (d < 0 || d >= dm.num_dofs() || !dm.on_boundary(d)) {
            throw std::logic_error("boundary value requested on non-boundary dof " + std::to_string(d));
        }
        if (!out.dofs.empty() && out.dofs.back() == d) throw std::logic_error("duplicate constrained dof");
        out.dofs.push_back(d);
        out.values.push_back(values[k]);
    }
    return out;
}

TemperatureWalls TemperatureWalls::cavity()
{
    TemperatureWalls w;
    w.value[static_cast<std::size_t>(Side::left)] = 0.0;
    w.value[static_cast<std::size_t>(Side::right)] = 1.0;
    return w;
}

TemperatureWalls TemperatureWalls::homogeneous()
{
    TemperatureWalls w;
    for (auto& v : w.value) v = 0.0;
    return w;
}

Constraints BoundarySpec::velocity_constraints(const DofMap& vel) const
{
    std::vector<int> dofs;
    for (int d = 0; d < vel.num_dofs(); ++d) {
        if (vel.on_boundary(d)) dofs.push_back(d);
    }
    std::vector<double> values(dofs.size(), 0.0);
    return make_boundary_constraints(vel, std::move(dofs), std::move(values));
}

Constraints BoundarySpec::temperature_constraints(const DofMap& temp) const
{
    std::vector<int> dofs;
    std::vector<double> values;
    for (int d = 0; d < temp.num_dofs(); ++d) {
        const std::uint8_t sides = temp.node_sides(d);
        for (int s = 0; s < 4; ++s) {
            const auto& v = temperature.value[static_cast<std::size_t>(s)];
            if ((sides & (1u << s)) && v) {
                dofs.push_back(d);
                values.push_back(*v);
                break;
            }
        }
    }
    return make_boundary_constraints(temp, std::move(dofs), std::move(values));
}

void apply_dirichlet(LinearSystem& system, const Constraints& constraints)
{
    auto& A = system.matrix;
    auto& b = system.rhs;
    const Eigen::Index n = A.rows();
    if (A.cols() != n || b.size() != n) throw std::invalid_argument("apply_dirichlet: system is not square");

    std::vector<char> fixed(static_cast<std::size_t>(n), 0);
    Vector g = Vector::Zero(n);
    for (std::size_t i = 0; i < constraints.size(); ++i) {
        const int d = constraints.dofs[i];
        if (d < 0 || d >= n) throw std::out_of_range("apply_dirichlet: constrained dof out of range");
        fixed[static_cast<std::size_t>(d)] = 1;
        g[d] = constraints.values[i];
    }

    bool missing_diagonal = false;
    std::vector<char> has_diag(static_cast<std::size_t>(n), 0);
    for (Eigen::Index c = 0; c < A.outerSize(); ++c) {
        const bool col_fixed = fixed[static_cast<std::size_t>(c)] != 0;
        for (SparseMatrix::InnerIterator it(A, c); it; ++it) {
            const auto r = it.row();
            const bool row_fixed = fixed[static_cast<std::size_t>(r)] != 0;
            if (col_fixed && !row_fixed) b[r] -= it.value() * g[c];
            if (row_fixed || col_fixed) it.valueRef() = (r == c) ? 1.0 : 0.0;
            if (r == c) has_diag[static_cast<std::size_t>(r)] = 1;
        }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (fixed[static_cast<std::size_t>(i)] && !has_diag[static_cast<std::size_t>(i)]) missing_diagonal = true;
    }
    if (missing_diagonal) {
        for (Eigen::Index i = 0; i < n; ++i) {
            if (fixed[static_cast<std::size_t>(i)] && !has_diag[static_cast<std::size_t>(i)]) A.coeffRef(i, i) = 1.0;
        }
    }
    A.prune([](Eigen::Index r, Eigen::Index c, double v) { return v != 0.0 || r == c; });
    for (std::size_t i = 0; i < constraints.size(); ++i) b[constraints.dofs[i]] = constraints.values[i];
}

double mean_value(const Field& p)
{
    const Mesh& m = p.dofmap->mesh();
    double integral = 0.0;
    double area = 0.0;
    for (int t = 0; t < m.num_triangles(); ++t) {
        const double a = m.signed_area(t);
        integral += a * (p.values[3 * t] + p.values[3 * t + 1] + p.values[3 * t + 2]) / 3.0;
        area += a;
    }
    return integral / area;
}

Field zero_mean_pressure(const Field& p)
{
    if (p.dofmap->family() != Family::p1_disc) throw std::invalid_argument("zero_mean_pressure: needs P1disc");
    Field out = p;
    out.values.array() -= mean_value(p);
    return out;
}

}  // namespace cdapicard
