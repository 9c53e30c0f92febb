#include "cdapicard/space.hpp"

#include <Eigen/LU>
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

using namespace cdapicard;

namespace {

std::shared_ptr<const Mesh> cavity(int n) { return std::make_shared<const Mesh>(cavity_mesh(n)); }

}  // namespace

TEST(Space, DofCountsAtDeskScale)
{
    const auto mesh = cavity(32);
    EXPECT_EQ(build_dofmap(mesh, Family::p2_vector)->num_dofs(), 24834);
    EXPECT_EQ(build_dofmap(mesh, Family::p1_disc)->num_dofs(), 18432);
    EXPECT_EQ(build_dofmap(mesh, Family::p2_scalar)->num_dofs(), 12417);
}

TEST(Space, NumberingLayout)
{
    const auto mesh = cavity(2);
    const auto s = build_dofmap(mesh, Family::p2_scalar);
    const auto v = build_dofmap(mesh, Family::p2_vector);
    EXPECT_EQ(s->num_dofs(), mesh->num_vertices() + mesh->num_edges());
    EXPECT_EQ(v->num_dofs(), 2 * s->num_dofs());
    EXPECT_EQ(v->component_size(), s->num_dofs());
    for (int t = 0; t < mesh->num_triangles(); ++t) {
        const auto d = s->p2_cell_dofs(t);
        for (int i = 0; i < 3; ++i) EXPECT_EQ(d[static_cast<std::size_t>(i)], mesh->triangle(t)[static_cast<std::size_t>(i)]);
        for (int i = 0; i < 3; ++i) {
            EXPECT_EQ(d[static_cast<std::size_t>(3 + i)],
                      mesh->num_vertices() + mesh->triangle_edges(t)[static_cast<std::size_t>(i)]);
        }
    }
    // Edge nodes are midpoints; the y block repeats the x block's nodes.
    const int e0 = mesh->num_vertices();
    const auto& ed = mesh->edge(0);
    EXPECT_DOUBLE_EQ(s->node(e0).x, 0.5 * (mesh->vertex(ed[0]).x + mesh->vertex(ed[1]).x));
    EXPECT_DOUBLE_EQ(v->node(e0 + s->num_dofs()).y, s->node(e0).y);
}

TEST(Space, P2InterpolationIsExactForQuadratics)
{
    const auto mesh = cavity(3);
    const auto s = build_dofmap(mesh, Family::p2_scalar);
    auto q = [](Point p) { return 1.0 + 2.0 * p.x - p.y + 3.0 * p.x * p.y - p.x * p.x + 0.5 * p.y * p.y; };
    const Field f = interpolate_scalar(s, q);
    for (int t = 0; t < mesh->num_triangles(); ++t) {
        const auto geo = cell_geometry(*mesh, t);
        for (const auto& l : {std::array<double, 3>{0.2, 0.3, 0.5}, std::array<double, 3>{0.6, 0.1, 0.3}}) {
            const Point x = geo.map(l);
            EXPECT_NEAR(eval_p2(f, 0, t, l), q(x), 1e-13);
            const Vec2 g = eval_p2_gradient(f, 0, t, l, geo);
            EXPECT_NEAR(g[0], 2.0 + 3.0 * x.y - 2.0 * x.x, 1e-12);
            EXPECT_NEAR(g[1], -1.0 + 3.0 * x.x + x.y, 1e-12);
        }
    }
}

TEST(Space, VectorInterpolationComponents)
{
    const auto mesh = cavity(2);
    const auto v = build_dofmap(mesh, Family::p2_vector);
    const Field f = interpolate_vector(v, [](Point p) { return Vec2{p.x * p.y, 1.0 - p.x}; });
    const std::array<double, 3> l{0.25, 0.25, 0.5};
    const Point x = cell_geometry(*mesh, 5).map(l);
    EXPECT_NEAR(eval_p2(f, 0, 5, l), x.x * x.y, 1e-14);
    EXPECT_NEAR(eval_p2(f, 1, 5, l), 1.0 - x.x, 1e-14);
}

TEST(Space, VelocityConstraintsCoverTheBoundary)
{
    const auto mesh = cavity(4);
    const auto v = build_dofmap(mesh, Family::p2_vector);
    const auto c = BoundarySpec{}.velocity_constraints(*v);
    int expected = 0;
    for (int d = 0; d < v->num_dofs(); ++d) expected += v->on_boundary(d) ? 1 : 0;
    EXPECT_EQ(static_cast<int>(c.size()), expected);
    EXPECT_EQ(expected, 2 * 2 * 4 * 4);  // two components, 2n nodes per wall
    EXPECT_TRUE(std::is_sorted(c.dofs.begin(), c.dofs.end()));
    for (double val : c.values) EXPECT_EQ(val, 0.0);
}

TEST(Space, CavityTemperatureWalls)
{
    const auto mesh = cavity(4);
    const auto s = build_dofmap(mesh, Family::p2_scalar);
    const auto c = BoundarySpec{}.temperature_constraints(*s);
    for (std::size_t i = 0; i < c.size(); ++i) {
        const Point p = s->node(c.dofs[i]);
        EXPECT_TRUE(p.x == 0.0 || p.x == 1.0);
        EXPECT_EQ(c.values[i], p.x == 0.0 ? 0.0 : 1.0);
    }
    EXPECT_EQ(static_cast<int>(c.size()), 2 * (2 * 4 + 1));
}

TEST(Space, ConstraintAlgebra)
{
    const Constraints a{{1, 4}, {1.0, 2.0}};
    const Constraints b{{0, 7}, {3.0, 4.0}};
    const auto m = a.merged(b);
    EXPECT_EQ(m.dofs, (std::vector<int>{0, 1, 4, 7}));
    EXPECT_EQ(m.values, (std::vector<double>{3.0, 1.0, 2.0, 4.0}));
    EXPECT_THROW((void)a.merged(Constraints{{4}, {0.0}}), std::logic_error);
    EXPECT_EQ(a.shifted(10).dofs, (std::vector<int>{11, 14}));
    EXPECT_EQ(a.homogeneous().values, (std::vector<double>{0.0, 0.0}));
}

TEST(Space, BoundaryConstraintsRejectInteriorDofs)
{
    const auto mesh = cavity(2);
    const auto s = build_dofmap(mesh, Family::p2_scalar);
    int interior = -1;
    for (int d = 0; d < s->num_dofs() && interior < 0; ++d) {
        if (!s->on_boundary(d)) interior = d;
    }
    ASSERT_GE(interior, 0);
    EXPECT_THROW((void)make_boundary_constraints(*s, {interior}, {0.0}), std::logic_error);
}

TEST(Space, DirichletEliminationKeepsSymmetry)
{
    // 1D Laplacian on 5 nodes with u0 = 1, u4 = 3: solution is linear.
    SparseMatrix A(5, 5);
    for (int i = 0; i < 5; ++i) {
        A.insert(i, i) = 2.0;
        if (i > 0) A.insert(i, i - 1) = -1.0;
        if (i < 4) A.insert(i, i + 1) = -1.0;
    }
    LinearSystem sys{A, Vector::Zero(5)};
    apply_dirichlet(sys, Constraints{{0, 4}, {1.0, 3.0}});
    const Eigen::MatrixXd D(sys.matrix);
    EXPECT_TRUE(D.isApprox(D.transpose()));
    EXPECT_EQ(D(0, 0), 1.0);
    EXPECT_EQ(D(1, 0), 0.0);
    const Vector x = D.fullPivLu().solve(sys.rhs);
    for (int i = 0; i < 5; ++i) EXPECT_NEAR(x(i), 1.0 + 0.5 * i, 1e-14);
}

TEST(Space, ZeroMeanPressure)
{
    const auto mesh = cavity(2);
    const auto pr = build_dofmap(mesh, Family::p1_disc);
    Field p(pr, Vector::Constant(pr->num_dofs(), 2.5));
    EXPECT_NEAR(mean_value(p), 2.5, 1e-14);
    const Field q = interpolate_scalar(pr, [](Point x) { return x.x + 4.0; });
    EXPECT_NEAR(mean_value(q), 4.5, 1e-14);
    EXPECT_NEAR(mean_value(zero_mean_pressure(q)), 0.0, 1e-14);
}
