#include "cdapicard/nudge.hpp"

#include "cdapicard/solve.hpp"

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include <sstream>
#include <stdexcept>

using namespace cdapicard;

namespace {

std::shared_ptr<const DofMap> scalar_space(int n)
{
    return build_dofmap(std::make_shared<const Mesh>(cavity_mesh(n)), Family::p2_scalar);
}

}  // namespace

TEST(CoarseGrid, CellLookup)
{
    const CoarseGrid g{4};
    EXPECT_EQ(g.num_cells(), 16);
    EXPECT_DOUBLE_EQ(g.spacing(), 0.25);
    EXPECT_EQ(g.cell_of({0.1, 0.1}), 0);
    EXPECT_EQ(g.cell_of({0.3, 0.1}), 1);
    EXPECT_EQ(g.cell_of({0.1, 0.3}), 4);
    EXPECT_EQ(g.cell_of({0.25, 0.0}), 1);   // interior line goes right
    EXPECT_EQ(g.cell_of({1.0, 1.0}), 15);   // wall stays in the last cell
    EXPECT_DOUBLE_EQ(g.center(5).x, 0.375);
    EXPECT_DOUBLE_EQ(g.center(5).y, 0.375);
}

TEST(CoarseGrid, FromSpacing)
{
    EXPECT_EQ(CoarseGrid::from_spacing(0.125).m, 8);
    EXPECT_EQ(CoarseGrid::from_spacing(1.0 / 3.0).m, 3);
    EXPECT_THROW((void)CoarseGrid::from_spacing(0.3), std::invalid_argument);
    EXPECT_THROW((void)CoarseGrid::from_spacing(-0.5), std::invalid_argument);
}

TEST(Observation, MeansOfConstantsAndLinears)
{
    const auto s = scalar_space(8);
    const ObservationOperator op(s, CoarseGrid{4});
    EXPECT_NEAR(op.cell_areas().sum(), 1.0, 1e-14);
    const Vector ones = op.means(Vector::Ones(s->num_dofs()));
    EXPECT_LT((ones.array() - 1.0).abs().maxCoeff(), 1e-14);
    const Field lin = interpolate_scalar(s, [](Point p) { return 2.0 * p.x - p.y; });
    const Vector m = project_P0(op, lin);
    for (int c = 0; c < 16; ++c) {
        const Point x = op.grid().center(c);
        EXPECT_NEAR(m(c), 2.0 * x.x - x.y, 1e-13);
    }
}

TEST(Observation, IsAnL2Projection)
{
    const auto s = scalar_space(4);
    const ObservationOperator op(s, CoarseGrid{2});
    const Field f = interpolate_scalar(s, [](Point p) { return p.x * p.x + p.y; });
    const SparseMatrix M = assemble_mass(*s);
    // ||I_H f||^2 + ||f - I_H f||^2 = ||f||^2
    const double total = f.values.dot(M * f.values);
    const double proj = op.l2_norm_of_means(project_P0(op, f));
    const double err = op.projection_error(f);
    EXPECT_NEAR(proj * proj + err * err, total, 1e-13);
}

TEST(Observation, RejectsGridsFinerThanTheMesh)
{
    EXPECT_THROW(ObservationOperator(scalar_space(1), CoarseGrid{64}), std::invalid_argument);
    EXPECT_THROW(ObservationOperator(build_dofmap(std::make_shared<const Mesh>(cavity_mesh(2)), Family::p2_vector),
                                     CoarseGrid{2}),
                 std::invalid_argument);
}

TEST(Nudging, MatrixIsSymmetricPositiveSemidefinite)
{
    const auto s = scalar_space(4);
    const ObservationOperator op(s, CoarseGrid{2});
    const SparseMatrix N = nudging_matrix(op, 10.0);
    const Eigen::MatrixXd D(N);
    EXPECT_LT((D - D.transpose()).cwiseAbs().maxCoeff(), 1e-13);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(D);
    EXPECT_GT(es.eigenvalues().minCoeff(), -1e-11);
    // Rank equals the number of coarse cells.
    int positive = 0;
    for (int i = 0; i < es.eigenvalues().size(); ++i) positive += es.eigenvalues()(i) > 1e-10 ? 1 : 0;
    EXPECT_EQ(positive, 4);
    // mu (I_H 1, I_H 1) = mu
    const Vector one = Vector::Ones(s->num_dofs());
    EXPECT_NEAR(one.dot(N * one), 10.0, 1e-12);
    EXPECT_NEAR(one.dot(nudging_rhs(op, 10.0, Vector::Constant(4, 0.5))), 5.0, 1e-12);
    EXPECT_EQ(nudging_matrix(op, 1.0, 2).rows(), 2 * s->num_dofs());
}

TEST(Nudging, ModesAndConfigs)
{
    EXPECT_EQ(parse_nudge_mode("both"), NudgeMode::both);
    EXPECT_EQ(parse_nudge_mode("u"), NudgeMode::u_only);
    EXPECT_EQ(parse_nudge_mode("T-only"), NudgeMode::t_only);
    EXPECT_EQ(parse_nudge_mode("off"), NudgeMode::off);
    EXPECT_THROW((void)parse_nudge_mode("velocity"), std::invalid_argument);
    EXPECT_EQ(to_string(NudgeMode::t_only), "t");

    const auto u_only = NudgeConfig::make(NudgeMode::u_only, 1000.0, 1000.0);
    EXPECT_EQ(u_only.mu_u, 1000.0);
    EXPECT_EQ(u_only.mu_T, 0.0);
    EXPECT_FALSE(NudgeConfig::off().active());
    NudgeConfig bad{-1.0, 0.0, NudgeMode::both};
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    NudgeConfig inconsistent{0.0, 5.0, NudgeMode::u_only};
    EXPECT_THROW(inconsistent.validate(), std::invalid_argument);
}

TEST(Observations, NoiseShiftsNonzeroMeansByAScaledMaximum)
{
    const auto mesh = std::make_shared<const Mesh>(cavity_mesh(4));
    const Discretization disc(mesh, ProblemParams{});
    State s = disc.zero_state();
    s.u = interpolate_vector(disc.velocity_space(), [](Point p) { return Vec2{p.x * (1 - p.x) * p.y, 0.0}; });
    s.T = interpolate_scalar(disc.temperature_space(), [](Point p) { return p.x; });
    const ObservationOperator op(disc.temperature_space(), CoarseGrid{2});

    const auto clean = synthesize_observations(s, op, 0.0);
    EXPECT_EQ(clean.ux, clean.clean_ux);
    EXPECT_EQ(clean.T, clean.clean_T);

    const auto noisy = synthesize_observations(s, op, 1e-3);
    EXPECT_NEAR(noisy.delta_T, 1e-3 * clean.clean_T.cwiseAbs().maxCoeff(), 1e-16);
    const double umax = std::max(clean.clean_ux.cwiseAbs().maxCoeff(), clean.clean_uy.cwiseAbs().maxCoeff());
    EXPECT_NEAR(noisy.delta_u, 1e-3 * umax, 1e-16);
    for (int c = 0; c < 4; ++c) {
        EXPECT_NEAR(noisy.T(c) - noisy.clean_T(c), noisy.delta_T, 1e-15);
        EXPECT_NEAR(noisy.ux(c) - noisy.clean_ux(c), noisy.delta_u, 1e-15);
        EXPECT_EQ(noisy.uy(c), 0.0);  // exact zeros stay zero
    }
    EXPECT_NO_THROW(noisy.validate());

    std::ostringstream os;
    write_observations_csv(os, noisy);
    EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "cell,x_center,y_center,u_mean,v_mean,T_mean,u_noisy,v_noisy,T_noisy");
}
