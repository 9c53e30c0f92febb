#include "cdapicard/verify.hpp"

#include "cdapicard/quadrature.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace cdapicard;

namespace {

// Forcing of the manufactured case evaluated symbolically (exact rational
// points, 20 significant digits): nu, kappa, Ri, amplitude, x, y, f1, f2, g.
constexpr double kStrongForm[][9] = {
    {0.1, 0.1, 1.0, 1.0, 0.3, 0.7, 1.4643910869435779722, -2.1787075841310516842, 1.2919479888783745292},
    {0.1, 0.1, 1.0, 1.0, 0.125, 0.5, 0.00012266635894775390625, -3.3577928345045207858, 0.75538681765889438256},
    {0.1, 0.1, 1.0, 1.0, 0.9, 0.2, -0.79727077277984830962, 1.5980573442756413768, 0.35869841042113463842},
    {0.1, 0.1, 1.0, 1.0, 0.61, 0.43, -0.62979013128219829751, 0.14628270131382723322, 1.8125171131219749682},
    {0.05, 0.2, 7.0, 1.3, 0.3, 0.7, 1.9232938248100433638, -7.9181963492160541435, 3.3590647710837737758},
    {0.05, 0.2, 7.0, 1.3, 0.125, 0.5, 0.00020730614662170410156, -7.3028348948035772410, 1.9640057259131253946},
    {0.05, 0.2, 7.0, 1.3, 0.9, 0.2, -1.0287770422729388025, 0.64551648241943206236, 0.93246658721682111558},
    {0.05, 0.2, 7.0, 1.3, 0.61, 0.43, -0.82886212732688502927, -6.9885758969063143459, 4.7125254842859683488},
};

}  // namespace

TEST(Manufactured, ForcingMatchesTheStrongForm)
{
    for (const auto& row : kStrongForm) {
        const auto mc = stream_function_case(row[0], row[1], row[2], row[3]);
        const Point p{row[4], row[5]};
        const Vec2 f = mc.f(p);
        EXPECT_NEAR(f[0], row[6], 1e-10);
        EXPECT_NEAR(f[1], row[7], 1e-10);
        EXPECT_NEAR(mc.g(p), row[8], 1e-10);
    }
}

TEST(Manufactured, ExactFieldsSatisfyTheirContracts)
{
    const auto mc = stream_function_case();
    const double h = 1e-5;
    for (double x : {0.0, 0.2, 0.55, 1.0}) {
        for (double y : {0.0, 0.35, 0.8, 1.0}) {
            const Point p{x, y};
            const bool wall = x == 0.0 || x == 1.0 || y == 0.0 || y == 1.0;
            if (wall) {
                EXPECT_NEAR(mc.u(p)[0], 0.0, 1e-15);
                EXPECT_NEAR(mc.u(p)[1], 0.0, 1e-15);
                EXPECT_NEAR(mc.T(p), 0.0, 1e-15);
            }
            const auto g = mc.grad_u(p);
            EXPECT_NEAR(g[0][0] + g[1][1], 0.0, 1e-15);
            if (!wall) {
                const double dudx = (mc.u({x + h, y})[0] - mc.u({x - h, y})[0]) / (2 * h);
                const double dvdy = (mc.u({x, y + h})[1] - mc.u({x, y - h})[1]) / (2 * h);
                const double dTdy = (mc.T({x, y + h}) - mc.T({x, y - h})) / (2 * h);
                EXPECT_NEAR(dudx, g[0][0], 1e-8);
                EXPECT_NEAR(dvdy, g[1][1], 1e-8);
                EXPECT_NEAR(dTdy, mc.grad_T(p)[1], 1e-8);
            }
        }
    }
    // cos(pi x) cos(pi y) has zero mean; a Gauss product rule integrates it to roundoff.
    const auto gl = gauss_legendre(8);
    double mean = 0.0;
    for (std::size_t i = 0; i < gl.x.size(); ++i) {
        for (std::size_t j = 0; j < gl.x.size(); ++j) mean += gl.w[i] * gl.w[j] * mc.p({gl.x[i], gl.x[j]});
    }
    EXPECT_NEAR(mean, 0.0, 1e-15);
}

TEST(OracleQuadrature, GaussLegendreExactness)
{
    for (int n : {1, 3, 6}) {
        const auto r = gauss_legendre(n);
        for (int k = 0; k <= 2 * n - 1; ++k) {
            double s = 0.0;
            for (std::size_t i = 0; i < r.x.size(); ++i) s += r.w[i] * std::pow(r.x[i], k);
            EXPECT_NEAR(s, 1.0 / (k + 1), 1e-15) << n << ' ' << k;
        }
    }
}

TEST(OracleQuadrature, CollapsedRuleIsExactToDegreeTen)
{
    const std::array<Point, 3> tri{Point{0.2, 0.1}, Point{0.9, 0.3}, Point{0.4, 0.8}};
    const auto r = collapsed_rule(tri, 6);
    double area = 0.0;
    for (double w : r.weights) area += w;
    EXPECT_NEAR(area, 0.5 * std::abs((0.9 - 0.2) * (0.8 - 0.1) - (0.4 - 0.2) * (0.3 - 0.1)), 1e-15);
    // Compare against the degree-6 rule of the library, which is exact for x^a y^b with a + b <= 6.
    const auto& q = triangle_rule_degree6();
    for (int a = 0; a <= 6; ++a) {
        for (int b = 0; a + b <= 6; ++b) {
            double s1 = 0.0, s2 = 0.0;
            for (std::size_t i = 0; i < r.points.size(); ++i) {
                s1 += r.weights[i] * std::pow(r.points[i].x, a) * std::pow(r.points[i].y, b);
            }
            for (std::size_t i = 0; i < q.size(); ++i) {
                const auto& l = q.points[i];
                const double x = l[0] * tri[0].x + l[1] * tri[1].x + l[2] * tri[2].x;
                const double y = l[0] * tri[0].y + l[1] * tri[1].y + l[2] * tri[2].y;
                s2 += q.weights[i] * area * std::pow(x, a) * std::pow(y, b);
            }
            EXPECT_NEAR(s1, s2, 1e-15);
        }
    }
}

TEST(DenseOracle, RejectsLargeMeshes)
{
    EXPECT_THROW(DenseOracle(std::make_shared<const Mesh>(cavity_mesh(8))), std::length_error);
}

TEST(DenseOracle, MatchesSparseAssembly)
{
    const auto report = oracle_suite();
    ASSERT_FALSE(report.checks.empty());
    for (const auto& c : report.checks) EXPECT_TRUE(c.pass) << c.name << " = " << c.value << " vs " << c.threshold;
}

TEST(Properties, SuitePasses)
{
    const auto report = property_suite();
    ASSERT_FALSE(report.checks.empty());
    for (const auto& c : report.checks) EXPECT_TRUE(c.pass) << c.name << " = " << c.value << " vs " << c.threshold;
}

TEST(Reports, TextAndCsvFormats)
{
    VerifyReport r;
    r.seed = 42;
    r.add("oracle", "mass", 1e-16, 1e-11);
    r.add("manufactured", "order", 1.5, 1.9, false);
    EXPECT_FALSE(r.all_passed());
    EXPECT_TRUE(r.checks[0].pass);
    std::ostringstream t, c;
    write_report_text(t, r);
    write_report_csv(c, r);
    EXPECT_NE(t.str().find("PASS"), std::string::npos);
    EXPECT_NE(t.str().find("FAIL"), std::string::npos);
    EXPECT_EQ(c.str().rfind("# seed=42\nsuite,check,value,threshold,bound,pass,margin\n", 0), 0u) << c.str();
    EXPECT_EQ(parse_suite("oracle"), Suite::oracle);
    EXPECT_THROW((void)parse_suite("everything"), std::invalid_argument);
}
