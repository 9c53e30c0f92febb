#include "cdapicard/quadrature.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace cdapicard;

namespace {

double factorial(int k) { return std::tgamma(k + 1.0); }

}  // namespace

TEST(Quadrature, WeightsSumToOne)
{
    const auto& q = triangle_rule_degree6();
    EXPECT_EQ(q.size(), 12u);
    EXPECT_EQ(q.degree, 6);
    double s = 0.0;
    for (double w : q.weights) s += w;
    EXPECT_NEAR(s, 1.0, 1e-15);
    for (const auto& p : q.points) EXPECT_NEAR(p[0] + p[1] + p[2], 1.0, 1e-15);
}

// Mean of l1^a l2^b l0^c over a triangle: 2 a! b! c! / (a + b + c + 2)!.
TEST(Quadrature, ExactThroughDegreeSix)
{
    const auto& q = triangle_rule_degree6();
    for (int a = 0; a <= 6; ++a) {
        for (int b = 0; a + b <= 6; ++b) {
            for (int c = 0; a + b + c <= 6; ++c) {
                double s = 0.0;
                for (std::size_t i = 0; i < q.size(); ++i) {
                    const auto& l = q.points[i];
                    s += q.weights[i] * std::pow(l[1], a) * std::pow(l[2], b) * std::pow(l[0], c);
                }
                const double exact = 2.0 * factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 2);
                EXPECT_NEAR(s, exact, 1e-14) << a << ' ' << b << ' ' << c;
            }
        }
    }
}

TEST(Quadrature, NotExactAtDegreeEight)
{
    const auto& q = triangle_rule_degree6();
    double s = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) s += q.weights[i] * std::pow(q.points[i][1], 8);
    EXPECT_GT(std::abs(s - 2.0 * factorial(8) / factorial(10)), 1e-8);
}
