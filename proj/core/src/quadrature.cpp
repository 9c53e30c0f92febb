#include "cdapicard/quadrature.hpp"

namespace cdapicard {

namespace {

QuadratureRule make_degree6()
{
    QuadratureRule rule;
    rule.degree = 6;
    auto orbit3 = [&](double a, double w) {
        const double b = 1.0 - 2.0 * a;
        rule.points.push_back({b, a, a});
        rule.points.push_back({a, b, a});
        rule.points.push_back({a, a, b});
        for (int i = 0; i < 3; ++i) rule.weights.push_back(w);
    };
    auto orbit6 = [&](double a, double b, double w) {
        const double c = 1.0 - a - b;
        rule.points.push_back({a, b, c});
        rule.points.push_back({a, c, b});
        rule.points.push_back({b, a, c});
        rule.points.push_back({b, c, a});
        rule.points.push_back({c, a, b});
        rule.points.push_back({c, b, a});
        for (int i = 0; i < 6; ++i) rule.weights.push_back(w);
    };
    // Dunavant's degree-6 rule.
    orbit3(0.249286745170910421136, 0.116786275726379366030);
    orbit3(0.063089014491502228340, 0.050844906370206816921);
    orbit6(0.053145049844816947353, 0.310352451033784405416, 0.082851075618373575194);
    return rule;
}

}  // namespace

const QuadratureRule& triangle_rule_degree6()
{
    static const QuadratureRule rule = make_degree6();
    return rule;
}

}  // namespace cdapicard
