#include "cdapicard/verify.hpp"

#include "cdapicard/linear_solver.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace cdapicard {

namespace {

constexpr double kPi = std::numbers::pi;

}  // namespace

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

LineRule gauss_legendre(int n)
{
    if (n < 1) throw std::invalid_argument("gauss_legendre: need at least one point");
    LineRule r;
    r.x.resize(static_cast<std::size_t>(n));
    r.w.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        // Chebyshev-like initial guess, then Newton on P_n.
        double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0;
            double p1 = z;
            for (int k = 2; k <= n; ++k) {
                const double pk = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = pk;
            }
            if (n == 1) p0 = 1.0;
            const double pn = n == 1 ? z : p1;
            const double pnm1 = n == 1 ? 1.0 : p0;
            dp = n * (z * pn - pnm1) / (z * z - 1.0);
            const double dz = pn / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        const auto k = static_cast<std::size_t>(i);
        r.x[k] = 0.5 * (1.0 - z);
        r.w[k] = 1.0 / ((1.0 - z * z) * dp * dp);  // 2/((1-z^2) P'^2), halved for [0, 1]
    }
    return r;
}

PhysicalRule collapsed_rule(const std::array<Point, 3>& v, int npoints)
{
    const LineRule g = gauss_legendre(npoints);
    const double ax = v[1].x - v[0].x;
    const double ay = v[1].y - v[0].y;
    const double bx = v[2].x - v[0].x;
    const double by = v[2].y - v[0].y;
    const double jac = std::abs(ax * by - ay * bx);
    PhysicalRule r;
    for (std::size_t i = 0; i < g.x.size(); ++i) {
        for (std::size_t j = 0; j < g.x.size(); ++j) {
            const double s = g.x[i];
            const double t = g.x[j] * (1.0 - s);
            r.points.push_back({v[0].x + s * ax + t * bx, v[0].y + s * ay + t * by});
            r.weights.push_back(jac * (1.0 - s) * g.w[i] * g.w[j]);
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// Dense oracle
// ---------------------------------------------------------------------------

namespace {

struct Scaling {
    double cx, cy, s;
};

Scaling cell_scaling(const std::array<Point, 3>& v)
{
    const double cx = (v[0].x + v[1].x + v[2].x) / 3.0;
    const double cy = (v[0].y + v[1].y + v[2].y) / 3.0;
    double s = 0.0;
    for (int i = 0; i < 3; ++i) {
        for (int j = i + 1; j < 3; ++j) s = std::max(s, std::hypot(v[i].x - v[j].x, v[i].y - v[j].y));
    }
    return {cx, cy, s};
}

std::array<double, 6> monomials(const Scaling& sc, Point p)
{
    const double X = (p.x - sc.cx) / sc.s;
    const double Y = (p.y - sc.cy) / sc.s;
    return {1.0, X, Y, X * X, X * Y, Y * Y};
}

std::array<Vec2, 6> monomial_gradients(const Scaling& sc, Point p)
{
    const double X = (p.x - sc.cx) / sc.s;
    const double Y = (p.y - sc.cy) / sc.s;
    const double i = 1.0 / sc.s;
    return {Vec2{0.0, 0.0}, Vec2{i, 0.0}, Vec2{0.0, i}, Vec2{2.0 * X * i, 0.0}, Vec2{Y * i, X * i}, Vec2{0.0, 2.0 * Y * i}};
}

bool close(Point a, Point b) { return std::abs(a.x - b.x) < 1e-12 && std::abs(a.y - b.y) < 1e-12; }

}  // namespace

DenseOracle::DenseOracle(std::shared_ptr<const Mesh> mesh) : mesh_(std::move(mesh))
{
    if (!mesh_) throw std::invalid_argument("DenseOracle: null mesh");
    const auto numbering = build_dofmap(mesh_, Family::p2_scalar);
    if (2 * numbering->num_dofs() > kMaxDofs) {
        throw std::length_error("DenseOracle: vector P2 space has " + std::to_string(2 * numbering->num_dofs()) +
                                " dofs, limit is " + std::to_string(kMaxDofs));
    }
    nodes_.resize(static_cast<std::size_t>(numbering->num_dofs()));
    for (int d = 0; d < numbering->num_dofs(); ++d) nodes_[static_cast<std::size_t>(d)] = numbering->node(d);

    auto lookup = [&](Point p) {
        for (std::size_t d = 0; d < nodes_.size(); ++d) {
            if (close(nodes_[d], p)) return static_cast<int>(d);
        }
        throw std::logic_error("DenseOracle: mesh node has no dof");
    };

    for (int t = 0; t < mesh_->num_triangles(); ++t) {
        const auto& tri = mesh_->triangle(t);
        const std::array<Point, 3> v{mesh_->vertex(tri[0]), mesh_->vertex(tri[1]), mesh_->vertex(tri[2])};
        // Own local order: vertices, then midpoints of (01), (12), (20).
        const std::array<Point, 6> local{v[0], v[1], v[2],
                                         Point{0.5 * (v[0].x + v[1].x), 0.5 * (v[0].y + v[1].y)},
                                         Point{0.5 * (v[1].x + v[2].x), 0.5 * (v[1].y + v[2].y)},
                                         Point{0.5 * (v[2].x + v[0].x), 0.5 * (v[2].y + v[0].y)}};
        Cell c;
        const Scaling sc = cell_scaling(v);
        c.cx = sc.cx;
        c.cy = sc.cy;
        c.scale = sc.s;
        Eigen::Matrix<double, 6, 6> V;
        for (int i = 0; i < 6; ++i) {
            c.dofs[static_cast<std::size_t>(i)] = lookup(local[static_cast<std::size_t>(i)]);
            const auto m = monomials(sc, local[static_cast<std::size_t>(i)]);
            for (int k = 0; k < 6; ++k) V(i, k) = m[static_cast<std::size_t>(k)];
        }
        c.coef = V.inverse();
        Eigen::Matrix3d V1;
        for (int i = 0; i < 3; ++i) {
            const auto m = monomials(sc, v[static_cast<std::size_t>(i)]);
            V1(i, 0) = m[0];
            V1(i, 1) = m[1];
            V1(i, 2) = m[2];
        }
        c.p1coef = V1.inverse();
        c.rule = collapsed_rule(v, 6);
        cells_.push_back(std::move(c));
    }
}

std::array<double, 6> DenseOracle::values(const Cell& c, Point p) const
{
    const Scaling sc{c.cx, c.cy, c.scale};
    const auto m = monomials(sc, p);
    std::array<double, 6> out{};
    for (int j = 0; j < 6; ++j) {
        double s = 0.0;
        for (int k = 0; k < 6; ++k) s += c.coef(k, j) * m[static_cast<std::size_t>(k)];
        out[static_cast<std::size_t>(j)] = s;
    }
    return out;
}

std::array<Vec2, 6> DenseOracle::gradients(const Cell& c, Point p) const
{
    const Scaling sc{c.cx, c.cy, c.scale};
    const auto g = monomial_gradients(sc, p);
    std::array<Vec2, 6> out{};
    for (int j = 0; j < 6; ++j) {
        Vec2 s{0.0, 0.0};
        for (int k = 0; k < 6; ++k) {
            s[0] += c.coef(k, j) * g[static_cast<std::size_t>(k)][0];
            s[1] += c.coef(k, j) * g[static_cast<std::size_t>(k)][1];
        }
        out[static_cast<std::size_t>(j)] = s;
    }
    return out;
}

std::array<double, 3> DenseOracle::p1_values(const Cell& c, Point p) const
{
    const Scaling sc{c.cx, c.cy, c.scale};
    const auto m = monomials(sc, p);
    std::array<double, 3> out{};
    for (int j = 0; j < 3; ++j) out[static_cast<std::size_t>(j)] = c.p1coef(0, j) * m[0] + c.p1coef(1, j) * m[1] + c.p1coef(2, j) * m[2];
    return out;
}

DenseMatrix DenseOracle::diffusion(double coeff, int components) const
{
    const int n = scalar_dofs();
    DenseMatrix A = DenseMatrix::Zero(components * n, components * n);
    for (const auto& c : cells_) {
        for (std::size_t q = 0; q < c.rule.points.size(); ++q) {
            const auto g = gradients(c, c.rule.points[q]);
            const double w = coeff * c.rule.weights[q];
            for (int i = 0; i < 6; ++i) {
                for (int j = 0; j < 6; ++j) {
                    const double v = w * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                    for (int k = 0; k < components; ++k) A(k * n + c.dofs[i], k * n + c.dofs[j]) += v;
                }
            }
        }
    }
    return A;
}

DenseMatrix DenseOracle::mass(int components) const
{
    const int n = scalar_dofs();
    DenseMatrix A = DenseMatrix::Zero(components * n, components * n);
    for (const auto& c : cells_) {
        for (std::size_t q = 0; q < c.rule.points.size(); ++q) {
            const auto phi = values(c, c.rule.points[q]);
            for (int i = 0; i < 6; ++i) {
                for (int j = 0; j < 6; ++j) {
                    const double v = c.rule.weights[q] * phi[i] * phi[j];
                    for (int k = 0; k < components; ++k) A(k * n + c.dofs[i], k * n + c.dofs[j]) += v;
                }
            }
        }
    }
    return A;
}

DenseMatrix DenseOracle::convection(const Vector& wind, int components) const
{
    const int n = scalar_dofs();
    if (wind.size() != 2 * n) throw std::invalid_argument("DenseOracle::convection: wind size mismatch");
    DenseMatrix A = DenseMatrix::Zero(components * n, components * n);
    for (const auto& c : cells_) {
        for (std::size_t q = 0; q < c.rule.points.size(); ++q) {
            const auto phi = values(c, c.rule.points[q]);
            const auto g = gradients(c, c.rule.points[q]);
            double w0 = 0.0, w1 = 0.0, div = 0.0;
            for (int a = 0; a < 6; ++a) {
                const double wx = wind[c.dofs[a]];
                const double wy = wind[n + c.dofs[a]];
                w0 += wx * phi[a];
                w1 += wy * phi[a];
                div += wx * g[a][0] + wy * g[a][1];
            }
            for (int i = 0; i < 6; ++i) {
                for (int j = 0; j < 6; ++j) {
                    const double v =
                        c.rule.weights[q] * ((w0 * g[j][0] + w1 * g[j][1]) * phi[i] + 0.5 * div * phi[j] * phi[i]);
                    for (int k = 0; k < components; ++k) A(k * n + c.dofs[i], k * n + c.dofs[j]) += v;
                }
            }
        }
    }
    return A;
}

DenseMatrix DenseOracle::divergence() const
{
    const int n = scalar_dofs();
    DenseMatrix B = DenseMatrix::Zero(pressure_dofs(), 2 * n);
    for (std::size_t t = 0; t < cells_.size(); ++t) {
        const auto& c = cells_[t];
        for (std::size_t q = 0; q < c.rule.points.size(); ++q) {
            const auto g = gradients(c, c.rule.points[q]);
            const auto psi = p1_values(c, c.rule.points[q]);
            for (int k = 0; k < 3; ++k) {
                const int row = 3 * static_cast<int>(t) + k;
                for (int j = 0; j < 6; ++j) {
                    B(row, c.dofs[j]) += c.rule.weights[q] * psi[k] * g[j][0];
                    B(row, n + c.dofs[j]) += c.rule.weights[q] * psi[k] * g[j][1];
                }
            }
        }
    }
    return B;
}

DenseMatrix DenseOracle::buoyancy(double ri) const
{
    const int n = scalar_dofs();
    DenseMatrix A = DenseMatrix::Zero(2 * n, n);
    A.bottomRows(n) = ri * mass(1);
    return A;
}

DenseMatrix DenseOracle::graddiv(double gamma) const
{
    const int n = scalar_dofs();
    DenseMatrix A = DenseMatrix::Zero(2 * n, 2 * n);
    for (const auto& c : cells_) {
        for (std::size_t q = 0; q < c.rule.points.size(); ++q) {
            const auto g = gradients(c, c.rule.points[q]);
            const double w = gamma * c.rule.weights[q];
            for (int ci = 0; ci < 2; ++ci) {
                for (int i = 0; i < 6; ++i) {
                    for (int cj = 0; cj < 2; ++cj) {
                        for (int j = 0; j < 6; ++j) A(ci * n + c.dofs[i], cj * n + c.dofs[j]) += w * g[i][ci] * g[j][cj];
                    }
                }
            }
        }
    }
    return A;
}

DenseMatrix DenseOracle::convection_linearized(const Vector& u) const
{
    // Column (c, b): the map delta_u = phi_b e_c -> b(delta_u, u, phi_a e_d).
    const int n = scalar_dofs();
    if (u.size() != 2 * n) throw std::invalid_argument("DenseOracle::convection_linearized: size mismatch");
    DenseMatrix A = DenseMatrix::Zero(2 * n, 2 * n);
    for (const auto& c : cells_) {
        for (std::size_t q = 0; q < c.rule.points.size(); ++q) {
            const auto phi = values(c, c.rule.points[q]);
            const auto g = gradients(c, c.rule.points[q]);
            double uv[2] = {0.0, 0.0};
            double gu[2][2] = {{0.0, 0.0}, {0.0, 0.0}};  // gu[d][c] = d_c u_d
            for (int a = 0; a < 6; ++a) {
                for (int d = 0; d < 2; ++d) {
                    const double coeff = u[d * n + c.dofs[a]];
                    uv[d] += coeff * phi[a];
                    gu[d][0] += coeff * g[a][0];
                    gu[d][1] += coeff * g[a][1];
                }
            }
            const double w = c.rule.weights[q];
            for (int d = 0; d < 2; ++d) {
                for (int a = 0; a < 6; ++a) {
                    for (int cc = 0; cc < 2; ++cc) {
                        for (int b = 0; b < 6; ++b) {
                            A(d * n + c.dofs[a], cc * n + c.dofs[b]) +=
                                w * phi[a] * (phi[b] * gu[d][cc] + 0.5 * g[b][cc] * uv[d]);
                        }
                    }
                }
            }
        }
    }
    return A;
}

DenseMatrix DenseOracle::transport_linearized(const Vector& T) const
{
    const int n = scalar_dofs();
    if (T.size() != n) throw std::invalid_argument("DenseOracle::transport_linearized: size mismatch");
    DenseMatrix A = DenseMatrix::Zero(n, 2 * n);
    for (const auto& c : cells_) {
        for (std::size_t q = 0; q < c.rule.points.size(); ++q) {
            const auto phi = values(c, c.rule.points[q]);
            const auto g = gradients(c, c.rule.points[q]);
            double tv = 0.0;
            double gt[2] = {0.0, 0.0};
            for (int a = 0; a < 6; ++a) {
                tv += T[c.dofs[a]] * phi[a];
                gt[0] += T[c.dofs[a]] * g[a][0];
                gt[1] += T[c.dofs[a]] * g[a][1];
            }
            const double w = c.rule.weights[q];
            for (int a = 0; a < 6; ++a) {
                for (int cc = 0; cc < 2; ++cc) {
                    for (int b = 0; b < 6; ++b) {
                        A(c.dofs[a], cc * n + c.dofs[b]) += w * phi[a] * (phi[b] * gt[cc] + 0.5 * g[b][cc] * tv);
                    }
                }
            }
        }
    }
    return A;
}

DenseMatrix DenseOracle::cell_means(const CoarseGrid& grid) const
{
    const int n = scalar_dofs();
    DenseMatrix M = DenseMatrix::Zero(grid.num_cells(), n);
    const double cell_area = grid.spacing() * grid.spacing();
    for (std::size_t t = 0; t < cells_.size(); ++t) {
        const auto& c = cells_[t];
        const int cell = grid.cell_of(mesh_->centroid(static_cast<int>(t)));
        for (std::size_t q = 0; q < c.rule.points.size(); ++q) {
            if (grid.cell_of(c.rule.points[q]) != cell) {
                throw std::invalid_argument("DenseOracle::cell_means: coarse grid does not align with the mesh");
            }
            const auto phi = values(c, c.rule.points[q]);
            for (int j = 0; j < 6; ++j) M(cell, c.dofs[j]) += c.rule.weights[q] * phi[j] / cell_area;
        }
    }
    return M;
}

DenseMatrix DenseOracle::nudging(const CoarseGrid& grid, double mu, int components) const
{
    const int n = scalar_dofs();
    const DenseMatrix M = cell_means(grid);
    const double cell_area = grid.spacing() * grid.spacing();
    const DenseMatrix S = mu * cell_area * M.transpose() * M;
    DenseMatrix A = DenseMatrix::Zero(components * n, components * n);
    for (int k = 0; k < components; ++k) A.block(k * n, k * n, n, n) = S;
    return A;
}

Vector DenseOracle::load_scalar(const std::function<double(Point)>& f) const
{
    Vector b = Vector::Zero(scalar_dofs());
    if (!f) return b;
    for (const auto& c : cells_) {
        for (std::size_t q = 0; q < c.rule.points.size(); ++q) {
            const auto phi = values(c, c.rule.points[q]);
            const double fv = f(c.rule.points[q]);
            for (int i = 0; i < 6; ++i) b[c.dofs[i]] += c.rule.weights[q] * fv * phi[i];
        }
    }
    return b;
}

Vector DenseOracle::load_vector(const std::function<Vec2(Point)>& f) const
{
    const int n = scalar_dofs();
    Vector b = Vector::Zero(2 * n);
    if (!f) return b;
    for (const auto& c : cells_) {
        for (std::size_t q = 0; q < c.rule.points.size(); ++q) {
            const auto phi = values(c, c.rule.points[q]);
            const Vec2 fv = f(c.rule.points[q]);
            for (int i = 0; i < 6; ++i) {
                b[c.dofs[i]] += c.rule.weights[q] * fv[0] * phi[i];
                b[n + c.dofs[i]] += c.rule.weights[q] * fv[1] * phi[i];
            }
        }
    }
    return b;
}

namespace {

/// Dirichlet value for a temperature node, or nullopt. Corners take the first
/// Dirichlet wall in the order left, right, bottom, top.
std::optional<double> wall_temperature(const TemperatureWalls& walls, Point p)
{
    constexpr double tol = 1e-12;
    const bool on[4] = {p.x < tol, p.x > 1.0 - tol, p.y < tol, p.y > 1.0 - tol};
    for (int s = 0; s < 4; ++s) {
        if (on[s] && walls.value[static_cast<std::size_t>(s)]) return walls.value[static_cast<std::size_t>(s)];
    }
    return std::nullopt;
}

bool on_wall(Point p)
{
    constexpr double tol = 1e-12;
    return p.x < tol || p.x > 1.0 - tol || p.y < tol || p.y > 1.0 - tol;
}

}  // namespace

State DenseOracle::picard_step(const Discretization& disc, const State& cur, const NudgeConfig& nudge,
                               const Assimilation* assim) const
{
    const int n = scalar_dofs();
    const int nv = 2 * n;
    const int np = pressure_dofs();
    const int total = n + nv + np + 1;
    if (total > kMaxDofs) throw std::length_error("DenseOracle::picard_step: system exceeds the size guard");
    const auto& prm = disc.params();
    const Vector& w = cur.u.values;

    DenseMatrix K(total, total);
    K.setZero();
    Vector rhs = Vector::Zero(total);
    const int oT = 0, oU = n, oP = n + nv, oL = n + nv + np;

    K.block(oT, oT, n, n) = diffusion(prm.kappa, 1) + convection(w, 1);
    rhs.segment(oT, n) = load_scalar(prm.g);
    K.block(oU, oU, nv, nv) = diffusion(prm.nu, 2) + convection(w, 2);
    if (prm.graddiv > 0.0) K.block(oU, oU, nv, nv) += graddiv(prm.graddiv);
    K.block(oU, oT, nv, n) = -buoyancy(prm.ri);
    const DenseMatrix B = divergence();
    K.block(oU, oP, nv, np) = -B.transpose();
    K.block(oP, oU, np, nv) = -B;
    rhs.segment(oU, nv) = load_vector(prm.f);
    // Mean-zero pressure through a multiplier: weights are the integrals of the P1 nodal basis.
    for (int t = 0; t < mesh_->num_triangles(); ++t) {
        for (int k = 0; k < 3; ++k) {
            const double a = mesh_->signed_area(t) / 3.0;
            K(oP + 3 * t + k, oL) = a;
            K(oL, oP + 3 * t + k) = a;
        }
    }

    if (nudge.active()) {
        if (!assim || !assim->op) throw std::invalid_argument("DenseOracle::picard_step: nudging without data");
        const CoarseGrid& grid = assim->op->grid();
        const DenseMatrix M = cell_means(grid);
        const double area = grid.spacing() * grid.spacing();
        if (nudge.mu_T > 0.0) {
            K.block(oT, oT, n, n) += nudging(grid, nudge.mu_T, 1);
            rhs.segment(oT, n) += nudge.mu_T * area * M.transpose() * assim->data.T;
        }
        if (nudge.mu_u > 0.0) {
            K.block(oU, oU, nv, nv) += nudging(grid, nudge.mu_u, 2);
            rhs.segment(oU, n) += nudge.mu_u * area * M.transpose() * assim->data.ux;
            rhs.segment(oU + n, n) += nudge.mu_u * area * M.transpose() * assim->data.uy;
        }
    }

    // Row replacement for Dirichlet nodes.
    auto fix = [&](int row, double value) {
        K.row(row).setZero();
        K(row, row) = 1.0;
        rhs[row] = value;
    };
    for (int d = 0; d < n; ++d) {
        const Point p = nodes_[static_cast<std::size_t>(d)];
        if (const auto tv = wall_temperature(prm.bcs.temperature, p)) fix(oT + d, *tv);
        if (on_wall(p)) {
            fix(oU + d, 0.0);
            fix(oU + n + d, 0.0);
        }
    }

    const Vector x = K.fullPivLu().solve(rhs);
    State out;
    out.T = Field(disc.temperature_space(), x.segment(oT, n));
    out.u = Field(disc.velocity_space(), x.segment(oU, nv));
    out.p = Field(disc.pressure_space(), x.segment(oP, np));
    return out;
}

double scaled_max_difference(const DenseMatrix& a, const DenseMatrix& b)
{
    if (a.rows() != b.rows() || a.cols() != b.cols()) return std::numeric_limits<double>::infinity();
    const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
    return (a - b).cwiseAbs().maxCoeff() / scale;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

bool VerifyReport::all_passed() const
{
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
}

void VerifyReport::add(std::string suite, std::string name, double value, double threshold, bool upper_bound,
                       std::string detail)
{
    CheckResult c{std::move(suite), std::move(name), value, threshold, upper_bound, false, std::move(detail)};
    c.pass = upper_bound ? value <= threshold : value >= threshold;
    checks.push_back(std::move(c));
}

void VerifyReport::append(const VerifyReport& other)
{
    checks.insert(checks.end(), other.checks.begin(), other.checks.end());
}

void write_report_text(std::ostream& os, const VerifyReport& r)
{
    os << "verification report, seed = " << r.seed << '\n';
    for (const auto& c : r.checks) {
        os << (c.pass ? "PASS " : "FAIL ") << c.suite << '/' << c.name << ": " << std::scientific
           << std::setprecision(3) << c.value << (c.upper_bound ? " <= " : " >= ") << c.threshold;
        if (!c.detail.empty()) os << "  (" << c.detail << ')';
        os << std::defaultfloat << '\n';
    }
    const auto failed = std::count_if(r.checks.begin(), r.checks.end(), [](const CheckResult& c) { return !c.pass; });
    os << (failed == 0 ? "all checks passed" : std::to_string(failed) + " check(s) failed") << '\n';
}

void write_report_csv(std::ostream& os, const VerifyReport& r)
{
    os << "# seed=" << r.seed << '\n';
    os << "suite,check,value,threshold,bound,pass,margin\n";
    for (const auto& c : r.checks) {
        const double margin = c.upper_bound ? c.threshold - c.value : c.value - c.threshold;
        os << c.suite << ',' << c.name << ',' << std::setprecision(10) << c.value << ',' << c.threshold << ','
           << (c.upper_bound ? "upper" : "lower") << ',' << (c.pass ? "true" : "false") << ',' << margin << '\n';
    }
}

// ---------------------------------------------------------------------------
// Manufactured solutions
// ---------------------------------------------------------------------------

ProblemParams ManufacturedCase::params() const
{
    ProblemParams p;
    p.nu = nu;
    p.kappa = kappa;
    p.ri = ri;
    p.f = f;
    p.g = g;
    p.bcs.temperature = TemperatureWalls::homogeneous();
    return p;
}

ManufacturedCase stream_function_case(double nu, double kappa, double ri, double a)
{
    // psi = a X(x) X(y) with X(s) = s^2 (1 - s)^2.
    struct Q {
        static double X(double s) { return s * s * (1 - s) * (1 - s); }
        static double X1(double s) { return 2 * s * (1 - s) * (1 - 2 * s); }
        static double X2(double s) { return 2 * (1 - 6 * s + 6 * s * s); }
        static double X3(double s) { return 12 * (2 * s - 1); }
    };
    ManufacturedCase mc;
    mc.nu = nu;
    mc.kappa = kappa;
    mc.ri = ri;
    mc.amplitude = a;
    mc.u = [a](Point p) { return Vec2{a * Q::X(p.x) * Q::X1(p.y), -a * Q::X1(p.x) * Q::X(p.y)}; };
    mc.grad_u = [a](Point p) {
        return std::array<Vec2, 2>{Vec2{a * Q::X1(p.x) * Q::X1(p.y), a * Q::X(p.x) * Q::X2(p.y)},
                                   Vec2{-a * Q::X2(p.x) * Q::X(p.y), -a * Q::X1(p.x) * Q::X1(p.y)}};
    };
    mc.p = [a](Point p) { return a * std::cos(kPi * p.x) * std::cos(kPi * p.y); };
    mc.T = [a](Point p) { return a * std::sin(kPi * p.x) * std::sin(kPi * p.y); };
    mc.grad_T = [a](Point p) {
        return Vec2{a * kPi * std::cos(kPi * p.x) * std::sin(kPi * p.y), a * kPi * std::sin(kPi * p.x) * std::cos(kPi * p.y)};
    };
    auto u = mc.u;
    auto gu = mc.grad_u;
    auto T = mc.T;
    auto gT = mc.grad_T;
    mc.f = [=](Point p) {
        const Vec2 uv = u(p);
        const auto g = gu(p);
        const double lap0 = a * (Q::X2(p.x) * Q::X1(p.y) + Q::X(p.x) * Q::X3(p.y));
        const double lap1 = -a * (Q::X3(p.x) * Q::X(p.y) + Q::X1(p.x) * Q::X2(p.y));
        const double px = -a * kPi * std::sin(kPi * p.x) * std::cos(kPi * p.y);
        const double py = -a * kPi * std::cos(kPi * p.x) * std::sin(kPi * p.y);
        return Vec2{uv[0] * g[0][0] + uv[1] * g[0][1] + px - nu * lap0,
                    uv[0] * g[1][0] + uv[1] * g[1][1] + py - nu * lap1 - ri * T(p)};
    };
    mc.g = [=](Point p) {
        const Vec2 uv = u(p);
        const Vec2 g = gT(p);
        return uv[0] * g[0] + uv[1] * g[1] + kappa * 2.0 * kPi * kPi * T(p);
    };
    return mc;
}

ConvergenceStudy manufactured_convergence(const ManufacturedCase& mc, const std::vector<int>& ns)
{
    if (ns.size() < 3) throw std::invalid_argument("manufactured_convergence: need at least 3 mesh levels");
    ConvergenceStudy study;
    for (int n : ns) {
        auto mesh = std::make_shared<const Mesh>(cavity_mesh(n));
        const Discretization disc(mesh, mc.params());
        SolverConfig cfg;
        cfg.tol_residual = 1e-11;
        cfg.hybrid = true;
        cfg.max_iter = 100;
        const auto res = solve_nonlinear(disc, initial_guess(disc), cfg);
        ManufacturedLevel lvl;
        lvl.n = n;
        lvl.h = mesh->max_diameter();
        lvl.iterations = res.trace.iterations();
        lvl.converged = res.trace.status == Status::converged;
        if (!lvl.converged) {
            throw std::runtime_error("manufactured_convergence: nonlinear solve did not converge on n = " +
                                     std::to_string(n) + " (" + res.trace.message + ")");
        }
        double eu = 0.0, eT = 0.0, ep = 0.0;
        for (int t = 0; t < mesh->num_triangles(); ++t) {
            const auto geo = cell_geometry(*mesh, t);
            const auto rule = collapsed_rule(geo.vertices, 6);
            for (std::size_t q = 0; q < rule.points.size(); ++q) {
                const Point x = rule.points[q];
                const auto lam = barycentric(*mesh, t, x);
                const auto gex = mc.grad_u(x);
                for (int c = 0; c < 2; ++c) {
                    const Vec2 gh = eval_p2_gradient(res.state.u, c, t, lam, geo);
                    eu += rule.weights[q] * (std::pow(gh[0] - gex[c][0], 2) + std::pow(gh[1] - gex[c][1], 2));
                }
                const Vec2 gTh = eval_p2_gradient(res.state.T, 0, t, lam, geo);
                const Vec2 gTe = mc.grad_T(x);
                eT += rule.weights[q] * (std::pow(gTh[0] - gTe[0], 2) + std::pow(gTh[1] - gTe[1], 2));
                ep += rule.weights[q] * std::pow(eval_p1disc(res.state.p, t, lam) - mc.p(x), 2);
            }
        }
        lvl.err_u_h1 = std::sqrt(eu);
        lvl.err_T_h1 = std::sqrt(eT);
        lvl.err_p_l2 = std::sqrt(ep);
        study.levels.push_back(lvl);
    }
    auto order = [](double e0, double e1, double h0, double h1) { return std::log(e0 / e1) / std::log(h0 / h1); };
    for (std::size_t i = 1; i < study.levels.size(); ++i) {
        const auto& a = study.levels[i - 1];
        const auto& b = study.levels[i];
        study.order_u.push_back(order(a.err_u_h1, b.err_u_h1, a.h, b.h));
        study.order_T.push_back(order(a.err_T_h1, b.err_T_h1, a.h, b.h));
        study.order_p.push_back(order(a.err_p_l2, b.err_p_l2, a.h, b.h));
    }
    return study;
}

// ---------------------------------------------------------------------------
// Suites
// ---------------------------------------------------------------------------

namespace {

using Rng = std::mt19937_64;

Vector random_vector(Rng& rng, Eigen::Index n)
{
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = d(rng);
    return v;
}

State random_state(const Discretization& disc, Rng& rng)
{
    State s = disc.zero_state();
    s.u.values = random_vector(rng, s.u.values.size());
    s.p.values = random_vector(rng, s.p.values.size());
    s.T.values = random_vector(rng, s.T.values.size());
    return s;
}

double max_field_difference(const State& a, const State& b)
{
    auto rel = [](const Vector& x, const Vector& y) {
        return (x - y).cwiseAbs().maxCoeff() / std::max(1.0, y.cwiseAbs().maxCoeff());
    };
    const Field pa = zero_mean_pressure(a.p);
    const Field pb = zero_mean_pressure(b.p);
    return std::max({rel(a.u.values, b.u.values), rel(pa.values, pb.values), rel(a.T.values, b.T.values)});
}

Discretization cavity_discretization(int n, double ri)
{
    ProblemParams p;
    p.ri = ri;
    return Discretization(std::make_shared<const Mesh>(cavity_mesh(n)), p);
}

}  // namespace

VerifyReport property_suite(std::uint64_t seed)
{
    VerifyReport r;
    r.seed = seed;
    Rng rng(seed);
    const std::string S = "properties";

    // Skew-symmetry of the convection operator for test functions vanishing on the wall.
    {
        const auto mesh = std::make_shared<const Mesh>(cavity_mesh(4));
        const auto vel = build_dofmap(mesh, Family::p2_vector);
        const auto temp = build_dofmap(mesh, Family::p2_scalar);
        double worst = 0.0;
        for (int draw = 0; draw < 100; ++draw) {
            const auto& space = (draw % 2 == 0) ? vel : temp;
            Field w(vel, random_vector(rng, vel->num_dofs()));
            Vector v = random_vector(rng, space->num_dofs());
            for (int d = 0; d < space->num_dofs(); ++d) {
                if (space->on_boundary(d)) v[d] = 0.0;
            }
            const SparseMatrix C = assemble_convection(*space, w);
            const SparseMatrix Cabs = C.cwiseAbs();
            const double scale = v.cwiseAbs().dot(Cabs * v.cwiseAbs());
            worst = std::max(worst, std::abs(v.dot(C * v)) / scale);
        }
        r.add(S, "convection_skew_symmetry", worst, 1e-11, true, "max |v^T C(w) v| / (|v|^T |C| |v|) over 100 draws");
    }

    // Stability and approximation of the coarse-mean projection.
    {
        const auto mesh = std::make_shared<const Mesh>(cavity_mesh(8));
        const auto temp = build_dofmap(mesh, Family::p2_scalar);
        std::vector<std::shared_ptr<ObservationOperator>> ops;
        for (int m : {1, 2, 4, 8}) ops.push_back(std::make_shared<ObservationOperator>(temp, CoarseGrid{m}));
        double worst = 0.0;
        std::uniform_int_distribution<int> pick(0, 3);
        for (int draw = 0; draw < 100; ++draw) {
            const auto& op = *ops[static_cast<std::size_t>(pick(rng))];
            Field v(temp, random_vector(rng, temp->num_dofs()));
            worst = std::max(worst, op.l2_norm_of_means(project_P0(op, v, 0)) / l2_norm(v));
        }
        r.add(S, "projection_stability", worst, 1.0 + 1e-12, true, "max ||I_H v|| / ||v|| over 100 draws");

        const auto fine = std::make_shared<const Mesh>(cavity_mesh(32));
        const auto fspace = build_dofmap(fine, Family::p2_scalar);
        const Field smooth = interpolate_scalar(fspace, [](Point p) {
            return std::sin(2.0 * kPi * p.x) * std::cos(kPi * p.y) + p.x * p.y;
        });
        std::vector<double> lh, le;
        for (int m : {4, 8, 16, 32}) {
            const ObservationOperator op(fspace, CoarseGrid{m});
            lh.push_back(std::log(1.0 / m));
            le.push_back(std::log(op.projection_error(smooth, 0)));
        }
        const double mh = std::accumulate(lh.begin(), lh.end(), 0.0) / static_cast<double>(lh.size());
        const double me = std::accumulate(le.begin(), le.end(), 0.0) / static_cast<double>(le.size());
        double sxy = 0.0, sxx = 0.0;
        for (std::size_t i = 0; i < lh.size(); ++i) {
            sxy += (lh[i] - mh) * (le[i] - me);
            sxx += (lh[i] - mh) * (lh[i] - mh);
        }
        r.add(S, "projection_approximation_order", sxy / sxx, 0.9, false, "least-squares slope over H = 1/4..1/32");
    }

    // Pointwise divergence-free discrete velocity on the heated cavity.
    {
        const Discretization disc = cavity_discretization(8, 100.0);
        SolverConfig cfg;
        cfg.hybrid = true;
        const auto res = solve_nonlinear(disc, initial_guess(disc), cfg);
        r.add(S, "cavity_divergence_l2", divergence_l2(res.state.u), 1e-10, true,
              "Ra=1e4, n=8, status " + to_string(res.trace.status));
        r.add(S, "cavity_divergence_max_cell", max_cell_divergence(res.state.u), 1e-10);
    }

    // Newton Jacobian against central differences of the residual.
    {
        ProblemParams p;
        p.ri = 100.0;
        p.graddiv = 0.3;
        p.g = [](Point x) { return std::sin(kPi * x.x) * x.y; };
        const Discretization disc(std::make_shared<const Mesh>(cavity_mesh(4)), p);
        double worst = 0.0;
        for (int draw = 0; draw < 5; ++draw) {
            const State s = random_state(disc, rng);
            State d = random_state(disc, rng);
            const SparseMatrix J = boussinesq_jacobian(disc, s);
            Vector dx(J.cols());
            dx << d.u.values, d.p.values, d.T.values;
            constexpr double eps = 1e-4;
            State sp = s, sm = s;
            sp.u.values += eps * d.u.values;
            sp.p.values += eps * d.p.values;
            sp.T.values += eps * d.T.values;
            sm.u.values -= eps * d.u.values;
            sm.p.values -= eps * d.p.values;
            sm.T.values -= eps * d.T.values;
            const Vector fd = (boussinesq_residual(disc, sp) - boussinesq_residual(disc, sm)) / (2.0 * eps);
            const Vector jd = J * dx;
            worst = std::max(worst, (jd - fd).norm() / jd.norm());
        }
        r.add(S, "jacobian_vs_finite_differences", worst, 1e-6, true, "relative error, 5 random states");
    }

    // mu = 0 nudging reproduces plain Picard.
    {
        const Discretization disc = cavity_discretization(8, 100.0);
        Assimilation a;
        a.op = std::make_shared<const ObservationOperator>(disc.temperature_space(), CoarseGrid{4});
        a.data = synthesize_observations(random_state(disc, rng), *a.op, 0.0);
        SolverConfig plain;
        plain.max_iter = 5;
        SolverConfig zero = plain;
        zero.nudge = NudgeConfig::make(NudgeMode::both, 0.0, 0.0);
        const State init = initial_guess(disc);
        const auto r0 = solve_nonlinear(disc, init, plain);
        const auto r1 = solve_nonlinear(disc, init, zero, &a);
        double diff = max_field_difference(r1.state, r0.state);
        for (std::size_t k = 0; k < r0.trace.records.size() && k < r1.trace.records.size(); ++k) {
            diff = std::max(diff, std::abs(r0.trace.records[k].residual_b - r1.trace.records[k].residual_b));
        }
        if (r0.trace.records.size() != r1.trace.records.size()) diff = std::numeric_limits<double>::infinity();
        r.add(S, "mu_zero_equivalence", diff, 1e-14, true, "5 iterations, state and residual history");
    }
    return r;
}

VerifyReport oracle_suite(std::uint64_t seed)
{
    VerifyReport r;
    r.seed = seed;
    Rng rng(seed + 1);
    const std::string S = "oracle";
    constexpr double tol = 1e-11;

    const auto mesh = std::make_shared<const Mesh>(cavity_mesh(1));
    const DenseOracle oracle(mesh);
    const auto vel = build_dofmap(mesh, Family::p2_vector);
    const auto temp = build_dofmap(mesh, Family::p2_scalar);
    const auto pres = build_dofmap(mesh, Family::p1_disc);
    const Field wind(vel, random_vector(rng, vel->num_dofs()));
    const Field Tf(temp, random_vector(rng, temp->num_dofs()));
    auto cmp = [&](const std::string& name, const SparseMatrix& sparse, const DenseMatrix& dense) {
        r.add(S, name, scaled_max_difference(DenseMatrix(sparse), dense), tol);
    };
    cmp("diffusion_scalar", assemble_diffusion(*temp, 1.7), oracle.diffusion(1.7, 1));
    cmp("diffusion_vector", assemble_diffusion(*vel, 0.1), oracle.diffusion(0.1, 2));
    cmp("mass_scalar", assemble_mass(*temp), oracle.mass(1));
    cmp("mass_vector", assemble_mass(*vel), oracle.mass(2));
    cmp("convection_scalar", assemble_convection(*temp, wind), oracle.convection(wind.values, 1));
    cmp("convection_vector", assemble_convection(*vel, wind), oracle.convection(wind.values, 2));
    cmp("divergence", assemble_divergence(*vel, *pres), oracle.divergence());
    cmp("buoyancy", assemble_buoyancy(*vel, *temp, 3.0), oracle.buoyancy(3.0));
    cmp("graddiv", assemble_graddiv(*vel, 0.5), oracle.graddiv(0.5));
    cmp("convection_linearized", assemble_convection_linearized(*vel, wind), oracle.convection_linearized(wind.values));
    cmp("transport_linearized", assemble_transport_linearized(*temp, *vel, Tf), oracle.transport_linearized(Tf.values));

    // Degree-4 data: both quadratures integrate the load exactly.
    const auto fs = [](Point p) { return 1.0 + p.x * p.x * p.y * p.y - 3.0 * p.x * p.y * p.y * p.y; };
    const auto fv = [](Point p) { return Vec2{p.x * p.x * p.y, p.x * p.x * p.x * p.x - 2.0 * p.y}; };
    r.add(S, "load_scalar", scaled_max_difference(assemble_load_scalar(*temp, fs), oracle.load_scalar(fs)), tol);
    r.add(S, "load_vector", scaled_max_difference(assemble_load_vector(*vel, fv), oracle.load_vector(fv)), tol);

    {
        const auto mesh2 = std::make_shared<const Mesh>(cavity_mesh(2));
        const DenseOracle oracle2(mesh2);
        const auto temp2 = build_dofmap(mesh2, Family::p2_scalar);
        const ObservationOperator op(temp2, CoarseGrid{2});
        cmp("cell_means_H_1_2", op.averaging(), oracle2.cell_means(CoarseGrid{2}));
        cmp("nudging_scalar_H_1_2", nudging_matrix(op, 1000.0, 1), oracle2.nudging(CoarseGrid{2}, 1000.0, 1));
        cmp("nudging_vector_H_1_2", nudging_matrix(op, 7.0, 2), oracle2.nudging(CoarseGrid{2}, 7.0, 2));
    }

    {
        ProblemParams p;
        p.ri = 10.0;
        const Discretization disc(mesh, p);
        const State cur = random_state(disc, rng);
        const State sparse = picard_step(disc, cur);
        const State dense = oracle.picard_step(disc, cur);
        r.add(S, "picard_step", max_field_difference(sparse, dense), 1e-10, true, "Ri=10, random wind, unit_square(1)");

        Assimilation a;
        a.op = std::make_shared<const ObservationOperator>(disc.temperature_space(), CoarseGrid{1});
        a.data = synthesize_observations(random_state(disc, rng), *a.op, 0.0);
        const auto nudge = NudgeConfig::make(NudgeMode::both, 1000.0, 1000.0);
        const State sparse_cda = picard_step(disc, cur, nudge, &a);
        const State dense_cda = oracle.picard_step(disc, cur, nudge, &a);
        r.add(S, "cda_picard_step", max_field_difference(sparse_cda, dense_cda), 1e-10, true, "mu=1000, H=1");
    }
    return r;
}

VerifyReport manufactured_suite()
{
    VerifyReport r;
    const std::string S = "manufactured";
    const auto mc = stream_function_case();
    try {
        const auto study = manufactured_convergence(mc, {8, 16, 32});
        for (std::size_t i = 0; i < study.order_u.size(); ++i) {
            const std::string lv = std::to_string(study.levels[i].n) + "->" + std::to_string(study.levels[i + 1].n);
            r.add(S, "order_u_h1_" + lv, study.order_u[i], 1.9, false);
            r.add(S, "order_T_h1_" + lv, study.order_T[i], 1.9, false);
            r.add(S, "order_p_l2_" + lv, study.order_p[i], 1.9, false);
        }
    } catch (const std::exception& e) {
        r.add(S, "nonlinear_solves", 0.0, 1.0, false, e.what());
    }
    // A zero exact solution leaves zero discrete error.
    {
        const auto zero = stream_function_case(0.1, 0.1, 1.0, 0.0);
        const Discretization disc(std::make_shared<const Mesh>(cavity_mesh(8)), zero.params());
        const auto res = solve_nonlinear(disc, initial_guess(disc), SolverConfig{});
        const double e = std::max({res.state.u.values.cwiseAbs().maxCoeff(), res.state.T.values.cwiseAbs().maxCoeff(),
                                   res.state.p.values.cwiseAbs().maxCoeff()});
        r.add(S, "zero_solution_error", e, 1e-14);
    }
    return r;
}

Suite parse_suite(const std::string& s)
{
    if (s == "properties") return Suite::properties;
    if (s == "manufactured") return Suite::manufactured;
    if (s == "oracle") return Suite::oracle;
    if (s == "all") return Suite::all;
    throw std::invalid_argument("unknown verification suite '" + s + "' (expected properties|manufactured|oracle|all)");
}

VerifyReport run_verification(Suite suite, std::uint64_t seed)
{
    VerifyReport r;
    r.seed = seed;
    if (suite == Suite::oracle || suite == Suite::all) r.append(oracle_suite(seed));
    if (suite == Suite::properties || suite == Suite::all) r.append(property_suite(seed));
    if (suite == Suite::manufactured || suite == Suite::all) r.append(manufactured_suite());
    return r;
}

}  // namespace cdapicard
