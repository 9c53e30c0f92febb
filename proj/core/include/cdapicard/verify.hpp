#pragma once

// Verification: an independent dense assembler for tiny meshes, manufactured
// solutions with observed convergence orders, and randomized property checks.
//
// The dense oracle shares no element code with the sparse assembler: its P2
// basis comes from inverting a monomial Vandermonde matrix on the physical
// triangle, its quadrature is a collapsed 6x6 Gauss-Legendre product rule
// (exact to degree 10) with nodes found by Newton iteration, its Dirichlet
// treatment is row replacement, and its pressure is fixed by a mean-zero
// Lagrange multiplier instead of a pinned dof.

#include "cdapicard/solve.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace cdapicard {

// ---------------------------------------------------------------------------
// Dense oracle
// ---------------------------------------------------------------------------

using DenseMatrix = Eigen::MatrixXd;

/// Gauss-Legendre nodes and weights on [0, 1].
struct LineRule {
    std::vector<double> x, w;
};
LineRule gauss_legendre(int npoints);

/// Physical-coordinate quadrature on one triangle.
struct PhysicalRule {
    std::vector<Point> points;
    std::vector<double> weights;  // sum to the triangle area
};
/// Collapsed (Duffy) product rule with npoints^2 nodes; exact to degree 2*npoints - 2.
PhysicalRule collapsed_rule(const std::array<Point, 3>& tri, int npoints = 6);

class DenseOracle {
public:
    /// Largest matrix dimension the oracle will build.
    static constexpr int kMaxDofs = 200;

    /// Nodes are built from the triangles and matched to the library's P2
    /// numbering by coordinates. Throws std::length_error if the vector P2
    /// space exceeds kMaxDofs.
    explicit DenseOracle(std::shared_ptr<const Mesh> mesh);

    [[nodiscard]] int scalar_dofs() const { return static_cast<int>(nodes_.size()); }
    [[nodiscard]] int pressure_dofs() const { return 3 * mesh_->num_triangles(); }

    // Operators in the sparse library's dof numbering.
    [[nodiscard]] DenseMatrix diffusion(double coeff, int components) const;
    [[nodiscard]] DenseMatrix mass(int components) const;
    /// wind: nodal values of a P2 vector field in sparse numbering (x block, y block).
    [[nodiscard]] DenseMatrix convection(const Vector& wind, int components) const;
    [[nodiscard]] DenseMatrix divergence() const;
    [[nodiscard]] DenseMatrix buoyancy(double ri) const;
    [[nodiscard]] DenseMatrix graddiv(double gamma) const;
    [[nodiscard]] DenseMatrix convection_linearized(const Vector& u) const;
    [[nodiscard]] DenseMatrix transport_linearized(const Vector& T) const;
    /// mu * sum_c |c| m_c(phi_i) m_c(phi_j), with m_c the cell mean. Needs
    /// coarse cells that are unions of mesh triangles.
    [[nodiscard]] DenseMatrix nudging(const CoarseGrid& grid, double mu, int components) const;
    /// Cell means of every scalar basis function (cells x dofs).
    [[nodiscard]] DenseMatrix cell_means(const CoarseGrid& grid) const;
    [[nodiscard]] Vector load_scalar(const std::function<double(Point)>& f) const;
    [[nodiscard]] Vector load_vector(const std::function<Vec2(Point)>& f) const;

    /// One (CDA-)Picard step on the cavity problem described by params,
    /// assembled and solved as a single dense block system in (T, u, p, lambda).
    [[nodiscard]] State picard_step(const Discretization& disc, const State& current, const NudgeConfig& nudge = {},
                                    const Assimilation* assimilation = nullptr) const;

private:
    struct Cell {
        std::array<int, 6> dofs;         // sparse scalar numbering
        Eigen::Matrix<double, 6, 6> coef;  // basis j = sum_k coef(k, j) * monomial_k
        Eigen::Matrix3d p1coef;            // P1 nodal basis at the three vertices
        double cx = 0.0, cy = 0.0, scale = 1.0;  // monomials use ((x - cx)/scale, (y - cy)/scale)
        PhysicalRule rule;
    };

    [[nodiscard]] std::array<double, 6> values(const Cell& c, Point p) const;
    [[nodiscard]] std::array<Vec2, 6> gradients(const Cell& c, Point p) const;
    [[nodiscard]] std::array<double, 3> p1_values(const Cell& c, Point p) const;

    std::shared_ptr<const Mesh> mesh_;
    std::vector<Point> nodes_;  // indexed by sparse scalar dof
    std::vector<Cell> cells_;
};

/// Largest |a - b| entry divided by max(1, max |b|).
double scaled_max_difference(const DenseMatrix& a, const DenseMatrix& b);

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct CheckResult {
    std::string suite;
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    /// true: pass when value <= threshold; false: pass when value >= threshold.
    bool upper_bound = true;
    bool pass = false;
    std::string detail;
};

struct VerifyReport {
    std::uint64_t seed = 0;
    std::vector<CheckResult> checks;

    [[nodiscard]] bool all_passed() const;
    void add(std::string suite, std::string name, double value, double threshold, bool upper_bound = true,
             std::string detail = {});
    void append(const VerifyReport& other);
};

void write_report_text(std::ostream& os, const VerifyReport& r);
void write_report_csv(std::ostream& os, const VerifyReport& r);

// ---------------------------------------------------------------------------
// Manufactured solutions
// ---------------------------------------------------------------------------

struct ManufacturedCase {
    double nu = 0.1;
    double kappa = 0.1;
    double ri = 1.0;
    /// Scales every exact field; 0 gives the zero solution.
    double amplitude = 1.0;

    std::function<Vec2(Point)> u;
    std::function<std::array<Vec2, 2>(Point)> grad_u;  // grad_u[i] = grad of u_i
    std::function<double(Point)> p;
    std::function<double(Point)> T;
    std::function<Vec2(Point)> grad_T;
    std::function<Vec2(Point)> f;
    std::function<double(Point)> g;

    [[nodiscard]] ProblemParams params() const;
};

/// u = curl(x^2 (1-x)^2 y^2 (1-y)^2), p = cos(pi x) cos(pi y),
/// T = sin(pi x) sin(pi y); forcing from the strong form.
ManufacturedCase stream_function_case(double nu = 0.1, double kappa = 0.1, double ri = 1.0, double amplitude = 1.0);

struct ManufacturedLevel {
    int n = 0;
    double h = 0.0;
    double err_u_h1 = 0.0;
    double err_T_h1 = 0.0;
    double err_p_l2 = 0.0;
    int iterations = 0;
    bool converged = false;
};

struct ConvergenceStudy {
    std::vector<ManufacturedLevel> levels;
    std::vector<double> order_u, order_T, order_p;  // between consecutive levels
};

/// Needs >= 3 levels; throws std::runtime_error if a level fails to converge.
ConvergenceStudy manufactured_convergence(const ManufacturedCase& mc, const std::vector<int>& ns);

// ---------------------------------------------------------------------------
// Suites
// ---------------------------------------------------------------------------

inline constexpr std::uint64_t kDefaultSeed = 20240917;

VerifyReport property_suite(std::uint64_t seed = kDefaultSeed);
VerifyReport oracle_suite(std::uint64_t seed = kDefaultSeed);
VerifyReport manufactured_suite();

enum class Suite { properties, manufactured, oracle, all };
Suite parse_suite(const std::string& s);
VerifyReport run_verification(Suite suite, std::uint64_t seed = kDefaultSeed);

}  // namespace cdapicard
