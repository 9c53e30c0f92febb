#include "cdapicard/solve.hpp"

#include "cdapicard/linear_solver.hpp"
#include "cdapicard/quadrature.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace cdapicard {

// ---------------------------------------------------------------------------
// Discretization
// ---------------------------------------------------------------------------

Discretization::Discretization(std::shared_ptr<const Mesh> mesh, ProblemParams params)
    : mesh_(std::move(mesh)), params_(std::move(params))
{
    params_.validate();
    vel_ = build_dofmap(mesh_, Family::p2_vector);
    pres_ = build_dofmap(mesh_, Family::p1_disc);
    temp_ = build_dofmap(mesh_, Family::p2_scalar);
    k_scalar_ = assemble_diffusion(*temp_, 1.0);
    k_vector_ = assemble_diffusion(*vel_, 1.0);
    div_ = assemble_divergence(*vel_, *pres_);
    buoy_ = assemble_buoyancy(*vel_, *temp_, params_.ri);
    graddiv_ = assemble_graddiv(*vel_, params_.graddiv);
    load_f_ = assemble_load_vector(*vel_, params_.f);
    load_g_ = assemble_load_scalar(*temp_, params_.g);
    vel_bc_ = params_.bcs.velocity_constraints(*vel_);
    temp_bc_ = params_.bcs.temperature_constraints(*temp_);
}

State Discretization::zero_state() const { return State{Field(vel_), Field(pres_), Field(temp_)}; }

Discretization Discretization::with_ri(double ri) const
{
    if (!(ri >= 0.0)) throw std::invalid_argument("with_ri: ri must be non-negative");
    Discretization out = *this;
    out.params_.ri = ri;
    out.buoy_ = assemble_buoyancy(*vel_, *temp_, ri);
    return out;
}

// ---------------------------------------------------------------------------
// Norms
// ---------------------------------------------------------------------------

double l2_norm(const Field& f)
{
    const Mesh& m = f.dofmap->mesh();
    const auto& q = triangle_rule_degree6();
    double s = 0.0;
    for (int t = 0; t < m.num_triangles(); ++t) {
        const double area = m.signed_area(t);
        for (std::size_t k = 0; k < q.size(); ++k) {
            const double w = q.weights[k] * area;
            if (f.dofmap->family() == Family::p1_disc) {
                const double v = eval_p1disc(f, t, q.points[k]);
                s += w * v * v;
            } else {
                for (int c = 0; c < f.dofmap->components(); ++c) {
                    const double v = eval_p2(f, c, t, q.points[k]);
                    s += w * v * v;
                }
            }
        }
    }
    return std::sqrt(s);
}

double h1_seminorm(const Field& f)
{
    if (f.dofmap->family() == Family::p1_disc) throw std::invalid_argument("h1_seminorm: needs a P2 field");
    const Mesh& m = f.dofmap->mesh();
    const auto& q = triangle_rule_degree6();
    double s = 0.0;
    for (int t = 0; t < m.num_triangles(); ++t) {
        const auto geo = cell_geometry(m, t);
        for (std::size_t k = 0; k < q.size(); ++k) {
            const double w = q.weights[k] * geo.area;
            for (int c = 0; c < f.dofmap->components(); ++c) {
                const Vec2 g = eval_p2_gradient(f, c, t, q.points[k], geo);
                s += w * (g[0] * g[0] + g[1] * g[1]);
            }
        }
    }
    return std::sqrt(s);
}

double b_norm(const State& s, double nu, double kappa)
{
    const double gu = h1_seminorm(s.u);
    const double gt = h1_seminorm(s.T);
    return std::sqrt(nu * gu * gu + kappa * gt * gt);
}

double star_norm(const Field& f, double H, double c_interp)
{
    if (!(H > 0.0) || !(c_interp > 0.0)) throw std::invalid_argument("star_norm: needs H > 0 and C_I > 0");
    const double l2 = l2_norm(f);
    const double h1 = h1_seminorm(f);
    return std::sqrt(l2 * l2 / (4.0 * c_interp * c_interp * H * H) + h1 * h1);
}

namespace {

double cell_divergence_sq(const Field& u, int t, const CellGeometry& geo)
{
    const auto& q = triangle_rule_degree6();
    double s = 0.0;
    for (std::size_t k = 0; k < q.size(); ++k) {
        const Vec2 gx = eval_p2_gradient(u, 0, t, q.points[k], geo);
        const Vec2 gy = eval_p2_gradient(u, 1, t, q.points[k], geo);
        const double d = gx[0] + gy[1];
        s += q.weights[k] * geo.area * d * d;
    }
    return s;
}

}  // namespace

double divergence_l2(const Field& u)
{
    const Mesh& m = u.dofmap->mesh();
    double s = 0.0;
    for (int t = 0; t < m.num_triangles(); ++t) s += cell_divergence_sq(u, t, cell_geometry(m, t));
    return std::sqrt(s);
}

double max_cell_divergence(const Field& u)
{
    const Mesh& m = u.dofmap->mesh();
    double mx = 0.0;
    for (int t = 0; t < m.num_triangles(); ++t) mx = std::max(mx, cell_divergence_sq(u, t, cell_geometry(m, t)));
    return std::sqrt(mx);
}

State difference(const State& a, const State& b)
{
    return State{Field(a.u.dofmap, a.u.values - b.u.values), Field(a.p.dofmap, a.p.values - b.p.values),
                 Field(a.T.dofmap, a.T.values - b.T.values)};
}

// ---------------------------------------------------------------------------
// Config / trace
// ---------------------------------------------------------------------------

std::string to_string(Phase p)
{
    switch (p) {
    case Phase::picard: return "picard";
    case Phase::cda_picard: return "cda-picard";
    case Phase::newton: return "newton";
    }
    return "picard";
}

std::string to_string(Status s)
{
    switch (s) {
    case Status::converged: return "converged";
    case Status::max_iter: return "max_iter";
    case Status::diverged: return "diverged";
    }
    return "max_iter";
}

void SolverConfig::validate() const
{
    if (!(tol_residual > 0.0 && tol_residual < switch_tol && switch_tol < divergence_threshold)) {
        throw std::invalid_argument("SolverConfig: need 0 < tol_residual < switch_tol < divergence_threshold");
    }
    if (max_iter < 1) throw std::invalid_argument("SolverConfig: max_iter must be >= 1");
    if (newton_max < 1) throw std::invalid_argument("SolverConfig: newton_max must be >= 1");
    nudge.validate();
}

double IterationTrace::final_residual() const
{
    return records.empty() ? std::numeric_limits<double>::quiet_NaN() : records.back().residual_b;
}

double IterationTrace::final_error() const
{
    return records.empty() ? std::numeric_limits<double>::quiet_NaN() : records.back().error_b;
}

// ---------------------------------------------------------------------------
// Linear steps
// ---------------------------------------------------------------------------

namespace {

Vector solve_constrained(SparseMatrix A, Vector b, const Constraints& c, const std::string& context)
{
    LinearSystem sys{std::move(A), std::move(b)};
    apply_dirichlet(sys, c);
    return linear_solve(sys.matrix, sys.rhs, context);
}

/// Solves the constrained bordered system [[A, U], [P, -I]] [x; y] = [b; c]
/// whose first n rows hold the sparse operator. Coarse observation cells make
/// the rows of P dense, which ruins the fill of a direct factorization, so a
/// short border is eliminated with the Woodbury identity instead:
/// (A + U P) x = b + U c, y = P x - c.
Vector solve_bordered(SparseMatrix big, Vector rhs, const Constraints& c, int n, const std::string& context)
{
    constexpr int kMaxLowRankBorder = 32;
    LinearSystem sys{std::move(big), std::move(rhs)};
    apply_dirichlet(sys, c);
    const int k = static_cast<int>(sys.matrix.rows()) - n;
    if (k > kMaxLowRankBorder) return linear_solve(sys.matrix, sys.rhs, context);

    const SparseMatrix A = sys.matrix.topLeftCorner(n, n);
    const SparseMatrix U = sys.matrix.topRightCorner(n, k);
    const SparseMatrix P = sys.matrix.bottomLeftCorner(k, n);
    DirectSolver lu(context);
    lu.factorize(A);
    Eigen::MatrixXd Z(n, k);
    for (int j = 0; j < k; ++j) Z.col(j) = lu.solve(Vector(U.col(j)));
    Eigen::MatrixXd S = P * Z;
    S.diagonal().array() += 1.0;
    const Vector cy = sys.rhs.tail(k);
    const Vector w = lu.solve(Vector(sys.rhs.head(n) + U * cy));
    Vector z(n + k);
    z.head(n) = w - Z * S.partialPivLu().solve(Vector(P * w));
    z.tail(k) = P * z.head(n) - cy;

    const double scale = std::max(sys.rhs.norm(), std::numeric_limits<double>::min());
    if (!((sys.matrix * z - sys.rhs).norm() <= DirectSolver::kMaxRelativeResidual * scale)) {
        return linear_solve(sys.matrix, sys.rhs, context);
    }
    return z;
}

SparseMatrix identity(int n)
{
    SparseMatrix I(n, n);
    I.setIdentity();
    return I;
}

/// mu * P^T D on `components` diagonal blocks, and the matching block P.
struct NudgeCoupling {
    SparseMatrix ptd;  // dofs x cells
    SparseMatrix p;    // cells x dofs
};

NudgeCoupling nudge_coupling(const ObservationOperator& op, double mu, int components)
{
    const SparseMatrix& P = op.averaging();
    const Vector w = mu * op.cell_areas();
    SparseMatrix ptd = SparseMatrix(P.transpose()) * w.asDiagonal();
    if (components == 1) return {std::move(ptd), P};
    const int nc = op.grid().num_cells();
    const int ns = op.dofmap().num_dofs();
    return {assemble_blocks({ns, ns}, {nc, nc}, {{0, 0, &ptd, 1.0}, {1, 1, &ptd, 1.0}}),
            assemble_blocks({nc, nc}, {ns, ns}, {{0, 0, &P, 1.0}, {1, 1, &P, 1.0}})};
}

void require_assimilation(const NudgeConfig& nudge, const Assimilation* a, const Discretization& disc)
{
    if (!nudge.active()) return;
    if (!a || !a->op) throw std::invalid_argument("picard_step: nudging requested without observation data");
    if (!a->op->dofmap().same_mesh(*disc.temperature_space())) {
        throw std::invalid_argument("picard_step: observation operator lives on another mesh");
    }
    if (a->data.grid.m != a->op->grid().m) throw std::invalid_argument("picard_step: data grid mismatch");
}

Field solve_temperature(const Discretization& disc, const Field& wind, double mu_T, const Assimilation* a,
                        const std::string& context)
{
    const auto& temp = *disc.temperature_space();
    const int n = temp.num_dofs();
    SparseMatrix A = disc.params().kappa * disc.stiffness_scalar() + assemble_convection(temp, wind);
    Vector b = disc.load_heat();
    if (mu_T > 0.0) {
        const int nc = a->op->grid().num_cells();
        const auto cpl = nudge_coupling(*a->op, mu_T, 1);
        const SparseMatrix I = identity(nc);
        SparseMatrix big = assemble_blocks({n, nc}, {n, nc},
                                           {{0, 0, &A, 1.0}, {0, 1, &cpl.ptd, 1.0}, {1, 0, &cpl.p, 1.0}, {1, 1, &I, -1.0}});
        Vector rhs = Vector::Zero(n + nc);
        rhs.head(n) = b + cpl.ptd * a->data.T;
        const Vector x =
            solve_bordered(std::move(big), std::move(rhs), disc.temperature_constraints(), n, context);
        return Field(disc.temperature_space(), x.head(n));
    }
    return Field(disc.temperature_space(), solve_constrained(std::move(A), std::move(b), disc.temperature_constraints(), context));
}

void solve_oseen(const Discretization& disc, const Field& wind, const Field& T, double mu_u, const Assimilation* a,
                 const std::string& context, Field& u_out, Field& p_out)
{
    const auto& vel = *disc.velocity_space();
    const int nv = vel.num_dofs();
    const int np = disc.pressure_space()->num_dofs();
    SparseMatrix A = disc.params().nu * disc.stiffness_vector() + assemble_convection(vel, wind);
    if (disc.params().graddiv > 0.0) A += disc.graddiv();
    const SparseMatrix& B = disc.divergence();
    const SparseMatrix Bt = B.transpose();
    Vector f = disc.load_momentum() + disc.buoyancy() * T.values;

    Constraints bc = disc.velocity_constraints().merged(Constraints{{nv + disc.pinned_pressure_dof()}, {0.0}});

    Vector x;
    if (mu_u > 0.0) {
        const int nc = 2 * a->op->grid().num_cells();
        const auto cpl = nudge_coupling(*a->op, mu_u, 2);
        const SparseMatrix I = identity(nc);
        SparseMatrix big = assemble_blocks({nv, np, nc}, {nv, np, nc},
                                           {{0, 0, &A, 1.0},
                                            {0, 1, &Bt, -1.0},
                                            {1, 0, &B, -1.0},
                                            {0, 2, &cpl.ptd, 1.0},
                                            {2, 0, &cpl.p, 1.0},
                                            {2, 2, &I, -1.0}});
        Vector data(nc);
        data << a->data.ux, a->data.uy;
        Vector rhs = Vector::Zero(nv + np + nc);
        rhs.head(nv) = f + cpl.ptd * data;
        x = solve_bordered(std::move(big), std::move(rhs), bc, nv + np, context);
    } else {
        SparseMatrix big = assemble_blocks({nv, np}, {nv, np}, {{0, 0, &A, 1.0}, {0, 1, &Bt, -1.0}, {1, 0, &B, -1.0}});
        Vector rhs = Vector::Zero(nv + np);
        rhs.head(nv) = f;
        x = solve_constrained(std::move(big), std::move(rhs), bc, context);
    }
    u_out = Field(disc.velocity_space(), x.head(nv));
    p_out = zero_mean_pressure(Field(disc.pressure_space(), x.segment(nv, np)));
}

}  // namespace

State initial_guess(const Discretization& disc)
{
    State s = disc.zero_state();
    s.T = solve_temperature(disc, s.u, 0.0, nullptr, "initial guess: conduction solve");
    return s;
}

State picard_step(const Discretization& disc, const State& current, const NudgeConfig& nudge,
                  const Assimilation* assimilation)
{
    nudge.validate();
    require_assimilation(nudge, assimilation, disc);
    const std::string tag = nudge.active() ? "cda-picard" : "picard";
    State next;
    next.T = solve_temperature(disc, current.u, nudge.mu_T, assimilation, tag + ": temperature solve");
    solve_oseen(disc, current.u, next.T, nudge.mu_u, assimilation, tag + ": Oseen solve", next.u, next.p);
    return next;
}

// ---------------------------------------------------------------------------
// Newton
// ---------------------------------------------------------------------------

Vector boussinesq_residual(const Discretization& disc, const State& s)
{
    const auto& vel = *disc.velocity_space();
    const auto& temp = *disc.temperature_space();
    const int nv = vel.num_dofs();
    const int np = disc.pressure_space()->num_dofs();
    const int nt = temp.num_dofs();
    const auto& prm = disc.params();

    SparseMatrix Au = assemble_convection(vel, s.u) + prm.nu * disc.stiffness_vector();
    if (prm.graddiv > 0.0) Au += disc.graddiv();
    const SparseMatrix At = assemble_convection(temp, s.u) + prm.kappa * disc.stiffness_scalar();

    Vector F(nv + np + nt);
    F.head(nv) = Au * s.u.values - disc.divergence().transpose() * s.p.values - disc.load_momentum() -
                 disc.buoyancy() * s.T.values;
    F.segment(nv, np) = -(disc.divergence() * s.u.values);
    F.tail(nt) = At * s.T.values - disc.load_heat();
    return F;
}

SparseMatrix boussinesq_jacobian(const Discretization& disc, const State& s)
{
    const auto& vel = *disc.velocity_space();
    const auto& temp = *disc.temperature_space();
    const int nv = vel.num_dofs();
    const int np = disc.pressure_space()->num_dofs();
    const int nt = temp.num_dofs();
    const auto& prm = disc.params();

    SparseMatrix Juu = assemble_convection(vel, s.u) + assemble_convection_linearized(vel, s.u) +
                       prm.nu * disc.stiffness_vector();
    if (prm.graddiv > 0.0) Juu += disc.graddiv();
    const SparseMatrix Bt = disc.divergence().transpose();
    const SparseMatrix JTu = assemble_transport_linearized(temp, vel, s.T);
    const SparseMatrix JTT = assemble_convection(temp, s.u) + prm.kappa * disc.stiffness_scalar();
    return assemble_blocks({nv, np, nt}, {nv, np, nt},
                           {{0, 0, &Juu, 1.0},
                            {0, 1, &Bt, -1.0},
                            {0, 2, &disc.buoyancy(), -1.0},
                            {1, 0, &disc.divergence(), -1.0},
                            {2, 0, &JTu, 1.0},
                            {2, 2, &JTT, 1.0}});
}

State newton_step(const Discretization& disc, const State& current)
{
    const int nv = disc.velocity_space()->num_dofs();
    const int np = disc.pressure_space()->num_dofs();
    const int nt = disc.temperature_space()->num_dofs();
    SparseMatrix J = boussinesq_jacobian(disc, current);
    Vector rhs = -boussinesq_residual(disc, current);
    const Constraints bc = disc.velocity_constraints()
                               .homogeneous()
                               .merged(Constraints{{nv + disc.pinned_pressure_dof()}, {0.0}})
                               .merged(disc.temperature_constraints().homogeneous().shifted(nv + np));
    const Vector delta = solve_constrained(std::move(J), std::move(rhs), bc, "newton: coupled Jacobian solve");
    State next = current;
    next.u.values += delta.head(nv);
    next.p = zero_mean_pressure(Field(current.p.dofmap, current.p.values + delta.segment(nv, np)));
    next.T.values += delta.tail(nt);
    return next;
}

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

SolveResult solve_nonlinear(const Discretization& disc, const State& initial, const SolverConfig& config,
                            const Assimilation* assimilation, const State* reference)
{
    config.validate();
    require_assimilation(config.nudge, assimilation, disc);
    const auto& prm = disc.params();
    SolveResult out{initial, {}};
    Phase phase = config.nudge.active() ? Phase::cda_picard : Phase::picard;
    int newton_steps = 0;
    const NudgeConfig none = NudgeConfig::off();

    for (int k = 1; k <= config.max_iter; ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        State next;
        try {
            next = (phase == Phase::newton) ? newton_step(disc, out.state)
                                            : picard_step(disc, out.state, phase == Phase::cda_picard ? config.nudge : none,
                                                          assimilation);
        } catch (const LinearSolveError& e) {
            out.trace.status = Status::diverged;
            out.trace.message = e.what();
            return out;
        }
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

        IterationRecord rec;
        rec.k = k;
        rec.phase = phase;
        rec.wall_ms = ms;
        rec.error_b = std::numeric_limits<double>::quiet_NaN();
        if (!next.finite()) {
            rec.residual_b = std::numeric_limits<double>::infinity();
            out.trace.records.push_back(rec);
            out.trace.status = Status::diverged;
            out.trace.message = "non-finite iterate";
            return out;
        }
        rec.residual_b = b_norm(difference(next, out.state), prm.nu, prm.kappa);
        if (reference) rec.error_b = b_norm(difference(next, *reference), prm.nu, prm.kappa);
        out.trace.records.push_back(rec);
        out.state = std::move(next);
        if (phase == Phase::newton) ++newton_steps;

        if (rec.residual_b < config.tol_residual) {
            out.trace.status = Status::converged;
            return out;
        }
        if (!(rec.residual_b <= config.divergence_threshold)) {
            out.trace.status = Status::diverged;
            out.trace.message = "residual exceeded divergence threshold";
            return out;
        }
        if (phase == Phase::newton && newton_steps >= config.newton_max) {
            out.trace.status = Status::max_iter;
            out.trace.message = "Newton iteration cap reached";
            return out;
        }
        if (config.hybrid && phase != Phase::newton && rec.residual_b < config.switch_tol) phase = Phase::newton;
    }
    out.trace.status = Status::max_iter;
    return out;
}

State solve_reference(const Discretization& disc, double tol)
{
    const double target = disc.params().ri;
    double ri = target / 100.0;
    Discretization start = disc.with_ri(ri);
    SolverConfig warm;
    warm.tol_residual = tol;
    warm.hybrid = true;
    warm.switch_tol = 1e-3;
    auto first = solve_nonlinear(start, initial_guess(start), warm);
    if (first.trace.status != Status::converged) {
        throw std::runtime_error("solve_reference: warm start did not converge (" + first.trace.message + ")");
    }
    State s = std::move(first.state);

    constexpr int kNewtonCap = 25;
    double log_step = 0.5;
    while (ri < target) {
        const double next_ri = std::min(target, ri * std::pow(10.0, log_step));
        const Discretization stage = disc.with_ri(next_ri);
        State trial = s;
        bool ok = false;
        try {
            for (int it = 0; it < kNewtonCap; ++it) {
                State nx = newton_step(stage, trial);
                if (!nx.finite()) break;
                const double r = b_norm(difference(nx, trial), stage.params().nu, stage.params().kappa);
                trial = std::move(nx);
                if (r < tol) {
                    ok = true;
                    break;
                }
                if (!(r < 1e8)) break;
            }
        } catch (const LinearSolveError&) {
            ok = false;
        }
        if (ok) {
            ri = next_ri;
            s = std::move(trial);
        } else {
            log_step *= 0.5;
            if (log_step < 1e-3) throw std::runtime_error("solve_reference: continuation in Ri stalled");
        }
    }
    return s;
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

Diagnostics diagnostics(const Discretization& disc, const State& s, double H, double c_interp)
{
    const auto& prm = disc.params();
    Diagnostics d;
    d.grad_u = h1_seminorm(s.u);
    d.grad_T = h1_seminorm(s.T);
    d.div_u = divergence_l2(s.u);
    d.max_cell_div = max_cell_divergence(s.u);
    d.b_norm = std::sqrt(prm.nu * d.grad_u * d.grad_u + prm.kappa * d.grad_T * d.grad_T);
    d.star_u = star_norm(s.u, H, c_interp);
    d.star_T = star_norm(s.T, H, c_interp);
    d.poincare = 1.0 / (std::numbers::pi * std::sqrt(2.0));

    bool homogeneous_everywhere = true;
    for (const auto& v : prm.bcs.temperature.value) homogeneous_everywhere = homogeneous_everywhere && v && *v == 0.0;
    if (prm.g && homogeneous_everywhere) {
        const Mesh& m = disc.mesh();
        const auto& q = triangle_rule_degree6();
        double g2 = 0.0;
        for (int t = 0; t < m.num_triangles(); ++t) {
            const auto geo = cell_geometry(m, t);
            for (std::size_t k = 0; k < q.size(); ++k) {
                const double gv = prm.g(geo.map(q.points[k]));
                g2 += q.weights[k] * geo.area * gv * gv;
            }
        }
        if (g2 > 0.0) {
            d.grad_T_bound = d.poincare * std::sqrt(g2) / prm.kappa;
            d.bound_violated = d.grad_T > *d.grad_T_bound;
        }
    }
    return d;
}

}  // namespace cdapicard
