#pragma once

/// @file solve.hpp
/// @brief Picard, CDA-Picard, Newton and hybrid solvers for the steady
/// Boussinesq system on a Scott-Vogelius discretization.
///
/// Each Picard step solves the temperature convection-diffusion problem with
/// the lagged wind and then the Oseen problem with the fresh buoyancy. When
/// nudging is active the term mu * P^T D P is realized through auxiliary
/// cell-mean unknowns y = P x, which keeps the factorized systems sparse even
/// for coarse observation grids.

#include "cdapicard/assemble.hpp"
#include "cdapicard/nudge.hpp"
#include "cdapicard/state.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace cdapicard {

/// Mesh, spaces, boundary data and every iteration-independent operator.
class Discretization {
public:
    Discretization(std::shared_ptr<const Mesh> mesh, ProblemParams params);

    [[nodiscard]] const Mesh& mesh() const { return *mesh_; }
    [[nodiscard]] const std::shared_ptr<const Mesh>& mesh_ptr() const { return mesh_; }
    [[nodiscard]] const ProblemParams& params() const { return params_; }

    [[nodiscard]] const std::shared_ptr<const DofMap>& velocity_space() const { return vel_; }
    [[nodiscard]] const std::shared_ptr<const DofMap>& pressure_space() const { return pres_; }
    [[nodiscard]] const std::shared_ptr<const DofMap>& temperature_space() const { return temp_; }

    /// Unit-coefficient stiffness on the scalar and vector P2 spaces.
    [[nodiscard]] const SparseMatrix& stiffness_scalar() const { return k_scalar_; }
    [[nodiscard]] const SparseMatrix& stiffness_vector() const { return k_vector_; }
    [[nodiscard]] const SparseMatrix& divergence() const { return div_; }
    [[nodiscard]] const SparseMatrix& buoyancy() const { return buoy_; }
    [[nodiscard]] const SparseMatrix& graddiv() const { return graddiv_; }
    [[nodiscard]] const Vector& load_momentum() const { return load_f_; }
    [[nodiscard]] const Vector& load_heat() const { return load_g_; }

    [[nodiscard]] const Constraints& velocity_constraints() const { return vel_bc_; }
    [[nodiscard]] const Constraints& temperature_constraints() const { return temp_bc_; }
    /// Pressure dof held at zero during solves (removes the constant mode).
    [[nodiscard]] int pinned_pressure_dof() const { return 0; }

    [[nodiscard]] State zero_state() const;

    /// Same discretization with a different Richardson number.
    [[nodiscard]] Discretization with_ri(double ri) const;

private:
    std::shared_ptr<const Mesh> mesh_;
    ProblemParams params_;
    std::shared_ptr<const DofMap> vel_, pres_, temp_;
    SparseMatrix k_scalar_, k_vector_, div_, buoy_, graddiv_;
    Vector load_f_, load_g_;
    Constraints vel_bc_, temp_bc_;
};

/// Observation operator plus the data it nudges toward.
struct Assimilation {
    std::shared_ptr<const ObservationOperator> op;
    ObservationData data;
};

// ---------------------------------------------------------------------------
// Norms
// ---------------------------------------------------------------------------

enum class NormKind { l2, h1_semi, b, star };

/// L2 norm of a P2 (all components) or P1disc field.
double l2_norm(const Field& f);
/// || grad f ||, summed over components.
double h1_seminorm(const Field& f);
/// sqrt(nu ||grad u||^2 + kappa ||grad T||^2).
double b_norm(const State& s, double nu, double kappa);
/// sqrt(||f||^2 / (4 C_I^2 H^2) + ||grad f||^2).
double star_norm(const Field& f, double H, double c_interp);
/// || div u ||_{L2} and the largest per-triangle value.
double divergence_l2(const Field& u);
double max_cell_divergence(const Field& u);

/// a - b, field by field.
State difference(const State& a, const State& b);

// ---------------------------------------------------------------------------
// Iterations
// ---------------------------------------------------------------------------

enum class Phase { picard, cda_picard, newton };
enum class Status { converged, max_iter, diverged };

std::string to_string(Phase p);
std::string to_string(Status s);

struct SolverConfig {
    double tol_residual = 1e-8;
    int max_iter = 200;
    double divergence_threshold = 1e8;
    double switch_tol = 1e-3;
    bool hybrid = false;
    NudgeConfig nudge;
    int newton_max = 20;

    /// Throws std::invalid_argument unless 0 < tol < switch_tol < divergence_threshold.
    void validate() const;
};

struct IterationRecord {
    int k = 0;
    double residual_b = 0.0;
    double error_b = 0.0;  // NaN without a reference
    Phase phase = Phase::picard;
    double wall_ms = 0.0;
};

struct IterationTrace {
    std::vector<IterationRecord> records;
    Status status = Status::max_iter;
    std::string message;

    [[nodiscard]] int iterations() const { return static_cast<int>(records.size()); }
    [[nodiscard]] double final_residual() const;
    [[nodiscard]] double final_error() const;
};

struct SolveResult {
    State state;
    IterationTrace trace;
};

/// u = 0, p = 0, T = pure conduction solution for the configured walls.
State initial_guess(const Discretization& disc);

/// One (CDA-)Picard step. With nudge.active() the assimilation must be given.
/// Throws LinearSolveError (with phase context) on a failed solve.
State picard_step(const Discretization& disc, const State& current, const NudgeConfig& nudge = {},
                  const Assimilation* assimilation = nullptr);

/// Nonlinear residual F(u, p, T) of the discrete Boussinesq system,
/// stacked as [momentum; continuity; heat]. Dirichlet rows are included.
Vector boussinesq_residual(const Discretization& disc, const State& s);
/// Jacobian of boussinesq_residual at s (unconstrained).
SparseMatrix boussinesq_jacobian(const Discretization& disc, const State& s);

/// One full Newton step on the coupled system, without nudging.
State newton_step(const Discretization& disc, const State& current);

/// Iterates until the B-norm of the update drops below tol_residual, the
/// update exceeds divergence_threshold (or turns non-finite), or max_iter.
/// In hybrid mode the first update below switch_tol hands off to Newton
/// permanently. The reference, when given, is used only for error_b.
SolveResult solve_nonlinear(const Discretization& disc, const State& initial, const SolverConfig& config,
                            const Assimilation* assimilation = nullptr, const State* reference = nullptr);

/// Converged discrete solution obtained without data: a hybrid Picard/Newton
/// solve at Ri/100, then Newton continuation in Ri to the target. Throws
/// std::runtime_error if the continuation stalls.
State solve_reference(const Discretization& disc, double tol = 1e-10);

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

struct Diagnostics {
    double grad_u = 0.0;
    double grad_T = 0.0;
    double div_u = 0.0;
    double max_cell_div = 0.0;
    double b_norm = 0.0;
    double star_u = 0.0;
    double star_T = 0.0;
    /// Poincare constant used for the temperature bound, 1/(pi sqrt 2) on the unit square.
    double poincare = 0.0;
    /// kappa^-1 C_p ||g||, only when the bound applies.
    std::optional<double> grad_T_bound;
    bool bound_violated = false;
};

/// H and c_interp feed the star norms.
Diagnostics diagnostics(const Discretization& disc, const State& s, double H = 0.25, double c_interp = 1.0);

}  // namespace cdapicard
