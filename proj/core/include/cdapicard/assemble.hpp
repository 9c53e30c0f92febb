#pragma once

/// @file assemble.hpp
/// @brief Sparse assembly of the Boussinesq weak-form operators.
///
/// All volume integrals use triangle_rule_degree6(), which is exact for the
/// degree-5 trilinear integrands, so the skew-symmetrized convection
/// operators are skew to roundoff for test functions vanishing on the wall.

#include "cdapicard/space.hpp"

#include <functional>
#include <vector>

namespace cdapicard {

struct ProblemParams {
    double nu = 0.1;
    double kappa = 0.1;
    double ri = 0.0;
    /// Grad-div stabilization weight; zero disables the term.
    double graddiv = 0.0;
    std::function<Vec2(Point)> f;   // empty means zero
    std::function<double(Point)> g; // empty means zero
    BoundarySpec bcs;

    /// Throws std::invalid_argument unless nu > 0, kappa > 0, ri >= 0, graddiv >= 0.
    void validate() const;
};

/// coeff * (grad phi_j, grad phi_i) on a P2 scalar or vector space.
SparseMatrix assemble_diffusion(const DofMap& dm, double coeff);

/// (phi_j, phi_i) on a P2 scalar or vector space.
SparseMatrix assemble_mass(const DofMap& dm);

/// Skew-symmetrized convection with a P2 vector wind w:
/// (w . grad phi_j, phi_i) + 1/2 ((div w) phi_j, phi_i).
/// On a vector space the scalar operator is repeated on both components.
SparseMatrix assemble_convection(const DofMap& dm, const Field& wind);

/// B_{kj} = (div phi_j, q_k); rows are pressure dofs, columns velocity dofs.
SparseMatrix assemble_divergence(const DofMap& vel, const DofMap& pres);

/// ri * (theta_j, phi_i e_y); rows are velocity dofs, columns temperature dofs.
SparseMatrix assemble_buoyancy(const DofMap& vel, const DofMap& temp, double ri);

/// gamma * (div phi_j, div phi_i).
SparseMatrix assemble_graddiv(const DofMap& vel, double gamma);

Vector assemble_load_scalar(const DofMap& dm, const std::function<double(Point)>& func);
Vector assemble_load_vector(const DofMap& dm, const std::function<Vec2(Point)>& func);

/// Columns of the map delta_u -> b(delta_u, u, v): the second convection
/// block of the Newton Jacobian.
SparseMatrix assemble_convection_linearized(const DofMap& vel, const Field& u);

/// Columns of the map delta_u -> b_hat(delta_u, T, w); rows are temperature dofs.
SparseMatrix assemble_transport_linearized(const DofMap& temp, const DofMap& vel, const Field& T);

/// One block of a block matrix. scale multiplies the block on insertion.
struct Block {
    int row = 0;
    int col = 0;
    const SparseMatrix* matrix = nullptr;
    double scale = 1.0;
};

/// Assembles a block matrix whose block rows/cols have the given sizes.
SparseMatrix assemble_blocks(const std::vector<int>& row_sizes, const std::vector<int>& col_sizes,
                             const std::vector<Block>& blocks);

}  // namespace cdapicard
