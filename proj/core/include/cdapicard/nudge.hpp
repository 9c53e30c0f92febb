#pragma once

/// @file nudge.hpp
/// @brief Coarse observation operator and data-assimilation (nudging) terms.
///
/// The observation operator is the L2 projection onto piecewise constants on
/// a uniform m x m grid of squares (spacing H = 1/m). For a P2 field v the
/// cell means are P v, where row c of P holds (1/|c|) * integral_c phi_j.
/// Nudging with weight mu is then mu * P^T D P, D = diag(|c|).

#include "cdapicard/state.hpp"

#include <iosfwd>
#include <memory>
#include <string>

namespace cdapicard {

struct CoarseGrid {
    int m = 1;

    [[nodiscard]] double spacing() const { return 1.0 / m; }
    [[nodiscard]] int num_cells() const { return m * m; }
    /// Cell index (row-major, x fastest) of a point; points on interior grid
    /// lines go to the upper/right cell, the walls x=1, y=1 to the last cell.
    [[nodiscard]] int cell_of(Point p) const;
    [[nodiscard]] Point center(int cell) const;

    /// Grid with spacing H; throws unless 1/H is (within 1e-9) a positive integer.
    static CoarseGrid from_spacing(double H);
};

class ObservationOperator {
public:
    /// dm must be a P2 scalar space. Fine quadrature points are assigned to the
    /// coarse cell containing them; throws if some coarse cell receives none.
    ObservationOperator(std::shared_ptr<const DofMap> dm, CoarseGrid grid);

    [[nodiscard]] const CoarseGrid& grid() const { return grid_; }
    [[nodiscard]] const DofMap& dofmap() const { return *dm_; }
    [[nodiscard]] const std::shared_ptr<const DofMap>& dofmap_ptr() const { return dm_; }
    /// cells x scalar-dofs averaging map P.
    [[nodiscard]] const SparseMatrix& averaging() const { return P_; }
    [[nodiscard]] const Vector& cell_areas() const { return areas_; }

    /// Cell means of scalar P2 coefficients.
    [[nodiscard]] Vector means(const Vector& scalar_values) const { return P_ * scalar_values; }

    /// || I_H v ||_{L2} given cell means.
    [[nodiscard]] double l2_norm_of_means(const Vector& means) const;
    /// || I_H v - v ||_{L2} for one component of a P2 field.
    [[nodiscard]] double projection_error(const Field& v, int component = 0) const;

private:
    std::shared_ptr<const DofMap> dm_;
    CoarseGrid grid_;
    SparseMatrix P_;
    Vector areas_;
};

/// Cell means of one component of a P2 field.
Vector project_P0(const ObservationOperator& op, const Field& v, int component = 0);

/// mu * P^T D P, repeated on each of `components` blocks.
SparseMatrix nudging_matrix(const ObservationOperator& op, double mu, int components = 1);

/// mu * P^T D data on one scalar block.
Vector nudging_rhs(const ObservationOperator& op, double mu, const Vector& data_means);

enum class NudgeMode { both, u_only, t_only, off };

std::string to_string(NudgeMode mode);
/// Accepts both | u | t | off (also u-only, T-only).
NudgeMode parse_nudge_mode(const std::string& s);

struct NudgeConfig {
    double mu_u = 0.0;
    double mu_T = 0.0;
    NudgeMode mode = NudgeMode::off;

    /// Throws std::invalid_argument on negative weights or weights the mode does not allow.
    void validate() const;
    [[nodiscard]] bool active() const { return mu_u > 0.0 || mu_T > 0.0; }

    /// Builds a consistent config, zeroing the weight the mode switches off.
    static NudgeConfig make(NudgeMode mode, double mu_u, double mu_T);
    static NudgeConfig off() { return {}; }
};

/// Coarse observations of velocity and temperature.
struct ObservationData {
    CoarseGrid grid;
    Vector ux, uy, T;                 // values fed to the nudging terms
    Vector clean_ux, clean_uy, clean_T;
    double noise_amplitude = 0.0;
    double delta_u = 0.0;             // offset added to nonzero velocity means
    double delta_T = 0.0;             // offset added to nonzero temperature means

    void validate() const;
};

/// Cell means of the reference velocity and temperature; when
/// noise_amplitude > 0, every nonzero mean of a variable is shifted by
/// noise_amplitude * max |clean mean| of that variable (both velocity
/// components count as one variable). Exact zeros stay zero.
ObservationData synthesize_observations(const State& reference, const ObservationOperator& op,
                                        double noise_amplitude);

/// CSV with header cell,x_center,y_center,u_mean,v_mean,T_mean,u_noisy,v_noisy,T_noisy.
void write_observations_csv(std::ostream& os, const ObservationData& data);

}  // namespace cdapicard
