#pragma once

/// @file space.hpp
/// @brief Degree-of-freedom maps, fields and Dirichlet constraints.
///
/// P2 numbering: vertex v -> v, edge e -> V + e. The vector space stores the
/// x-component block first, then the y-component block, each with the scalar
/// numbering. P1disc numbering: local vertex i of triangle t -> 3t + i.

#include "cdapicard/element.hpp"
#include "cdapicard/mesh.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

namespace cdapicard {

using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

enum class Family { p2_scalar, p2_vector, p1_disc };

class DofMap {
public:
    DofMap(std::shared_ptr<const Mesh> mesh, Family family);

    [[nodiscard]] Family family() const { return family_; }
    [[nodiscard]] const Mesh& mesh() const { return *mesh_; }
    [[nodiscard]] const std::shared_ptr<const Mesh>& mesh_ptr() const { return mesh_; }
    [[nodiscard]] int num_dofs() const { return num_dofs_; }
    [[nodiscard]] int components() const { return family_ == Family::p2_vector ? 2 : 1; }
    /// Dofs per component (V + E for P2, 3T for P1disc).
    [[nodiscard]] int component_size() const { return component_size_; }

    /// Scalar P2 dofs of triangle t in local shape-function order.
    [[nodiscard]] std::array<int, 6> p2_cell_dofs(int t) const;
    /// P1disc dofs of triangle t.
    [[nodiscard]] std::array<int, 3> p1_cell_dofs(int t) const { return {3 * t, 3 * t + 1, 3 * t + 2}; }

    /// Interpolation node of a dof (component index stripped for vectors).
    [[nodiscard]] Point node(int dof) const;
    /// Walls touched by the node of a P2 dof (0 for interior and for P1disc).
    [[nodiscard]] std::uint8_t node_sides(int dof) const;
    [[nodiscard]] bool on_boundary(int dof) const { return node_sides(dof) != 0; }

    [[nodiscard]] bool same_mesh(const DofMap& other) const { return mesh_ == other.mesh_; }

private:
    std::shared_ptr<const Mesh> mesh_;
    Family family_;
    int component_size_ = 0;
    int num_dofs_ = 0;
};

std::shared_ptr<const DofMap> build_dofmap(std::shared_ptr<const Mesh> mesh, Family family);

struct Field {
    std::shared_ptr<const DofMap> dofmap;
    Vector values;

    Field() = default;
    explicit Field(std::shared_ptr<const DofMap> dm);
    Field(std::shared_ptr<const DofMap> dm, Vector v);

    [[nodiscard]] bool finite() const { return values.allFinite(); }
};

/// Nodal interpolation. For P2 fields the interpolant of a quadratic is exact.
Field interpolate_scalar(std::shared_ptr<const DofMap> dm, const std::function<double(Point)>& f);
Field interpolate_vector(std::shared_ptr<const DofMap> dm, const std::function<Vec2(Point)>& f);

/// Value / gradient of a scalar P2 (or one component of a vector P2) field on
/// triangle t at barycentric point lambda.
double eval_p2(const Field& f, int component, int t, const std::array<double, 3>& lambda);
Vec2 eval_p2_gradient(const Field& f, int component, int t, const std::array<double, 3>& lambda,
                      const CellGeometry& geo);
double eval_p1disc(const Field& f, int t, const std::array<double, 3>& lambda);

/// Sorted, unique constrained dofs with their prescribed values.
struct Constraints {
    std::vector<int> dofs;
    std::vector<double> values;

    [[nodiscard]] std::size_t size() const { return dofs.size(); }
    /// Shifts every dof by offset (used when a block sits inside a larger system).
    [[nodiscard]] Constraints shifted(int offset) const;
    /// Same dofs, all values zero.
    [[nodiscard]] Constraints homogeneous() const;
    /// Concatenation; throws if the dof sets overlap.
    [[nodiscard]] Constraints merged(const Constraints& other) const;
};

/// Builds constraints on boundary dofs. Throws std::logic_error if any dof is
/// not on the boundary.
Constraints make_boundary_constraints(const DofMap& dm, std::vector<int> dofs, std::vector<double> values);

/// Temperature wall data: Dirichlet value per wall, nullopt for insulated.
struct TemperatureWalls {
    std::array<std::optional<double>, 4> value{};  // indexed by Side

    /// Cold left wall (0), hot right wall (1), insulated top and bottom.
    static TemperatureWalls cavity();
    /// T = 0 on every wall.
    static TemperatureWalls homogeneous();
};

/// No-slip velocity everywhere; temperature per TemperatureWalls.
struct BoundarySpec {
    TemperatureWalls temperature = TemperatureWalls::cavity();

    [[nodiscard]] Constraints velocity_constraints(const DofMap& vel) const;
    /// Corner nodes touching a Dirichlet wall take the first Dirichlet value in
    /// left, right, bottom, top order.
    [[nodiscard]] Constraints temperature_constraints(const DofMap& temp) const;
};

struct LinearSystem {
    SparseMatrix matrix;
    Vector rhs;
};

/// Symmetric elimination: constrained rows and columns are zeroed, the
/// diagonal set to 1, the rhs set to the prescribed value, and eliminated
/// columns moved to the rhs of the free rows.
void apply_dirichlet(LinearSystem& system, const Constraints& constraints);

/// Domain mean of a P1disc field.
double mean_value(const Field& p);
/// p minus its domain mean.
Field zero_mean_pressure(const Field& p);

}  // namespace cdapicard
