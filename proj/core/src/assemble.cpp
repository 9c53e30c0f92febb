#include "cdapicard/assemble.hpp"

#include "cdapicard/quadrature.hpp"

#include <Eigen/SparseCore>

#include <stdexcept>

namespace cdapicard {

namespace {

using Triplet = Eigen::Triplet<double, int>;
using Local6 = std::array<std::array<double, 6>, 6>;

void require_p2(const DofMap& dm, const char* who)
{
    if (dm.family() == Family::p1_disc) throw std::invalid_argument(std::string(who) + ": needs a P2 space");
}

void require_same_mesh(const DofMap& a, const DofMap& b, const char* who)
{
    if (!a.same_mesh(b)) throw std::invalid_argument(std::string(who) + ": spaces live on different meshes");
}

SparseMatrix from_triplets(int rows, int cols, const std::vector<Triplet>& trips)
{
    SparseMatrix m(rows, cols);
    m.setFromTriplets(trips.begin(), trips.end());
    return m;
}

/// Scatters a scalar 6x6 element matrix on every component of dm.
void scatter_scalar(const DofMap& dm, const std::array<int, 6>& dofs, const Local6& local, std::vector<Triplet>& trips)
{
    for (int c = 0; c < dm.components(); ++c) {
        const int off = c * dm.component_size();
        for (std::size_t a = 0; a < 6; ++a) {
            for (std::size_t b = 0; b < 6; ++b) {
                trips.emplace_back(off + dofs[a], off + dofs[b], local[a][b]);
            }
        }
    }
}

struct WindSample {
    Vec2 w;
    double div;
};

WindSample sample_wind(const Field& wind, int t, const std::array<double, 3>& l, const CellGeometry& geo)
{
    const auto dofs = wind.dofmap->p2_cell_dofs(t);
    const auto phi = p2_values(l);
    const auto dphi = p2_gradients(l, geo.grad_lambda);
    const int n = wind.dofmap->component_size();
    WindSample s{{0.0, 0.0}, 0.0};
    for (std::size_t a = 0; a < 6; ++a) {
        const double wx = wind.values[dofs[a]];
        const double wy = wind.values[n + dofs[a]];
        s.w[0] += wx * phi[a];
        s.w[1] += wy * phi[a];
        s.div += wx * dphi[a][0] + wy * dphi[a][1];
    }
    return s;
}

}  // namespace

void ProblemParams::validate() const
{
    if (!(nu > 0.0)) throw std::invalid_argument("ProblemParams: nu must be positive");
    if (!(kappa > 0.0)) throw std::invalid_argument("ProblemParams: kappa must be positive");
    if (!(ri >= 0.0)) throw std::invalid_argument("ProblemParams: ri must be non-negative");
    if (!(graddiv >= 0.0)) throw std::invalid_argument("ProblemParams: graddiv must be non-negative");
}

SparseMatrix assemble_diffusion(const DofMap& dm, double coeff)
{
    require_p2(dm, "assemble_diffusion");
    if (!(coeff > 0.0)) throw std::invalid_argument("assemble_diffusion: coefficient must be positive");
    const Mesh& m = dm.mesh();
    const auto& q = triangle_rule_degree6();
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(36 * dm.components() * m.num_triangles()));
    for (int t = 0; t < m.num_triangles(); ++t) {
        const auto geo = cell_geometry(m, t);
        Local6 local{};
        for (std::size_t k = 0; k < q.size(); ++k) {
            const auto dphi = p2_gradients(q.points[k], geo.grad_lambda);
            const double wk = coeff * q.weights[k] * geo.area;
            for (std::size_t a = 0; a < 6; ++a) {
                for (std::size_t b = 0; b < 6; ++b) {
                    local[a][b] += wk * (dphi[a][0] * dphi[b][0] + dphi[a][1] * dphi[b][1]);
                }
            }
        }
        scatter_scalar(dm, dm.p2_cell_dofs(t), local, trips);
    }
    return from_triplets(dm.num_dofs(), dm.num_dofs(), trips);
}

SparseMatrix assemble_mass(const DofMap& dm)
{
    require_p2(dm, "assemble_mass");
    const Mesh& m = dm.mesh();
    const auto& q = triangle_rule_degree6();
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(36 * dm.components() * m.num_triangles()));
    for (int t = 0; t < m.num_triangles(); ++t) {
        const auto geo = cell_geometry(m, t);
        Local6 local{};
        for (std::size_t k = 0; k < q.size(); ++k) {
            const auto phi = p2_values(q.points[k]);
            const double wk = q.weights[k] * geo.area;
            for (std::size_t a = 0; a < 6; ++a) {
                for (std::size_t b = 0; b < 6; ++b) local[a][b] += wk * phi[a] * phi[b];
            }
        }
        scatter_scalar(dm, dm.p2_cell_dofs(t), local, trips);
    }
    return from_triplets(dm.num_dofs(), dm.num_dofs(), trips);
}

SparseMatrix assemble_convection(const DofMap& dm, const Field& wind)
{
    require_p2(dm, "assemble_convection");
    if (!wind.dofmap || wind.dofmap->family() != Family::p2_vector) {
        throw std::invalid_argument("assemble_convection: wind must be a P2 vector field");
    }
    require_same_mesh(dm, *wind.dofmap, "assemble_convection");
    const Mesh& m = dm.mesh();
    const auto& q = triangle_rule_degree6();
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(36 * dm.components() * m.num_triangles()));
    for (int t = 0; t < m.num_triangles(); ++t) {
        const auto geo = cell_geometry(m, t);
        Local6 local{};
        for (std::size_t k = 0; k < q.size(); ++k) {
            const auto& l = q.points[k];
            const auto phi = p2_values(l);
            const auto dphi = p2_gradients(l, geo.grad_lambda);
            const auto ws = sample_wind(wind, t, l, geo);
            const double wk = q.weights[k] * geo.area;
            for (std::size_t b = 0; b < 6; ++b) {
                const double adv = ws.w[0] * dphi[b][0] + ws.w[1] * dphi[b][1] + 0.5 * ws.div * phi[b];
                for (std::size_t a = 0; a < 6; ++a) local[a][b] += wk * adv * phi[a];
            }
        }
        scatter_scalar(dm, dm.p2_cell_dofs(t), local, trips);
    }
    return from_triplets(dm.num_dofs(), dm.num_dofs(), trips);
}

SparseMatrix assemble_divergence(const DofMap& vel, const DofMap& pres)
{
    if (vel.family() != Family::p2_vector || pres.family() != Family::p1_disc) {
        throw std::invalid_argument("assemble_divergence: needs P2 vector velocity and P1disc pressure");
    }
    require_same_mesh(vel, pres, "assemble_divergence");
    const Mesh& m = vel.mesh();
    const auto& q = triangle_rule_degree6();
    const int n = vel.component_size();
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(36 * m.num_triangles()));
    for (int t = 0; t < m.num_triangles(); ++t) {
        const auto geo = cell_geometry(m, t);
        std::array<std::array<std::array<double, 6>, 2>, 3> local{};
        for (std::size_t k = 0; k < q.size(); ++k) {
            const auto& l = q.points[k];
            const auto dphi = p2_gradients(l, geo.grad_lambda);
            const double wk = q.weights[k] * geo.area;
            for (std::size_t r = 0; r < 3; ++r) {
                for (std::size_t b = 0; b < 6; ++b) {
                    local[r][0][b] += wk * l[r] * dphi[b][0];
                    local[r][1][b] += wk * l[r] * dphi[b][1];
                }
            }
        }
        const auto vd = vel.p2_cell_dofs(t);
        const auto pd = pres.p1_cell_dofs(t);
        for (std::size_t r = 0; r < 3; ++r) {
            for (int c = 0; c < 2; ++c) {
                for (std::size_t b = 0; b < 6; ++b) {
                    trips.emplace_back(pd[r], c * n + vd[b], local[r][static_cast<std::size_t>(c)][b]);
                }
            }
        }
    }
    return from_triplets(pres.num_dofs(), vel.num_dofs(), trips);
}

SparseMatrix assemble_buoyancy(const DofMap& vel, const DofMap& temp, double ri)
{
    if (vel.family() != Family::p2_vector || temp.family() != Family::p2_scalar) {
        throw std::invalid_argument("assemble_buoyancy: needs P2 vector velocity and P2 temperature");
    }
    require_same_mesh(vel, temp, "assemble_buoyancy");
    const Mesh& m = vel.mesh();
    const auto& q = triangle_rule_degree6();
    const int n = vel.component_size();
    std::vector<Triplet> trips;
    if (ri != 0.0) {
        trips.reserve(static_cast<std::size_t>(36 * m.num_triangles()));
        for (int t = 0; t < m.num_triangles(); ++t) {
            const auto geo = cell_geometry(m, t);
            Local6 local{};
            for (std::size_t k = 0; k < q.size(); ++k) {
                const auto phi = p2_values(q.points[k]);
                const double wk = ri * q.weights[k] * geo.area;
                for (std::size_t a = 0; a < 6; ++a) {
                    for (std::size_t b = 0; b < 6; ++b) local[a][b] += wk * phi[a] * phi[b];
                }
            }
            const auto dofs = vel.p2_cell_dofs(t);
            for (std::size_t a = 0; a < 6; ++a) {
                for (std::size_t b = 0; b < 6; ++b) trips.emplace_back(n + dofs[a], dofs[b], local[a][b]);
            }
        }
    }
    return from_triplets(vel.num_dofs(), temp.num_dofs(), trips);
}

SparseMatrix assemble_graddiv(const DofMap& vel, double gamma)
{
    if (vel.family() != Family::p2_vector) throw std::invalid_argument("assemble_graddiv: needs a P2 vector space");
    if (!(gamma >= 0.0)) throw std::invalid_argument("assemble_graddiv: gamma must be non-negative");
    const Mesh& m = vel.mesh();
    const auto& q = triangle_rule_degree6();
    const int n = vel.component_size();
    std::vector<Triplet> trips;
    if (gamma > 0.0) {
        trips.reserve(static_cast<std::size_t>(144 * m.num_triangles()));
        for (int t = 0; t < m.num_triangles(); ++t) {
            const auto geo = cell_geometry(m, t);
            // local[d][c][a][b]: test component d, trial component c
            double local[2][2][6][6] = {};
            for (std::size_t k = 0; k < q.size(); ++k) {
                const auto dphi = p2_gradients(q.points[k], geo.grad_lambda);
                const double wk = gamma * q.weights[k] * geo.area;
                for (int d = 0; d < 2; ++d) {
                    for (int c = 0; c < 2; ++c) {
                        for (std::size_t a = 0; a < 6; ++a) {
                            for (std::size_t b = 0; b < 6; ++b) {
                                local[d][c][a][b] += wk * dphi[a][static_cast<std::size_t>(d)] * dphi[b][static_cast<std::size_t>(c)];
                            }
                        }
                    }
                }
            }
            const auto dofs = vel.p2_cell_dofs(t);
            for (int d = 0; d < 2; ++d) {
                for (int c = 0; c < 2; ++c) {
                    for (std::size_t a = 0; a < 6; ++a) {
                        for (std::size_t b = 0; b < 6; ++b) {
                            trips.emplace_back(d * n + dofs[a], c * n + dofs[b], local[d][c][a][b]);
                        }
                    }
                }
            }
        }
    }
    return from_triplets(vel.num_dofs(), vel.num_dofs(), trips);
}

Vector assemble_load_scalar(const DofMap& dm, const std::function<double(Point)>& func)
{
    if (dm.family() != Family::p2_scalar) throw std::invalid_argument("assemble_load_scalar: needs a P2 scalar space");
    Vector out = Vector::Zero(dm.num_dofs());
    if (!func) return out;
    const Mesh& m = dm.mesh();
    const auto& q = triangle_rule_degree6();
    for (int t = 0; t < m.num_triangles(); ++t) {
        const auto geo = cell_geometry(m, t);
        const auto dofs = dm.p2_cell_dofs(t);
        for (std::size_t k = 0; k < q.size(); ++k) {
            const auto phi = p2_values(q.points[k]);
            const double fv = func(geo.map(q.points[k])) * q.weights[k] * geo.area;
            for (std::size_t a = 0; a < 6; ++a) out[dofs[a]] += fv * phi[a];
        }
    }
    return out;
}

Vector assemble_load_vector(const DofMap& dm, const std::function<Vec2(Point)>& func)
{
    if (dm.family() != Family::p2_vector) throw std::invalid_argument("assemble_load_vector: needs a P2 vector space");
    Vector out = Vector::Zero(dm.num_dofs());
    if (!func) return out;
    const Mesh& m = dm.mesh();
    const auto& q = triangle_rule_degree6();
    const int n = dm.component_size();
    for (int t = 0; t < m.num_triangles(); ++t) {
        const auto geo = cell_geometry(m, t);
        const auto dofs = dm.p2_cell_dofs(t);
        for (std::size_t k = 0; k < q.size(); ++k) {
            const auto phi = p2_values(q.points[k]);
            const Vec2 fv = func(geo.map(q.points[k]));
            const double wk = q.weights[k] * geo.area;
            for (std::size_t a = 0; a < 6; ++a) {
                out[dofs[a]] += wk * fv[0] * phi[a];
                out[n + dofs[a]] += wk * fv[1] * phi[a];
            }
        }
    }
    return out;
}

SparseMatrix assemble_convection_linearized(const DofMap& vel, const Field& u)
{
    if (vel.family() != Family::p2_vector) throw std::invalid_argument("assemble_convection_linearized: needs P2 vector");
    require_same_mesh(vel, *u.dofmap, "assemble_convection_linearized");
    const Mesh& m = vel.mesh();
    const auto& q = triangle_rule_degree6();
    const int n = vel.component_size();
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(144 * m.num_triangles()));
    for (int t = 0; t < m.num_triangles(); ++t) {
        const auto geo = cell_geometry(m, t);
        double local[2][2][6][6] = {};
        for (std::size_t k = 0; k < q.size(); ++k) {
            const auto& l = q.points[k];
            const auto phi = p2_values(l);
            const auto dphi = p2_gradients(l, geo.grad_lambda);
            const double wk = q.weights[k] * geo.area;
            const double uval[2] = {eval_p2(u, 0, t, l), eval_p2(u, 1, t, l)};
            const Vec2 grad[2] = {eval_p2_gradient(u, 0, t, l, geo), eval_p2_gradient(u, 1, t, l, geo)};
            // test e_d psi_a, trial e_c psi_b: psi_a (psi_b d_c u_d + 1/2 d_c psi_b u_d)
            for (int d = 0; d < 2; ++d) {
                for (int c = 0; c < 2; ++c) {
                    const auto cc = static_cast<std::size_t>(c);
                    for (std::size_t a = 0; a < 6; ++a) {
                        for (std::size_t b = 0; b < 6; ++b) {
                            local[d][c][a][b] += wk * phi[a] * (phi[b] * grad[d][cc] + 0.5 * dphi[b][cc] * uval[d]);
                        }
                    }
                }
            }
        }
        const auto dofs = vel.p2_cell_dofs(t);
        for (int d = 0; d < 2; ++d) {
            for (int c = 0; c < 2; ++c) {
                for (std::size_t a = 0; a < 6; ++a) {
                    for (std::size_t b = 0; b < 6; ++b) {
                        trips.emplace_back(d * n + dofs[a], c * n + dofs[b], local[d][c][a][b]);
                    }
                }
            }
        }
    }
    return from_triplets(vel.num_dofs(), vel.num_dofs(), trips);
}

SparseMatrix assemble_transport_linearized(const DofMap& temp, const DofMap& vel, const Field& T)
{
    if (temp.family() != Family::p2_scalar || vel.family() != Family::p2_vector) {
        throw std::invalid_argument("assemble_transport_linearized: needs P2 temperature and P2 vector velocity");
    }
    require_same_mesh(temp, vel, "assemble_transport_linearized");
    const Mesh& m = temp.mesh();
    const auto& q = triangle_rule_degree6();
    const int n = vel.component_size();
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(72 * m.num_triangles()));
    for (int t = 0; t < m.num_triangles(); ++t) {
        const auto geo = cell_geometry(m, t);
        double local[2][6][6] = {};
        for (std::size_t k = 0; k < q.size(); ++k) {
            const auto& l = q.points[k];
            const auto phi = p2_values(l);
            const auto dphi = p2_gradients(l, geo.grad_lambda);
            const double wk = q.weights[k] * geo.area;
            const double tval = eval_p2(T, 0, t, l);
            const Vec2 tgrad = eval_p2_gradient(T, 0, t, l, geo);
            for (int c = 0; c < 2; ++c) {
                const auto cc = static_cast<std::size_t>(c);
                for (std::size_t a = 0; a < 6; ++a) {
                    for (std::size_t b = 0; b < 6; ++b) {
                        local[c][a][b] += wk * phi[a] * (phi[b] * tgrad[cc] + 0.5 * dphi[b][cc] * tval);
                    }
                }
            }
        }
        const auto dofs = temp.p2_cell_dofs(t);
        for (int c = 0; c < 2; ++c) {
            for (std::size_t a = 0; a < 6; ++a) {
                for (std::size_t b = 0; b < 6; ++b) trips.emplace_back(dofs[a], c * n + dofs[b], local[c][a][b]);
            }
        }
    }
    return from_triplets(temp.num_dofs(), vel.num_dofs(), trips);
}

SparseMatrix assemble_blocks(const std::vector<int>& row_sizes, const std::vector<int>& col_sizes,
                             const std::vector<Block>& blocks)
{
    std::vector<int> row_off(row_sizes.size() + 1, 0);
    std::vector<int> col_off(col_sizes.size() + 1, 0);
    for (std::size_t i = 0; i < row_sizes.size(); ++i) row_off[i + 1] = row_off[i] + row_sizes[i];
    for (std::size_t i = 0; i < col_sizes.size(); ++i) col_off[i + 1] = col_off[i] + col_sizes[i];

    std::size_t nnz = 0;
    for (const auto& b : blocks) nnz += static_cast<std::size_t>(b.matrix->nonZeros());
    std::vector<Triplet> trips;
    trips.reserve(nnz);
    for (const auto& b : blocks) {
        const auto& M = *b.matrix;
        if (M.rows() != row_sizes[static_cast<std::size_t>(b.row)] || M.cols() != col_sizes[static_cast<std::size_t>(b.col)]) {
            throw std::invalid_argument("assemble_blocks: block size mismatch");
        }
        const int ro = row_off[static_cast<std::size_t>(b.row)];
        const int co = col_off[static_cast<std::size_t>(b.col)];
        for (int c = 0; c < M.outerSize(); ++c) {
            for (SparseMatrix::InnerIterator it(M, c); it; ++it) {
                trips.emplace_back(ro + static_cast<int>(it.row()), co + c, b.scale * it.value());
            }
        }
    }
    return from_triplets(row_off.back(), col_off.back(), trips);
}

}  // namespace cdapicard
