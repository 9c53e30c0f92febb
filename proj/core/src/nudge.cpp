#include "cdapicard/nudge.hpp"

#include "cdapicard/assemble.hpp"
#include "cdapicard/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace cdapicard {

int CoarseGrid::cell_of(Point p) const
{
    const int i = std::clamp(static_cast<int>(std::floor(p.x * m)), 0, m - 1);
    const int j = std::clamp(static_cast<int>(std::floor(p.y * m)), 0, m - 1);
    return j * m + i;
}

Point CoarseGrid::center(int cell) const
{
    const int i = cell % m;
    const int j = cell / m;
    return {(i + 0.5) / m, (j + 0.5) / m};
}

CoarseGrid CoarseGrid::from_spacing(double H)
{
    if (!(H > 0.0) || H > 1.0) throw std::invalid_argument("CoarseGrid: H must lie in (0, 1]");
    const double inv = 1.0 / H;
    const double r = std::round(inv);
    if (std::abs(inv - r) > 1e-9 * r) throw std::invalid_argument("CoarseGrid: 1/H must be an integer");
    return CoarseGrid{static_cast<int>(r)};
}

ObservationOperator::ObservationOperator(std::shared_ptr<const DofMap> dm, CoarseGrid grid)
    : dm_(std::move(dm)), grid_(grid)
{
    if (!dm_ || dm_->family() != Family::p2_scalar) {
        throw std::invalid_argument("ObservationOperator: needs a P2 scalar space");
    }
    if (grid_.m < 1) throw std::invalid_argument("ObservationOperator: grid needs m >= 1");
    const Mesh& mesh = dm_->mesh();
    const auto& q = triangle_rule_degree6();
    areas_ = Vector::Zero(grid_.num_cells());
    std::vector<Eigen::Triplet<double, int>> trips;
    trips.reserve(static_cast<std::size_t>(6 * q.size()) * static_cast<std::size_t>(mesh.num_triangles()));
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto geo = cell_geometry(mesh, t);
        const auto dofs = dm_->p2_cell_dofs(t);
        for (std::size_t k = 0; k < q.size(); ++k) {
            const int c = grid_.cell_of(geo.map(q.points[k]));
            const double w = q.weights[k] * geo.area;
            const auto phi = p2_values(q.points[k]);
            areas_[c] += w;
            for (std::size_t a = 0; a < 6; ++a) trips.emplace_back(c, dofs[a], w * phi[a]);
        }
    }
    P_.resize(grid_.num_cells(), dm_->num_dofs());
    P_.setFromTriplets(trips.begin(), trips.end());
    for (int c = 0; c < grid_.num_cells(); ++c) {
        if (!(areas_[c] > 0.0)) throw std::invalid_argument("ObservationOperator: coarse cell without fine quadrature points");
    }
    // Row scaling by 1/|c|.
    Vector inv = areas_.cwiseInverse();
    P_ = inv.asDiagonal() * P_;
    P_.makeCompressed();
}

double ObservationOperator::l2_norm_of_means(const Vector& means) const
{
    return std::sqrt(areas_.dot(means.cwiseAbs2()));
}

double ObservationOperator::projection_error(const Field& v, int component) const
{
    const Vector mean = project_P0(*this, v, component);
    const Mesh& mesh = dm_->mesh();
    const auto& q = triangle_rule_degree6();
    double s = 0.0;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto geo = cell_geometry(mesh, t);
        for (std::size_t k = 0; k < q.size(); ++k) {
            const int c = grid_.cell_of(geo.map(q.points[k]));
            const double d = eval_p2(v, component, t, q.points[k]) - mean[c];
            s += q.weights[k] * geo.area * d * d;
        }
    }
    return std::sqrt(s);
}

Vector project_P0(const ObservationOperator& op, const Field& v, int component)
{
    if (!v.dofmap || !v.dofmap->same_mesh(op.dofmap()) || v.dofmap->family() == Family::p1_disc) {
        throw std::invalid_argument("project_P0: field must be P2 on the operator's mesh");
    }
    if (component < 0 || component >= v.dofmap->components()) throw std::out_of_range("project_P0: bad component");
    const int n = v.dofmap->component_size();
    return op.means(v.values.segment(component * n, n));
}

SparseMatrix nudging_matrix(const ObservationOperator& op, double mu, int components)
{
    if (!(mu >= 0.0)) throw std::invalid_argument("nudging_matrix: mu must be non-negative");
    const int n = op.dofmap().num_dofs();
    if (mu == 0.0) return SparseMatrix(components * n, components * n);
    const SparseMatrix& P = op.averaging();
    const Vector scaled = mu * op.cell_areas();
    const SparseMatrix DP = scaled.asDiagonal() * P;
    SparseMatrix Pt = P.transpose();
    const SparseMatrix scalar = Pt * DP;
    if (components == 1) return scalar;
    std::vector<Block> blocks;
    std::vector<int> sizes(static_cast<std::size_t>(components), n);
    for (int c = 0; c < components; ++c) blocks.push_back({c, c, &scalar, 1.0});
    return assemble_blocks(sizes, sizes, blocks);
}

Vector nudging_rhs(const ObservationOperator& op, double mu, const Vector& data_means)
{
    if (!(mu >= 0.0)) throw std::invalid_argument("nudging_rhs: mu must be non-negative");
    if (data_means.size() != op.grid().num_cells()) throw std::invalid_argument("nudging_rhs: data does not match grid");
    const Vector weighted = mu * op.cell_areas().cwiseProduct(data_means);
    return op.averaging().transpose() * weighted;
}

std::string to_string(NudgeMode mode)
{
    switch (mode) {
    case NudgeMode::both: return "both";
    case NudgeMode::u_only: return "u";
    case NudgeMode::t_only: return "t";
    case NudgeMode::off: return "off";
    }
    return "off";
}

NudgeMode parse_nudge_mode(const std::string& s)
{
    if (s == "both") return NudgeMode::both;
    if (s == "u" || s == "u-only") return NudgeMode::u_only;
    if (s == "t" || s == "T" || s == "t-only" || s == "T-only") return NudgeMode::t_only;
    if (s == "off" || s == "none") return NudgeMode::off;
    throw std::invalid_argument("unknown nudging mode '" + s + "' (expected both|u|t|off)");
}

void NudgeConfig::validate() const
{
    if (!(mu_u >= 0.0) || !(mu_T >= 0.0)) throw std::invalid_argument("NudgeConfig: weights must be non-negative");
    if ((mode == NudgeMode::u_only || mode == NudgeMode::off) && mu_T != 0.0) {
        throw std::invalid_argument("NudgeConfig: mode " + to_string(mode) + " requires mu_T = 0");
    }
    if ((mode == NudgeMode::t_only || mode == NudgeMode::off) && mu_u != 0.0) {
        throw std::invalid_argument("NudgeConfig: mode " + to_string(mode) + " requires mu_u = 0");
    }
}

NudgeConfig NudgeConfig::make(NudgeMode mode, double mu_u, double mu_T)
{
    NudgeConfig c;
    c.mode = mode;
    c.mu_u = (mode == NudgeMode::both || mode == NudgeMode::u_only) ? mu_u : 0.0;
    c.mu_T = (mode == NudgeMode::both || mode == NudgeMode::t_only) ? mu_T : 0.0;
    c.validate();
    return c;
}

void ObservationData::validate() const
{
    const auto n = static_cast<Eigen::Index>(grid.num_cells());
    for (const Vector* v : {&ux, &uy, &T, &clean_ux, &clean_uy, &clean_T}) {
        if (v->size() != n) throw std::invalid_argument("ObservationData: cell count does not match grid");
        if (!v->allFinite()) throw std::invalid_argument("ObservationData: non-finite value");
    }
}

namespace {

void add_offset_to_nonzero(Vector& v, double delta)
{
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (v[i] != 0.0) v[i] += delta;
    }
}

}  // namespace

ObservationData synthesize_observations(const State& reference, const ObservationOperator& op, double noise_amplitude)
{
    if (!(noise_amplitude >= 0.0)) throw std::invalid_argument("synthesize_observations: negative noise amplitude");
    ObservationData d;
    d.grid = op.grid();
    d.clean_ux = project_P0(op, reference.u, 0);
    d.clean_uy = project_P0(op, reference.u, 1);
    d.clean_T = project_P0(op, reference.T, 0);
    d.ux = d.clean_ux;
    d.uy = d.clean_uy;
    d.T = d.clean_T;
    d.noise_amplitude = noise_amplitude;
    if (noise_amplitude > 0.0) {
        const double umax = std::max(d.clean_ux.cwiseAbs().maxCoeff(), d.clean_uy.cwiseAbs().maxCoeff());
        d.delta_u = noise_amplitude * umax;
        d.delta_T = noise_amplitude * d.clean_T.cwiseAbs().maxCoeff();
        add_offset_to_nonzero(d.ux, d.delta_u);
        add_offset_to_nonzero(d.uy, d.delta_u);
        add_offset_to_nonzero(d.T, d.delta_T);
    }
    d.validate();
    return d;
}

void write_observations_csv(std::ostream& os, const ObservationData& data)
{
    os << "cell,x_center,y_center,u_mean,v_mean,T_mean,u_noisy,v_noisy,T_noisy\n";
    const auto old = os.precision(17);
    for (int c = 0; c < data.grid.num_cells(); ++c) {
        const Point p = data.grid.center(c);
        os << c << ',' << p.x << ',' << p.y << ',' << data.ux[c] << ',' << data.uy[c] << ',' << data.T[c] << ','
           << (data.ux[c] != data.clean_ux[c]) << ',' << (data.uy[c] != data.clean_uy[c]) << ','
           << (data.T[c] != data.clean_T[c]) << '\n';
    }
    os.precision(old);
}

}  // namespace cdapicard
