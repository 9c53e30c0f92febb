// Micro-benchmarks for the cavity problem at a few resolutions.
//   OPENBLAS_CORETYPE=Haswell ./cdapicard_benchmarks --benchmark_filter=Picard

#include "cdapicard/linear_solver.hpp"
#include "cdapicard/solve.hpp"

#include <benchmark/benchmark.h>

using namespace cdapicard;

namespace {

Discretization cavity(int n)
{
    ProblemParams p;
    p.ri = 100.0;
    return Discretization(std::make_shared<const Mesh>(cavity_mesh(n)), p);
}

void BM_CavityMesh(benchmark::State& st)
{
    const int n = static_cast<int>(st.range(0));
    for (auto _ : st) benchmark::DoNotOptimize(cavity_mesh(n));
}
BENCHMARK(BM_CavityMesh)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_AssembleConvection(benchmark::State& st)
{
    const auto disc = cavity(static_cast<int>(st.range(0)));
    const Field wind = interpolate_vector(disc.velocity_space(), [](Point p) { return Vec2{p.y * (1 - p.y), p.x}; });
    for (auto _ : st) benchmark::DoNotOptimize(assemble_convection(*disc.velocity_space(), wind));
    st.counters["dofs"] = disc.velocity_space()->num_dofs();
}
BENCHMARK(BM_AssembleConvection)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_ObservationOperator(benchmark::State& st)
{
    const auto disc = cavity(32);
    const int m = static_cast<int>(st.range(0));
    for (auto _ : st) benchmark::DoNotOptimize(ObservationOperator(disc.temperature_space(), CoarseGrid{m}));
}
BENCHMARK(BM_ObservationOperator)->Arg(4)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_FactorStokes(benchmark::State& st)
{
    const auto disc = cavity(static_cast<int>(st.range(0)));
    const int nv = disc.velocity_space()->num_dofs();
    const int np = disc.pressure_space()->num_dofs();
    const SparseMatrix A = 0.1 * disc.stiffness_vector();
    const SparseMatrix Bt = disc.divergence().transpose();
    LinearSystem sys{assemble_blocks({nv, np}, {nv, np},
                                     {{0, 0, &A, 1.0}, {0, 1, &Bt, -1.0}, {1, 0, &disc.divergence(), -1.0}}),
                     Vector::Ones(nv + np)};
    apply_dirichlet(sys, disc.velocity_constraints().merged(Constraints{{nv}, {0.0}}));
    for (auto _ : st) {
        DirectSolver lu("benchmark");
        lu.factorize(sys.matrix);
        benchmark::DoNotOptimize(lu.solve(sys.rhs));
    }
    st.counters["unknowns"] = nv + np;
}
BENCHMARK(BM_FactorStokes)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_PicardStep(benchmark::State& st)
{
    const auto disc = cavity(static_cast<int>(st.range(0)));
    const State s0 = picard_step(disc, initial_guess(disc));
    for (auto _ : st) benchmark::DoNotOptimize(picard_step(disc, s0));
}
BENCHMARK(BM_PicardStep)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_CdaPicardStep(benchmark::State& st)
{
    const auto disc = cavity(32);
    const int m = static_cast<int>(st.range(0));
    const State s0 = picard_step(disc, initial_guess(disc));
    auto op = std::make_shared<const ObservationOperator>(disc.temperature_space(), CoarseGrid{m});
    const Assimilation a{op, synthesize_observations(s0, *op, 0.0)};
    const auto nudge = NudgeConfig::make(NudgeMode::both, 1000.0, 1000.0);
    for (auto _ : st) benchmark::DoNotOptimize(picard_step(disc, s0, nudge, &a));
}
BENCHMARK(BM_CdaPicardStep)->Arg(4)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_NewtonStep(benchmark::State& st)
{
    const auto disc = cavity(static_cast<int>(st.range(0)));
    const State s0 = picard_step(disc, initial_guess(disc));
    for (auto _ : st) benchmark::DoNotOptimize(newton_step(disc, s0));
}
BENCHMARK(BM_NewtonStep)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace

int main(int argc, char** argv)
{
    ensure_sparse_backend(argv);
    benchmark::Initialize(&argc, argv);
    if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
    benchmark::RunSpecifiedBenchmarks();
    benchmark::Shutdown();
    return 0;
}
