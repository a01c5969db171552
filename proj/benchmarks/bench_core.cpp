#include <benchmark/benchmark.h>

#include <kickns/coupling.hpp>
#include <kickns/fast_solvers.hpp>
#include <kickns/grid_field.hpp>
#include <kickns/ldp_estimation.hpp>
#include <kickns/noise.hpp>
#include <kickns/ns_solver.hpp>
#include <kickns/oracle.hpp>

#include <vector>

using namespace kickns;

namespace {

struct Setup {
    DomainSpec domain;
    NoiseModel noise;
    NavierStokesSolver solver;
    VelocityField state;

    explicit Setup(int n)
        : domain(DomainSpec::make(n, n, 0.05)),
          noise(NoiseModel::build({})),
          solver(domain, noise),
          state(domain) {
        Stream rng(1, 2);
        state = leray_project(random_field(domain, rng));
        state *= 1e-3 / l2_norm(state);
    }
};

}  // namespace

static void BM_LerayProject(benchmark::State& st) {
    Setup s(static_cast<int>(st.range(0)));
    Stream rng(3, 4);
    const VelocityField f = random_field(s.domain, rng);
    for (auto _ : st) benchmark::DoNotOptimize(leray_project(f));
}
BENCHMARK(BM_LerayProject)->Arg(16)->Arg(32)->Arg(64);

static void BM_HelmholtzU(benchmark::State& st) {
    const int n = static_cast<int>(st.range(0));
    const FastSolvers& fs = FastSolvers::get(n, n);
    std::vector<double> rhs(static_cast<std::size_t>(n - 1) * n, 1.0);
    for (auto _ : st) {
        fs.helmholtz_u(rhs, 0.01);
        benchmark::DoNotOptimize(rhs.data());
    }
}
BENCHMARK(BM_HelmholtzU)->Arg(32)->Arg(64);

static void BM_SolverStep(benchmark::State& st) {
    Setup s(static_cast<int>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(s.solver.step(s.state, nullptr, 1e-2));
}
BENCHMARK(BM_SolverStep)->Arg(16)->Arg(32)->Arg(64);

static void BM_SolvePeriod(benchmark::State& st) {
    Setup s(32);
    Stream rng(5, 6);
    const KickRealization kick = sample_kick(s.noise, rng);
    for (auto _ : st) benchmark::DoNotOptimize(s.solver.solve_period(s.state, kick));
}
BENCHMARK(BM_SolvePeriod)->Unit(benchmark::kMillisecond);

static void BM_HopcroftKarp(benchmark::State& st) {
    const auto n = static_cast<int>(st.range(0));
    Stream rng(7, 8);
    std::vector<Eigen::VectorXd> a, b;
    for (int i = 0; i < n; ++i) {
        a.push_back(Eigen::VectorXd::NullaryExpr(4, [&] { return rng.uniform(); }));
        b.push_back(Eigen::VectorXd::NullaryExpr(4, [&] { return rng.uniform(); }));
    }
    for (auto _ : st) benchmark::DoNotOptimize(k_eps_distance(a, b, 0.3));
}
BENCHMARK(BM_HopcroftKarp)->Arg(128)->Arg(512);

static void BM_CloningOracle(benchmark::State& st) {
    Stream rng(9, 10);
    const FiniteChain chain = random_chain(5, rng);
    const Potential v = Potential::tabulated(Eigen::VectorXd::LinSpaced(5, -0.5, 0.5));
    QOptions opt;
    opt.n = 200;
    opt.particles = static_cast<std::size_t>(st.range(0));
    for (auto _ : st) benchmark::DoNotOptimize(estimate_Q(chain, v, {0}, opt).value);
}
BENCHMARK(BM_CloningOracle)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
