// Serial reference vs OpenMP kernels. Arg 0 = serial, 1 = parallel.

#include <random>

#include <benchmark/benchmark.h>

#include "rvelle/lle.hpp"
#include "rvelle/phase_field.hpp"
#include "rvelle/pipeline.hpp"

using namespace rvelle;

namespace {

Exec exec_of(const benchmark::State& s) { return s.range(0) == 0 ? Exec::serial : Exec::parallel; }

const RowMatrix& cloud() {
  static const RowMatrix X = [] {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    RowMatrix m(600, 1089);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
    return m;
  }();
  return X;
}

GenerationConfig desk() {
  GenerationConfig cfg;
  cfg.mesh = {320.0, 32, 128.0};
  return cfg;
}

void BM_knn_all(benchmark::State& s) {
  for (auto _ : s) benchmark::DoNotOptimize(knn_all(cloud(), 10, exec_of(s)));
}

void BM_fit(benchmark::State& s) {
  for (auto _ : s) benchmark::DoNotOptimize(fit(cloud(), 10, 20, 1e-3, exec_of(s)));
}

void BM_displacement_solve(benchmark::State& s) {
  const auto cfg = desk();
  const RveMesh mesh = build_mesh(cfg.mesh, cfg.material.l);
  PhaseFieldSolver solver(mesh, cfg.material, exec_of(s));
  const Eigen::VectorXd d = Eigen::VectorXd::Zero(mesh.node_count());
  for (auto _ : s) benchmark::DoNotOptimize(solver.solve_displacement(d, cfg.load, {}));
}

void BM_generate_dataset(benchmark::State& s) {
  const auto cfg = desk();
  for (auto _ : s) benchmark::DoNotOptimize(generate_dataset(16, cfg, 5, exec_of(s)));
}

}  // namespace

BENCHMARK(BM_knn_all)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_fit)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_displacement_solve)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_generate_dataset)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
