// Serial reference vs OpenMP path for the three parallel kernels: element
// assembly, partition-of-unity construction and multiscale-space
// construction. The thread count of the parallel runs is the benchmark
// argument; serial runs use the Execution::serial code path.

#include <memory>

#include <benchmark/benchmark.h>
#include <omp.h>

#include "wemsfem/msbasis.hpp"

using namespace wemsfem;

namespace {

struct Fixture {
  std::shared_ptr<const DomainSpec> spec;
  std::shared_ptr<const FineMesh> mesh;
  std::shared_ptr<const CoarseGrid> grid;
  std::shared_ptr<const AssembledSystem> system;
  std::unique_ptr<MultiscaleContext> ctx;
  PartitionOfUnity pu;

  Fixture() {
    ModelOverrides o;
    o.k = 16.0;
    spec = std::make_shared<const DomainSpec>(build_model(ModelId::m1, o));
    mesh = std::make_shared<const FineMesh>(build_fine_mesh(*spec, 1.0 / 128.0));
    grid = std::make_shared<const CoarseGrid>(build_coarse_grid(*spec, *mesh, 1.0 / 8.0));
    system = std::make_shared<const AssembledSystem>(assemble(*spec, *mesh));
    ctx = std::make_unique<MultiscaleContext>(spec, mesh, grid, system);
    pu = build_pu(*ctx, 0.0);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

Execution mode(const benchmark::State& state) {
  const int threads = static_cast<int>(state.range(0));
  omp_set_num_threads(threads);
  return threads > 1 ? Execution::parallel : Execution::serial;
}

void BM_Assemble(benchmark::State& state) {
  const Fixture& f = fixture();
  const Execution exec = mode(state);
  for (auto _ : state) benchmark::DoNotOptimize(assemble(*f.spec, *f.mesh, exec));
}

void BM_BuildPu(benchmark::State& state) {
  const Fixture& f = fixture();
  const Execution exec = mode(state);
  for (auto _ : state) benchmark::DoNotOptimize(build_pu(*f.ctx, 0.0, exec));
}

void BM_BuildSpace(benchmark::State& state) {
  const Fixture& f = fixture();
  const Execution exec = mode(state);
  for (auto _ : state) benchmark::DoNotOptimize(build_space(*f.ctx, f.pu, 2, exec));
}

}  // namespace

BENCHMARK(BM_Assemble)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_BuildPu)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_BuildSpace)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
