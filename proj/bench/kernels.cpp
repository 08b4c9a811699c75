// SPDX-License-Identifier: Apache-2.0
//
// OpenMP kernels against their serial references on an assembled volume pair.

#include <benchmark/benchmark.h>

#include "openbook/fem.hpp"
#include "openbook/spec_io.hpp"

using namespace openbook;

namespace
{

const FemPair &slab_pair()
{
  static const FemPair pair = [] {
    OpenBookSpec spec = load_spec(std::string(OPENBOOK_FIXTURE_DIR) + "/flat3.json");
    spec.finalize();
    VolumeMeshOptions o;
    o.h = 0.05;
    o.layers = 8;
    return assemble_volume(assemble_volume_mesh(spec, 0.1, o).volume);
  }();
  return pair;
}

template <auto Kernel>
void bench_spmv(benchmark::State &state)
{
  const SparseSym &k = slab_pair().stiffness;
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(k.n, -1.0, 1.0);
  Eigen::VectorXd y(k.n);
  for (auto _ : state)
  {
    Kernel(k, x, y);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * k.n);
}

template <auto Kernel>
void bench_spmm(benchmark::State &state)
{
  const SparseSym &k = slab_pair().stiffness;
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(k.n, state.range(0));
  Eigen::MatrixXd y(k.n, state.range(0));
  for (auto _ : state)
  {
    Kernel(k, x, y);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * k.n * state.range(0));
}

}  // namespace

BENCHMARK(bench_spmv<spmv>)->Name("spmv/omp");
BENCHMARK(bench_spmv<spmv_serial>)->Name("spmv/serial");
BENCHMARK(bench_spmm<spmm>)->Name("spmm/omp")->Arg(8)->Arg(16);
BENCHMARK(bench_spmm<spmm_serial>)->Name("spmm/serial")->Arg(8)->Arg(16);

BENCHMARK_MAIN();
