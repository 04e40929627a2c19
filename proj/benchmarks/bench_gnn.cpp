#include <benchmark/benchmark.h>

#include "nesy/gnn.hpp"
#include "nesy/ising.hpp"

using namespace nesy;

namespace {

void BM_GnnForward(benchmark::State& state) {
  IsingParams p;
  p.n = static_cast<std::size_t>(state.range(0));
  p.F = 0.5;
  const IsingInstance inst = build_instance(p);
  const GnnModel m = init_gnn({"Label", {"attr"}, {{"edge", Direction::both}}, {4}, false},
                              inst.graph.signature(), 1);
  for (auto _ : state) benchmark::DoNotOptimize(forward(m, inst.graph));
}
BENCHMARK(BM_GnnForward)->Arg(16)->Arg(64)->Unit(benchmark::kMicrosecond);

void BM_GnnTrainEpoch(benchmark::State& state) {
  IsingParams p;
  p.n = 16;
  p.F = 0.5;
  const IsingInstance inst = build_instance(p);
  GnnModel m = init_gnn({"Label", {"attr"}, {{"edge", Direction::both}}, {4}, false}, inst.graph.signature(), 1);
  std::vector<double> grad;
  for (auto _ : state) benchmark::DoNotOptimize(cross_entropy(m, {{&inst.graph, inst.train}}, &grad));
}
BENCHMARK(BM_GnnTrainEpoch)->Unit(benchmark::kMicrosecond);

void BM_Compile(benchmark::State& state) {
  const Signature sig = ising_signature();
  const GnnModel m = init_gnn({"Label", {"attr"}, {{"edge", Direction::both}}, {8, 8}, false}, sig, 1);
  for (auto _ : state) benchmark::DoNotOptimize(compile(m, sig).macros.size());
}
BENCHMARK(BM_Compile)->Unit(benchmark::kMicrosecond);

}  // namespace
