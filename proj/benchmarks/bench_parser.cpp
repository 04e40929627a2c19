#include <benchmark/benchmark.h>

#include "nesy/parser.hpp"
#include "nesy/planning.hpp"

using namespace nesy;

namespace {

void BM_ParsePlanningModel(benchmark::State& state) {
  const Signature sig = watershed_signature();
  const std::string text = planning_model_text(0.3);
  for (auto _ : state) benchmark::DoNotOptimize(parse_model(text, sig).ok());
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_ParsePlanningModel);

void BM_FormatPlanningModel(benchmark::State& state) {
  const RBNModel m = parse_model_or_throw(planning_model_text(0.3), watershed_signature());
  for (auto _ : state) benchmark::DoNotOptimize(format_model(m));
}
BENCHMARK(BM_FormatPlanningModel);

}  // namespace
