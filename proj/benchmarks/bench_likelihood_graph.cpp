#include <benchmark/benchmark.h>

#include <random>

#include "nesy/collective.hpp"
#include "nesy/ising.hpp"
#include "nesy/likelihood_graph.hpp"
#include "nesy/map_solver.hpp"
#include "nesy/parser.hpp"
#include "nesy/planning.hpp"

using namespace nesy;

namespace {

// Collective instance with every non-train label as a MAP atom.
struct CollectiveSetup {
  IsingInstance inst;
  ModelRegistry registry;
  RBNModel model;
  AtomPartition partition;

  explicit CollectiveSetup(std::size_t n) {
    IsingParams p;
    p.n = n;
    p.F = 0.5;
    inst = build_instance(p);
    const RelId edge = inst.graph.signature().id_of("edge");
    const RelId label = inst.graph.signature().id_of("Label");
    std::vector<char> train(inst.graph.node_count(), 0);
    for (auto v : inst.train) train[v] = 1;
    const auto est = propagate_homophily(inst.graph, edge, inst.labels, train);
    registry.add("clf", init_gnn({"Label", {"attr"}, {{"edge", Direction::both}}, {4}, false},
                                 inst.graph.signature(), 1));
    for (NodeId v = 0; v < inst.graph.node_count(); ++v) {
      const std::array<NodeId, 1> arg{v};
      if (!train[v]) inst.graph.erase_value(inst.graph.atom(label, arg));
      inst.graph.set_value("overline_LH", arg, 1.0);
    }
    model = build_collective_model("clf", registry, est, inst.graph);
    partition = make_partition(model, inst.graph, {"Label"});
  }
};

void BM_LikelihoodGraphBuild(benchmark::State& state) {
  CollectiveSetup s(static_cast<std::size_t>(state.range(0)));
  const ParameterStore params;
  for (auto _ : state) {
    LikelihoodGraph lg(s.model, s.inst.graph, s.partition, params, &s.registry);
    benchmark::DoNotOptimize(lg.log_likelihood());
  }
}
BENCHMARK(BM_LikelihoodGraphBuild)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_EvaluateFull(benchmark::State& state) {
  CollectiveSetup s(static_cast<std::size_t>(state.range(0)));
  const ParameterStore params;
  LikelihoodGraph lg(s.model, s.inst.graph, s.partition, params, &s.registry);
  for (auto _ : state) benchmark::DoNotOptimize(lg.evaluate_full());
  state.counters["nodes"] = static_cast<double>(lg.node_count());
}
BENCHMARK(BM_EvaluateFull)->Arg(8)->Arg(16)->Unit(benchmark::kMicrosecond);

void BM_EvaluateIncrementalSingleFlip(benchmark::State& state) {
  CollectiveSetup s(static_cast<std::size_t>(state.range(0)));
  const ParameterStore params;
  LikelihoodGraph lg(s.model, s.inst.graph, s.partition, params, &s.registry);
  lg.evaluate_full();
  std::mt19937_64 rng(1);
  double visits = 0.0;
  for (auto _ : state) {
    const std::size_t i = rng() % lg.map_count();
    lg.set_map_value(i, 1 - lg.map_value(i));
    benchmark::DoNotOptimize(lg.evaluate_incremental());
    visits += static_cast<double>(lg.last_visit_count());
  }
  state.counters["visits"] = benchmark::Counter(visits, benchmark::Counter::kAvgIterations);
  state.counters["nodes"] = static_cast<double>(lg.node_count());
}
BENCHMARK(BM_EvaluateIncrementalSingleFlip)->Arg(8)->Arg(16)->Unit(benchmark::kMicrosecond);

void BM_CollectiveMap(benchmark::State& state) {
  CollectiveSetup s(12);
  const ParameterStore params;
  SolverParams sp;
  sp.restarts = 1;
  for (auto _ : state) {
    LikelihoodGraph lg(s.model, s.inst.graph, s.partition, params, &s.registry);
    benchmark::DoNotOptimize(map_inference(lg, sp).log_likelihood);
  }
}
BENCHMARK(BM_CollectiveMap)->Unit(benchmark::kMillisecond);

void BM_PlanningGibbsSweep(benchmark::State& state) {
  const Watershed ws = generate_watershed({});
  const AttributedGraph g = planning_graph(ws);
  ModelRegistry registry;
  registry.add("pollution", oracle_pollution_gnn(g.signature()));
  const RBNModel m = parse_model_or_throw(planning_model_text(0.5), g.signature());
  const AtomPartition part = make_partition(m, g, {"LandUse"});
  LikelihoodGraph lg(m, g, part, ParameterStore{}, &registry, {.samples = 20, .seed = 1});
  for (auto _ : state) {
    lg.gibbs_sweep();
    benchmark::DoNotOptimize(lg.log_likelihood());
  }
}
BENCHMARK(BM_PlanningGibbsSweep)->Unit(benchmark::kMicrosecond);

}  // namespace
