#include <doctest.h>

#include <cmath>

#include "nesy/collective.hpp"
#include "nesy/error.hpp"
#include "nesy/evaluate.hpp"

using namespace nesy;

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("constraint curve values") {
  CHECK(lh_curve(0.0) == doctest::Approx(logistic(2.2) * logistic(2.2)).epsilon(1e-14));
  CHECK(lh_curve(0.0) == doctest::Approx(0.8104).epsilon(1e-4));
  CHECK(lh_curve(1.0) == doctest::Approx(logistic(6.59) * logistic(-2.19)).epsilon(1e-14));
  CHECK(lh_curve(1.0) == doctest::Approx(0.1005).epsilon(1e-3));
  for (double d : {0.1, 0.37, 0.8}) {
    CHECK(lh_curve(d) == lh_curve(-d));
    CHECK(lh_curve(d) < lh_curve(0.0));
  }
}

TEST_CASE("the constraint relation evaluates the curve at the homophily gap") {
  IsingInstance inst = build_instance({.n = 4, .seed = 2, .max_majority = 1.0});
  const RelId edge = inst.graph.signature().id_of("edge");
  HomophilyEstimate est;
  est.values.assign(16, 0.0);
  for (NodeId v = 0; v < 16; ++v) est.values[v] = 0.05 * v;
  ModelRegistry registry;
  registry.add("clf", init_gnn({"Label", {"attr"}, {{"edge", Direction::both}}, {2}, false},
                               inst.graph.signature(), 1));
  const RBNModel m = build_collective_model("clf", registry, est, inst.graph);
  const ParameterStore params;
  EvalContext ctx(inst.graph, params, &m, &registry);
  const RelId lh = inst.graph.signature().id_of("overline_LH");
  for (NodeId v = 0; v < 16; ++v) {
    const double gap = est.values[v] - local_homophily(inst.graph, edge, inst.labels, v);
    const auto dist = atom_distribution(*m.find_definition("overline_LH"), inst.graph.atom(lh, {v}), ctx);
    CHECK(dist[1] == doctest::Approx(lh_curve(gap)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(build_collective_model("missing", registry, est, inst.graph), BuildError);
}

TEST_CASE("collective MAP labels every non-train node") {
  IsingParams p;
  p.n = 6;
  p.F = 0.5;
  p.seed = 4;
  const IsingInstance inst = build_instance(p);
  CollectiveOptions opts;
  opts.training.epochs = 50;
  opts.solver.restarts = 2;
  const CollectiveReport r = run_collective_experiment(inst, opts);
  CHECK(r.map_atoms == 36 - inst.train.size());
  CHECK(r.base_accuracy >= 0.0);
  CHECK(r.map_accuracy <= 1.0);
  CHECK(std::isfinite(r.map_log_likelihood));
  CHECK(r.homophily_iterations <= 100);
}
