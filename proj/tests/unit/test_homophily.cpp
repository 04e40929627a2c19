#include <doctest.h>

#include "nesy/ising.hpp"

using namespace nesy;

namespace {

// Edges 0-1, 0-2, 1-2, 0-3, 3-4; nodes 0, 1, 2 are labeled +, +, -.
AttributedGraph small_graph() {
  AttributedGraph g(ising_signature());
  for (int i = 0; i < 5; ++i) g.add_node("n" + std::to_string(i), "node");
  for (auto [a, b] : {std::pair{0u, 1u}, {0u, 2u}, {1u, 2u}, {0u, 3u}, {3u, 4u}}) {
    g.set_value("edge", std::array<NodeId, 2>{a, b}, 1.0);
  }
  return g;
}

}  // namespace

TEST_CASE("homophily measures") {
  const AttributedGraph g = small_graph();
  const RelId edge = g.signature().id_of("edge");
  const std::vector<int> y{1, 1, -1, 1, -1};
  CHECK(local_homophily(g, edge, y, 0) == doctest::Approx(2.0 / 3.0));
  CHECK(local_homophily(g, edge, y, 4) == 0.0);
  CHECK(global_homophily(g, edge, y) == doctest::Approx(2.0 / 5.0));
}

TEST_CASE("propagation follows the update rule by hand") {
  const AttributedGraph g = small_graph();
  const RelId edge = g.signature().id_of("edge");
  const std::vector<int> y{1, 1, -1, 1, 1};
  const std::vector<char> train{1, 1, 1, 0, 0};

  // Train-train edges: 0-1 same, 0-2 and 1-2 differ, so unlabeled nodes
  // start at 1/3. Local starts: 0.5, 0.5, 0.
  const auto one = propagate_homophily(g, edge, y, train, {.iterations = 1, .tolerance = 0.0});
  REQUIRE(one.iterations == 1);
  CHECK(one.values[0] == doctest::Approx(4.0 / 9.0));   // (0.5 * 2 + 1/3) / 3
  CHECK(one.values[1] == doctest::Approx(0.5));
  CHECK(one.values[2] == doctest::Approx(0.0));
  CHECK(one.values[3] == doctest::Approx(7.0 / 18.0));  // (4/9 + 1/3) / 2
  CHECK(one.values[4] == doctest::Approx(7.0 / 18.0));
  CHECK(one.max_change[0] == doctest::Approx(1.0 / 18.0));

  // Fixed point: x0 = (1 + x3) / 3 and x3 = x4 = (x0 + x4) / 2 give 0.5.
  const auto done = propagate_homophily(g, edge, y, train, {.iterations = 500, .tolerance = 1e-12});
  CHECK(done.converged);
  for (NodeId v : {0u, 3u, 4u}) CHECK(done.values[v] == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("fully labeled graphs give the exact local homophily") {
  IsingParams p;
  p.n = 8;
  p.seed = 5;
  const IsingInstance inst = build_instance(p);
  const RelId edge = inst.graph.signature().id_of("edge");
  const std::vector<char> all(inst.graph.node_count(), 1);
  const auto est = propagate_homophily(inst.graph, edge, inst.labels, all);
  CHECK(est.converged);
  for (NodeId v = 0; v < inst.graph.node_count(); ++v) {
    CHECK(est.values[v] == local_homophily(inst.graph, edge, inst.labels, v));
  }
}

TEST_CASE("propagation converges on 16x16 instances") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    IsingParams p;
    p.seed = seed;
    const IsingInstance inst = build_instance(p);
    const RelId edge = inst.graph.signature().id_of("edge");
    std::vector<char> train(inst.graph.node_count(), 0);
    for (auto v : inst.train) train[v] = 1;
    const auto est = propagate_homophily(inst.graph, edge, inst.labels, train);
    CHECK(est.converged);
    CHECK(est.iterations <= 100);
  }
}
