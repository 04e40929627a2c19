#include <doctest.h>

#include <cmath>
#include <map>

#include "nesy/ising.hpp"
#include "nesy/numeric.hpp"
#include "oracles.hpp"

using namespace nesy;

TEST_CASE("field runs from -0.5 to +0.5") {
  CHECK(ising_field(5, 0, 0) == -0.5);
  CHECK(ising_field(5, 4, 4) == 0.5);
  CHECK(ising_field(5, 2, 2) == 0.0);
  CHECK(ising_field(5, 0, 4) == 0.0);
  CHECK(ising_field(1, 0, 0) == 0.0);
}

TEST_CASE("phi agrees with the enumerated distribution") {
  IsingParams p;
  p.n = 3;
  p.H = 0.3;
  p.F = 0.5;
  const auto exact = nesy::testing::ising_exact(3, 0.3, 0.5);
  std::vector<int> a(9, 1), b(9, -1);
  b[4] = 1;
  const double ratio = exact[nesy::testing::ising_index(a)] / exact[nesy::testing::ising_index(b)];
  CHECK(std::log(ratio) == doctest::Approx(ising_phi(p, a) - ising_phi(p, b)).epsilon(1e-12));
}

TEST_CASE("Gibbs samples follow the exact distribution on a 2x2 grid") {
  for (auto [H, F] : {std::pair{0.5, 0.0}, std::pair{-0.5, 0.0}, std::pair{0.3, 0.5}}) {
    CAPTURE(H);
    CAPTURE(F);
    IsingParams p;
    p.n = 2;
    p.H = H;
    p.F = F;
    p.seed = 17;
    p.burn_in = 20;
    IsingSampler sampler(p);
    const std::size_t draws = 40000;
    std::vector<double> freq(16, 0.0);
    for (std::size_t i = 0; i < draws; ++i) freq[nesy::testing::ising_index(sampler.next())] += 1.0 / draws;
    CHECK(nesy::testing::total_variation(freq, nesy::testing::ising_exact(2, H, F)) < 0.02);
  }
}

TEST_CASE("instances carry attributes, labels and a stratified split") {
  IsingParams p;
  p.n = 10;
  p.F = 0.5;
  p.seed = 3;
  const IsingInstance inst = build_instance(p);
  CHECK(inst.graph.node_count() == 100);
  CHECK(inst.graph.atoms_of(inst.graph.signature().id_of("edge")).size() == 180);
  CHECK(majority_share(inst.labels) <= 0.6);
  CHECK(inst.train.size() + inst.val.size() + inst.test.size() == 100);
  CHECK(std::abs(static_cast<int>(inst.train.size()) - 48) <= 1);
  CHECK(std::abs(static_cast<int>(inst.test.size()) - 20) <= 1);
  CHECK(inst.attr[0] == doctest::Approx(-0.25));
  CHECK(inst.attr[99] == doctest::Approx(0.25));
  const RelId label = inst.graph.signature().id_of("Label");
  for (NodeId v = 0; v < 100; ++v) {
    CHECK(inst.graph.value(inst.graph.atom(label, {v})) == std::optional<double>(label_index(inst.labels[v])));
  }
  // Same seed, same instance.
  CHECK(build_instance(p).labels == inst.labels);
}

TEST_CASE("strong positive coupling gives homophilous labelings") {
  IsingParams p;
  p.n = 12;
  p.H = 0.5;
  p.max_majority = 1.0;
  const IsingInstance pos = build_instance(p);
  p.H = -0.5;
  const IsingInstance neg = build_instance(p);
  const RelId edge = pos.graph.signature().id_of("edge");
  CHECK(global_homophily(pos.graph, edge, pos.labels) > 0.7);
  CHECK(global_homophily(neg.graph, edge, neg.labels) < 0.3);
}

TEST_CASE("majority share") {
  const std::vector<int> y{1, 1, -1, 1};
  CHECK(majority_share(y) == 0.75);
  CHECK(majority_share(std::vector<int>{}) == 0.0);
}
