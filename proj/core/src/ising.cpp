#include "nesy/ising.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "nesy/error.hpp"
#include "nesy/numeric.hpp"

namespace nesy {

double ising_field(std::size_t n, std::size_t row, std::size_t col) {
  if (n < 2) return 0.0;
  return static_cast<double>(row + col) / (2.0 * static_cast<double>(n - 1)) - 0.5;
}

namespace {

// Sum of the grid neighbors' labels.
int neighbor_sum(const std::vector<int>& y, std::size_t n, std::size_t r, std::size_t c) {
  int s = 0;
  if (r > 0) s += y[(r - 1) * n + c];
  if (r + 1 < n) s += y[(r + 1) * n + c];
  if (c > 0) s += y[r * n + c - 1];
  if (c + 1 < n) s += y[r * n + c + 1];
  return s;
}

}  // namespace

double ising_phi(const IsingParams& params, std::span<const int> labels) {
  const std::size_t n = params.n;
  const std::vector<int> y(labels.begin(), labels.end());
  double phi = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const double yv = y[r * n + c];
      phi += yv * (params.F * ising_field(n, r, c) + params.H * neighbor_sum(y, n, r, c));
    }
  }
  return phi;
}

IsingSampler::IsingSampler(const IsingParams& params)
    : params_(params), rng_(params.seed), labels_(params.n * params.n) {
  std::bernoulli_distribution coin(0.5);
  for (auto& y : labels_) y = coin(rng_) ? 1 : -1;
  for (std::size_t r = 0; r < params.n; ++r) {
    for (std::size_t c = 0; c < params.n; ++c) {
      field_.push_back(2.0 * params.F * ising_field(params.n, r, c));
    }
  }
  for (std::size_t s = 0; s < params.burn_in; ++s) sweep();
}

// Flipping y(v) changes phi by 2 y(v) (F f(v) + 2 H sum_u y(u)): v's own term
// and v's share of each neighbor's term. Hence P(+1 | rest) below.
void IsingSampler::sweep() {
  const std::size_t n = params_.n;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::array<double, 9> coupling{};
  for (int s = -4; s <= 4; ++s) coupling[static_cast<std::size_t>(s + 4)] = 4.0 * params_.H * s;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const std::size_t v = r * n + c;
      const int s = neighbor_sum(labels_, n, r, c);
      const double p = sigmoid(field_[v] + coupling[static_cast<std::size_t>(s + 4)]);
      labels_[v] = unit(rng_) < p ? 1 : -1;
    }
  }
}

const std::vector<int>& IsingSampler::next() {
  const std::size_t sweeps = fresh_ ? params_.thinning : std::max<std::size_t>(params_.thinning, 1);
  fresh_ = false;
  for (std::size_t s = 0; s < sweeps; ++s) sweep();
  return labels_;
}

std::vector<int> sample_labeling(const IsingParams& params) {
  IsingSampler sampler(params);
  return sampler.next();
}

Signature ising_signature() {
  Signature sig;
  sig.add_node_type("node");
  sig.add({"edge", 2, ValueRange::boolean(), true, {"node", "node"}});
  sig.add({"attr", 1, ValueRange::numeric(-1e6, 1e6), false, {"node"}});
  sig.add({"attr_noisy", 1, ValueRange::numeric(-1e6, 1e6), false, {"node"}});
  sig.add({"Label", 1, ValueRange::categorical({"neg", "pos"}), false, {"node"}});
  sig.add({"hom_hat", 1, ValueRange::numeric(0.0, 1.0), false, {"node"}});
  sig.add({"overline_LH", 1, ValueRange::boolean(), false, {"node"}});
  return sig;
}

double majority_share(std::span<const int> labels) {
  if (labels.empty()) return 0.0;
  const auto pos = static_cast<double>(std::count_if(labels.begin(), labels.end(), [](int y) { return y > 0; }));
  const auto all = static_cast<double>(labels.size());
  return std::max(pos, all - pos) / all;
}

IsingInstance build_instance(const IsingParams& params) {
  IsingInstance inst;
  inst.params = params;
  const std::size_t n = params.n;
  inst.labels = sample_labeling(params);
  for (std::size_t draw = 1; draw < 1000 && majority_share(inst.labels) > params.max_majority; ++draw) {
    IsingParams again = params;
    again.seed = mix_seed(params.seed, 1000 + draw);
    inst.labels = sample_labeling(again);
    inst.draws = draw + 1;
  }
  inst.graph = AttributedGraph(ising_signature());
  AttributedGraph& g = inst.graph;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      g.add_node("r" + std::to_string(r) + "c" + std::to_string(c), "node");
    }
  }
  const RelId edge = g.signature().id_of("edge");
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const auto v = static_cast<NodeId>(r * n + c);
      if (c + 1 < n) g.set_value(g.atom(edge, std::array<NodeId, 2>{v, v + 1}), 1.0);
      if (r + 1 < n) g.set_value(g.atom(edge, std::array<NodeId, 2>{v, static_cast<NodeId>(v + n)}), 1.0);
    }
  }
  std::mt19937_64 rng(mix_seed(params.seed, 1));
  const double scale = params.F * params.noise_sigma;
  std::normal_distribution<double> noise(0.0, 1.0);
  const RelId attr = g.signature().id_of("attr");
  const RelId noisy = g.signature().id_of("attr_noisy");
  const RelId label = g.signature().id_of("Label");
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const auto v = static_cast<NodeId>(r * n + c);
      const double a = params.F * ising_field(n, r, c);
      const double b = scale > 0.0 ? a + scale * noise(rng) : a;
      inst.attr.push_back(a);
      inst.attr_noisy.push_back(b);
      g.set_value(g.atom(attr, std::array<NodeId, 1>{v}), a);
      g.set_value(g.atom(noisy, std::array<NodeId, 1>{v}), b);
      g.set_value(g.atom(label, std::array<NodeId, 1>{v}), label_index(inst.labels[v]));
    }
  }
  // Stratified split: each class is shuffled and cut at 48% and 80%.
  for (int cls : {-1, 1}) {
    std::vector<NodeId> members;
    for (NodeId v = 0; v < inst.labels.size(); ++v) {
      if (inst.labels[v] == cls) members.push_back(v);
    }
    std::shuffle(members.begin(), members.end(), rng);
    const auto m = static_cast<double>(members.size());
    const auto a = static_cast<std::size_t>(std::lround(0.48 * m));
    const auto b = static_cast<std::size_t>(std::lround(0.80 * m));
    for (std::size_t i = 0; i < members.size(); ++i) {
      (i < a ? inst.train : i < b ? inst.val : inst.test).push_back(members[i]);
    }
  }
  std::sort(inst.train.begin(), inst.train.end());
  std::sort(inst.val.begin(), inst.val.end());
  std::sort(inst.test.begin(), inst.test.end());
  return inst;
}

IsingInstance instance_from_graph(AttributedGraph graph, std::vector<NodeId> train,
                                  std::vector<NodeId> val, std::vector<NodeId> test) {
  IsingInstance inst;
  const RelId label = graph.signature().id_of("Label");
  const auto attr = graph.signature().find("attr");
  const auto noisy = graph.signature().find("attr_noisy");
  for (NodeId v = 0; v < graph.node_count(); ++v) {
    const NodeId arg[1] = {v};
    const auto y = graph.value(graph.atom(label, arg));
    if (!y) throw SchemaError("node " + graph.node_name(v) + " has no Label value");
    inst.labels.push_back(*y > 0.5 ? 1 : -1);
    inst.attr.push_back(attr ? graph.value(graph.atom(*attr, arg)).value_or(0.0) : 0.0);
    inst.attr_noisy.push_back(noisy ? graph.value(graph.atom(*noisy, arg)).value_or(0.0) : 0.0);
  }
  inst.graph = std::move(graph);
  inst.train = std::move(train);
  inst.val = std::move(val);
  inst.test = std::move(test);
  return inst;
}

}  // namespace nesy
