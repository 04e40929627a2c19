#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "nesy/error.hpp"
#include "nesy/numeric.hpp"
#include "nesy/planning.hpp"

namespace nesy {

Signature watershed_signature() {
  Signature sig;
  for (const char* t : {"sub", "hru", "urb"}) sig.add_node_type(t);
  sig.add({"downstream", 2, ValueRange::boolean(), false, {"sub", "sub"}});
  sig.add({"hru_agr_to_sub", 2, ValueRange::boolean(), false, {"hru", "sub"}});
  sig.add({"hru_urb_to_sub", 2, ValueRange::boolean(), false, {"urb", "sub"}});
  sig.add({"AreaAgr", 1, ValueRange::numeric(0.0, 1e6), false, {"hru"}});
  sig.add({"AreaUrb", 1, ValueRange::numeric(0.0, 1e6), false, {"urb"}});
  sig.add({"LandUseUrb", 1, ValueRange::categorical({"URHD", "URMD", "URLD"}), false, {"urb"}});
  sig.add({"reservoir", 1, ValueRange::boolean(), false, {"sub"}});
  sig.add({"LandUse", 1,
           ValueRange::categorical({kCropNames.begin(), kCropNames.end()}), false, {"hru"}});
  sig.add({"Pollution", 1, ValueRange::categorical({"HIGH", "MEDIUM", "LOW"}), false, {"sub"}});
  sig.add({"all_const", 1, ValueRange::boolean(), false, {"sub"}});
  return sig;
}

Watershed generate_watershed(const WatershedParams& params) {
  Watershed ws;
  ws.params = params;
  const std::size_t subs = std::max<std::size_t>(params.subbasins, 1);
  const std::size_t agr = std::max(params.agr_nodes, subs);
  std::mt19937_64 rng(params.seed);
  ws.graph = AttributedGraph(watershed_signature());
  AttributedGraph& g = ws.graph;

  for (std::size_t i = 0; i < subs; ++i) ws.water.push_back(g.add_node("w" + std::to_string(i), "sub"));
  ws.downstream.assign(subs, std::nullopt);
  for (std::size_t i = 1; i < subs; ++i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    const std::size_t j = pick(rng);
    ws.downstream[i] = j;
    g.set_value("downstream", std::array<NodeId, 2>{ws.water[i], ws.water[j]}, 1.0);
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double log_lo = std::log(params.area_lo);
  const double log_hi = std::log(params.area_hi);
  auto area = [&] { return std::exp(log_lo + (log_hi - log_lo) * unit(rng)); };
  std::uniform_int_distribution<std::size_t> any_sub(0, subs - 1);

  // Every subbasin gets one land node; the rest are spread at random.
  for (std::size_t k = 0; k < agr; ++k) ws.land_sub.push_back(k < subs ? k : any_sub(rng));
  std::sort(ws.land_sub.begin(), ws.land_sub.end());
  for (std::size_t k = 0; k < agr; ++k) {
    const NodeId l = g.add_node("a" + std::to_string(k), "hru");
    ws.land.push_back(l);
    ws.land_area.push_back(area());
    g.set_value("hru_agr_to_sub", std::array<NodeId, 2>{l, ws.water[ws.land_sub[k]]}, 1.0);
    g.set_value("AreaAgr", std::array<NodeId, 1>{l}, ws.land_area.back());
  }
  std::uniform_int_distribution<int> urb_kind(0, 2);
  for (std::size_t k = 0; k < params.urban_nodes; ++k) {
    const NodeId u = g.add_node("u" + std::to_string(k), "urb");
    ws.urban.push_back(u);
    g.set_value("hru_urb_to_sub", std::array<NodeId, 2>{u, ws.water[any_sub(rng)]}, 1.0);
    g.set_value("AreaUrb", std::array<NodeId, 1>{u}, area());
    g.set_value("LandUseUrb", std::array<NodeId, 1>{u}, urb_kind(rng));
  }
  std::bernoulli_distribution reservoir(0.2);
  for (auto w : ws.water) g.set_value("reservoir", std::array<NodeId, 1>{w}, reservoir(rng) ? 1.0 : 0.0);
  return ws;
}

Watershed watershed_from_graph(const AttributedGraph& graph, double decay) {
  Watershed ws;
  ws.params.decay = decay;
  ws.graph = graph;
  std::vector<std::size_t> sub_index(graph.node_count(), 0);
  for (NodeId v = 0; v < graph.node_count(); ++v) {
    const auto& t = graph.node_type(v);
    if (t == "sub") {
      sub_index[v] = ws.water.size();
      ws.water.push_back(v);
    } else if (t == "hru") {
      ws.land.push_back(v);
    } else if (t == "urb") {
      ws.urban.push_back(v);
    }
  }
  ws.params.subbasins = ws.water.size();
  ws.params.agr_nodes = ws.land.size();
  ws.params.urban_nodes = ws.urban.size();
  const Signature& sig = graph.signature();
  const RelId down = sig.id_of("downstream");
  const RelId to_sub = sig.id_of("hru_agr_to_sub");
  const RelId area = sig.id_of("AreaAgr");
  ws.downstream.assign(ws.water.size(), std::nullopt);
  for (std::size_t i = 0; i < ws.water.size(); ++i) {
    const auto out = graph.out_edges(down, ws.water[i]);
    if (out.size() > 1) throw SchemaError("subbasin " + graph.node_name(ws.water[i]) + " drains into several subbasins");
    if (!out.empty()) ws.downstream[i] = sub_index[out.front()];
  }
  for (auto l : ws.land) {
    const auto out = graph.out_edges(to_sub, l);
    if (out.size() != 1) throw SchemaError("land node " + graph.node_name(l) + " must belong to exactly one subbasin");
    ws.land_sub.push_back(sub_index[out.front()]);
    const NodeId arg[1] = {l};
    const auto a = graph.value(graph.atom(area, arg));
    if (!a || *a <= 0.0) throw SchemaError("land node " + graph.node_name(l) + " needs a positive AreaAgr");
    ws.land_area.push_back(*a);
  }
  return ws;
}

AttributedGraph with_crops(const Watershed& ws, const std::vector<int>& crops) {
  AttributedGraph g = ws.graph;
  for (std::size_t k = 0; k < ws.land.size(); ++k) {
    g.set_value("LandUse", std::array<NodeId, 1>{ws.land[k]}, crops.at(k));
  }
  return g;
}

std::vector<double> pollution_scores(const Watershed& ws, const std::vector<int>& crops) {
  std::vector<double> score(ws.water.size(), 0.0);
  for (std::size_t k = 0; k < ws.land.size(); ++k) {
    score[ws.land_sub[k]] += ws.land_area[k] * kCropLoad[static_cast<std::size_t>(crops.at(k))];
  }
  // Subbasin i drains into some j < i, so a reverse pass sees every
  // upstream score before its downstream neighbor.
  for (std::size_t i = ws.water.size(); i-- > 0;) {
    if (ws.downstream[i]) score[*ws.downstream[i]] += ws.params.decay * score[i];
  }
  return score;
}

ScenarioSet generate_scenarios(const Watershed& ws, std::size_t train_count,
                               std::size_t heldout_count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> crop(0, 3);
  auto draw = [&] {
    std::vector<int> c(ws.land.size());
    for (auto& x : c) x = crop(rng);
    return c;
  };
  std::vector<std::vector<int>> configs;
  std::vector<std::vector<double>> scores;
  for (std::size_t s = 0; s < train_count + heldout_count; ++s) {
    configs.push_back(draw());
    scores.push_back(pollution_scores(ws, configs.back()));
  }
  // Rank-based binning of the pooled training scores.
  struct Entry {
    double score;
    std::size_t scenario, sub;
  };
  std::vector<Entry> pool;
  for (std::size_t s = 0; s < train_count; ++s) {
    for (std::size_t i = 0; i < ws.water.size(); ++i) pool.push_back({scores[s][i], s, i});
  }
  std::stable_sort(pool.begin(), pool.end(),
                   [](const Entry& a, const Entry& b) { return a.score < b.score; });
  std::vector<std::vector<int>> level(train_count + heldout_count, std::vector<int>(ws.water.size()));
  const std::size_t m = pool.size();
  for (std::size_t r = 0; r < m; ++r) {
    level[pool[r].scenario][pool[r].sub] = r < m / 3 ? kLow : r < 2 * m / 3 ? kMedium : kHigh;
  }
  ScenarioSet set;
  if (m > 0) {
    set.low_threshold = pool[m / 3 == 0 ? 0 : m / 3 - 1].score;
    set.high_threshold = pool[2 * m / 3 == 0 ? 0 : 2 * m / 3 - 1].score;
  }
  for (std::size_t s = train_count; s < train_count + heldout_count; ++s) {
    for (std::size_t i = 0; i < ws.water.size(); ++i) {
      const double x = scores[s][i];
      level[s][i] = x <= set.low_threshold ? kLow : x <= set.high_threshold ? kMedium : kHigh;
    }
  }
  for (std::size_t s = 0; s < train_count + heldout_count; ++s) {
    AttributedGraph g = with_crops(ws, configs[s]);
    for (std::size_t i = 0; i < ws.water.size(); ++i) {
      g.set_value("Pollution", std::array<NodeId, 1>{ws.water[i]}, level[s][i]);
    }
    (s < train_count ? set.train : set.heldout).push_back(std::move(g));
  }
  return set;
}

// Layer 1 gives each subbasin a cleanliness score sigma(1 - 0.5 sum load) over
// its land nodes; layer 2 pushes LOW up and HIGH down with the own score
// plus `decay` times the scores of the subbasins draining into it.
GnnModel oracle_pollution_gnn(const Signature& sig, double decay) {
  GnnModel m;
  m.target = "Pollution";
  m.features = {"LandUse"};
  m.edges = {{"hru_agr_to_sub", Direction::incoming}, {"downstream", Direction::incoming}};
  GnnLayer l1;
  l1.in = 4;
  l1.out = 1;
  l1.self.assign(4, 0.0);
  l1.agg = {std::vector<double>(4), std::vector<double>(4, 0.0)};
  for (std::size_t c = 0; c < 4; ++c) l1.agg[0][c] = -0.5 * kCropLoad[c];
  l1.bias = {1.0};
  GnnLayer l2;
  l2.in = 1;
  l2.out = 3;
  l2.self = {-2.0, 0.0, 2.0};
  l2.agg = {{0.0, 0.0, 0.0}, {-2.0 * decay, 0.0, 2.0 * decay}};
  l2.bias = {0.0, 0.0, 0.0};
  m.layers = {l1, l2};
  m.check(sig);
  return m;
}

}  // namespace nesy
