#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <sstream>

#include "nesy/error.hpp"
#include "nesy/numeric.hpp"
#include "nesy/parser.hpp"
#include "nesy/planning.hpp"

namespace nesy {

std::string planning_model_text(double lambda, const std::string& gnn_id) {
  std::ostringstream os;
  os << "LandUse([hru]l) = SOFTMAX 1, 1, 1, 1;\n"
     << "Pollution([sub]s) = COMPUTEWITHGNN " << gnn_id << " WithNumValues 3 ForFreeVars (s)\n"
     << "    COMBINE LandUse(l) USINGGNN FORALL l WHERE hru_agr_to_sub(l, s),\n"
     << "    COMBINE LandUse(l) USINGGNN FORALL l, u WHERE (downstream(u, s) & hru_agr_to_sub(l, u));\n"
     << "@profit_land([hru]l) = COMBINE\n";
  for (std::size_t c = 0; c < 4; ++c) {
    os << "    WIF LandUse(l) = " << kCropNames[c] << " THEN (" << format_double(kCropProfit[c])
       << " * AreaAgr(l)) ELSE 0" << (c < 3 ? ",\n" : "\n");
  }
  os << "  WITH sum;\n"
     << "@profit_sub([sub]s) = COMBINE @profit_land(l) WITH sum FORALL l WHERE hru_agr_to_sub(l, s);\n"
     << "@max_profit_sub([sub]s) = COMBINE (5 * AreaAgr(l)) WITH sum FORALL l WHERE hru_agr_to_sub(l, s);\n"
     << "@min_profit_sub([sub]s) = COMBINE (1 * AreaAgr(l)) WITH sum FORALL l WHERE hru_agr_to_sub(l, s);\n"
     << "@inv_maxmin_sub([sub]s) = COMBINE (-1 * @min_profit_sub(s)), @max_profit_sub(s)\n"
     << "  WITH invsum FORALL WHERE true;\n"
     << "@target_s([sub]s) = ((@profit_sub(s) + (-1 * @min_profit_sub(s))) * @inv_maxmin_sub(s));\n"
     << "all_const([sub]s) = WIF " << format_double(lambda) << "\n"
     << "    THEN Pollution(s) = LOW\n"
     << "    ELSE @target_s(s);\n";
  return os.str();
}

AttributedGraph planning_graph(const Watershed& ws) {
  AttributedGraph g = ws.graph;
  for (auto w : ws.water) g.set_value("all_const", std::array<NodeId, 1>{w}, 1.0);
  return g;
}

Objectives expected_objectives(const Watershed& ws, const GnnModel& gnn,
                               const std::vector<int>& crops) {
  Objectives out;
  const AttributedGraph g = with_crops(ws, crops);
  const auto probs = forward(gnn, g);
  const std::size_t k = gnn.classes();
  for (auto w : ws.water) {
    out.p_low.push_back(probs[w * k + kLow]);
    out.expected_low += out.p_low.back();
  }
  std::vector<double> profit(ws.water.size(), 0.0), lo(ws.water.size(), 0.0), hi(ws.water.size(), 0.0);
  for (std::size_t i = 0; i < ws.land.size(); ++i) {
    const double a = ws.land_area[i];
    const auto s = ws.land_sub[i];
    profit[s] += kCropProfit[static_cast<std::size_t>(crops.at(i))] * a;
    lo[s] += a;
    hi[s] += 5.0 * a;
  }
  for (std::size_t s = 0; s < ws.water.size(); ++s) {
    out.profit += profit[s];
    if (hi[s] - lo[s] < 1e-12) {
      throw EvalError("subbasin " + ws.graph.node_name(ws.water[s]) + " has no profit range");
    }
    const double l2 = (profit[s] - lo[s]) / (hi[s] - lo[s]);
    if (l2 < -1e-9 || l2 > 1.0 + 1e-9) {
      throw NumericError("normalized profit " + format_double(l2) + " outside [0, 1]");
    }
    out.normalized_profit.push_back(std::clamp(l2, 0.0, 1.0));
  }
  return out;
}

SweepResult lambda_sweep(const Watershed& ws, const GnnModel& gnn, const SweepOptions& options) {
  SweepResult result;
  const AttributedGraph graph = planning_graph(ws);
  ModelRegistry registry;
  registry.add("pollution", gnn);
  std::map<NodeId, std::size_t> land_index;
  for (std::size_t i = 0; i < ws.land.size(); ++i) land_index.emplace(ws.land[i], i);

  for (double lambda : options.lambdas) {
    const RBNModel model = parse_model_or_throw(planning_model_text(lambda), graph.signature(), "<planning>");
    const AtomPartition partition = make_partition(model, graph, {"LandUse"});
    const ParameterStore params = model.default_params();
    LikelihoodGraphFactory factory = [&](std::size_t restart) {
      LGOptions lgo = options.lgraph;
      lgo.seed = mix_seed(options.lgraph.seed, restart);
      return std::make_unique<LikelihoodGraph>(model, graph, partition, params, &registry, lgo);
    };
    const MAPResult map = map_with_restarts(factory, options.solver);

    std::vector<std::vector<double>> fractions;  // per restart: sub * 4 + crop
    for (std::size_t r = 0; r < map.restart_values.size(); ++r) {
      std::vector<int> crops(ws.land.size(), 0);
      for (std::size_t i = 0; i < partition.map_atoms.size(); ++i) {
        crops[land_index.at(partition.map_atoms[i].args[0])] = map.restart_values[r][i];
      }
      const Objectives obj = expected_objectives(ws, gnn, crops);
      result.points.push_back({lambda, r, obj.expected_low, obj.profit,
                               map.restart_log_likelihoods[r], r == map.best_restart, crops});
      std::vector<double> f(ws.water.size() * 4, 0.0);
      std::vector<double> count(ws.water.size(), 0.0);
      for (std::size_t i = 0; i < crops.size(); ++i) {
        f[ws.land_sub[i] * 4 + static_cast<std::size_t>(crops[i])] += 1.0;
        count[ws.land_sub[i]] += 1.0;
      }
      for (std::size_t j = 0; j < f.size(); ++j) f[j] /= count[j / 4];
      fractions.push_back(std::move(f));
    }
    const auto runs = static_cast<double>(fractions.size());
    for (std::size_t s = 0; s < ws.water.size(); ++s) {
      for (std::size_t c = 0; c < 4; ++c) {
        double mean = 0.0;
        for (const auto& f : fractions) mean += f[s * 4 + c];
        mean /= runs;
        double var = 0.0;
        for (const auto& f : fractions) var += (f[s * 4 + c] - mean) * (f[s * 4 + c] - mean);
        result.composition.push_back(
            {lambda, ws.graph.node_name(ws.water[s]), kCropNames[c], mean, var / runs});
      }
    }
  }
  return result;
}

std::vector<ParetoPoint> pareto_front(const std::vector<ParetoPoint>& points) {
  std::vector<ParetoPoint> sorted(points);
  std::stable_sort(sorted.begin(), sorted.end(), [](const ParetoPoint& a, const ParetoPoint& b) {
    if (a.profit != b.profit) return a.profit > b.profit;
    return a.expected_low > b.expected_low;
  });
  std::vector<ParetoPoint> front;
  for (const auto& p : sorted) {
    if (front.empty() || p.expected_low > front.back().expected_low) front.push_back(p);
  }
  std::reverse(front.begin(), front.end());
  return front;
}

}  // namespace nesy
