#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nesy/gnn.hpp"
#include "nesy/graph.hpp"
#include "nesy/likelihood_graph.hpp"
#include "nesy/map_solver.hpp"

namespace nesy {

// Crop values in LandUse order.
enum Crop : int { kCorn = 0, kCosy = 1, kPasture = 2, kSoy = 3 };
inline constexpr std::array<const char*, 4> kCropNames{"CORN", "COSY", "PAST", "SOYB"};
/// Profit per unit area.
inline constexpr std::array<double, 4> kCropProfit{5.0, 2.0, 1.0, 4.0};
/// Nitrogen load per unit area of the synthetic oracle; corn >= soy >= cosy >= pasture.
inline constexpr std::array<double, 4> kCropLoad{1.0, 0.5, 0.1, 0.7};

// Pollution values.
enum PollutionLevel : int { kHigh = 0, kMedium = 1, kLow = 2 };

struct WatershedParams {
  std::size_t subbasins = 6;
  std::size_t agr_nodes = 30;    // at least one per subbasin
  std::size_t urban_nodes = 6;
  double area_lo = 1.0;          // areas are log-uniform in [area_lo, area_hi]
  double area_hi = 50.0;
  double decay = 0.5;            // share of upstream load reaching the next subbasin
  std::uint64_t seed = 1;
};

/// A watershed without crop choices. `graph` holds structure and areas; the
/// probabilistic relations LandUse, Pollution and all_const have no values.
struct Watershed {
  WatershedParams params;
  AttributedGraph graph;
  std::vector<NodeId> water;  // subbasin nodes
  std::vector<NodeId> land;   // agricultural land nodes
  std::vector<NodeId> urban;
  /// Per subbasin (index into `water`): the subbasin it drains into.
  std::vector<std::optional<std::size_t>> downstream;
  /// Per land node (index into `land`): its subbasin index.
  std::vector<std::size_t> land_sub;
  std::vector<double> land_area;
};

/// Node types sub/hru/urb; relations downstream(sub, sub) meaning "drains
/// into", hru_agr_to_sub, hru_urb_to_sub, AreaAgr, AreaUrb, LandUseUrb,
/// reservoir, LandUse, Pollution and all_const.
Signature watershed_signature();

/// Random downstream tree (subbasin i > 0 drains into a random j < i), land
/// nodes spread over subbasins, log-uniform areas.
Watershed generate_watershed(const WatershedParams& params);

/// Watershed view of a graph over watershed_signature(): nodes of type sub,
/// hru and urb in id order, downstream links and land areas. Throws
/// SchemaError on land nodes without exactly one subbasin or area.
Watershed watershed_from_graph(const AttributedGraph& graph, double decay = 0.5);

/// Copy of the watershed graph with LandUse set from `crops` (one per land node).
AttributedGraph with_crops(const Watershed& ws, const std::vector<int>& crops);

/// Ground-truth pollution score per subbasin: own area-weighted load plus
/// `decay` times the scores of the subbasins draining into it.
std::vector<double> pollution_scores(const Watershed& ws, const std::vector<int>& crops);

struct ScenarioSet {
  std::vector<AttributedGraph> train;
  std::vector<AttributedGraph> heldout;
  double low_threshold = 0.0;   // scores <= this are LOW
  double high_threshold = 0.0;  // scores > this are HIGH
};

/// Scenario graphs with random crops and Pollution labels from
/// equal-frequency binning of the pooled training scores (by rank, so each
/// class gets a third of the pool up to rounding). Held-out graphs reuse the
/// training thresholds.
ScenarioSet generate_scenarios(const Watershed& ws, std::size_t train_count,
                               std::size_t heldout_count, std::uint64_t seed);

/// Hand-built pollution classifier whose P(LOW) at every subbasin strictly
/// increases when any land node switches to a crop with a lower load.
/// Loads are counted per land node, not weighted by area.
GnnModel oracle_pollution_gnn(const Signature& sig, double decay = 0.5);

/// Planning model with the tradeoff weight `lambda` as a literal constant.
std::string planning_model_text(double lambda, const std::string& gnn_id = "pollution");

/// The watershed graph with every all_const atom observed true.
AttributedGraph planning_graph(const Watershed& ws);

struct Objectives {
  double expected_low = 0.0;  // sum over subbasins of P(Pollution = LOW)
  double profit = 0.0;
  std::vector<double> normalized_profit;  // per subbasin, in [0, 1]
  std::vector<double> p_low;              // per subbasin
};

Objectives expected_objectives(const Watershed& ws, const GnnModel& gnn,
                               const std::vector<int>& crops);

struct ParetoPoint {
  double lambda = 0.0;
  std::size_t restart = 0;
  double expected_low = 0.0;
  double profit = 0.0;
  double log_likelihood = 0.0;
  bool best = false;  // best restart for this lambda
  std::vector<int> crops;
};

struct CompositionRow {
  double lambda = 0.0;
  std::string subbasin;
  std::string crop;
  double mean_fraction = 0.0;  // over restarts
  double variance = 0.0;
};

struct SweepOptions {
  std::vector<double> lambdas{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  SolverParams solver{.restarts = 5};
  LGOptions lgraph{};
};

struct SweepResult {
  std::vector<ParetoPoint> points;
  std::vector<CompositionRow> composition;
};

/// MAP over all LandUse atoms conditioned on all_const = true, for every
/// lambda and restart.
SweepResult lambda_sweep(const Watershed& ws, const GnnModel& gnn, const SweepOptions& options);

/// Points not dominated in (expected_low, profit), sorted by profit.
std::vector<ParetoPoint> pareto_front(const std::vector<ParetoPoint>& points);

}  // namespace nesy
