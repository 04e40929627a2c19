#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "nesy/graph.hpp"

namespace nesy {

/// Square-grid Ising labeling with an external field:
///   phi(y) = sum_v y(v) (F f(v) + H sum_{u in N(v)} y(u)),  P(y) ~ exp(phi(y)).
struct IsingParams {
  std::size_t n = 16;
  double H = 0.5;
  double F = 0.0;
  double noise_sigma = 1.0;  // the noisy attribute has standard deviation F * noise_sigma
  std::size_t burn_in = 10;
  std::size_t thinning = 1;
  std::uint64_t seed = 1;
  /// build_instance redraws the labeling (with derived seeds, at most 1000
  /// times) until the larger class holds at most this share of the nodes.
  /// 1 accepts the first draw.
  double max_majority = 0.6;
};

/// Linear field, -0.5 at the top-left corner and +0.5 at the bottom-right.
double ising_field(std::size_t n, std::size_t row, std::size_t col);

/// phi of a row-major +-1 labeling.
double ising_phi(const IsingParams& params, std::span<const int> labels);

/// Gibbs chain over the grid. Starts from a uniform random labeling and runs
/// `burn_in` sweeps; each `next()` runs `thinning` more sweeps (at least one
/// unless no sample has been taken yet) and returns the labeling.
class IsingSampler {
 public:
  explicit IsingSampler(const IsingParams& params);
  const std::vector<int>& next();
  void sweep();
  const std::vector<int>& labels() const { return labels_; }

 private:
  IsingParams params_;
  std::mt19937_64 rng_;
  std::vector<int> labels_;
  std::vector<double> field_;  // 2 F f(v)
  bool fresh_ = true;
};

/// One labeling from a fresh chain seeded with `params.seed`.
std::vector<int> sample_labeling(const IsingParams& params);

struct IsingInstance {
  IsingParams params;
  std::size_t draws = 1;  // labelings sampled until one was accepted
  AttributedGraph graph;
  std::vector<int> labels;  // +-1, row-major
  std::vector<double> attr;
  std::vector<double> attr_noisy;
  std::vector<NodeId> train, val, test;
};

/// Relations of generated instances: edge (symmetric), attr, attr_noisy,
/// Label {neg, pos}, hom_hat and overline_LH. Nodes are named r<row>c<col>.
Signature ising_signature();

/// Share of the more frequent label.
double majority_share(std::span<const int> labels);

/// Samples a labeling, attaches attributes and Label values for every node,
/// and draws a stratified 48/32/20 train/val/test split.
IsingInstance build_instance(const IsingParams& params);

/// Instance from a graph with Label values on every node and a given
/// split; params are left at their defaults.
IsingInstance instance_from_graph(AttributedGraph graph, std::vector<NodeId> train,
                                  std::vector<NodeId> val, std::vector<NodeId> test);

/// Label index (0 = neg, 1 = pos) of a +-1 label.
inline int label_index(int y) { return y > 0 ? 1 : 0; }

// --- homophily ---------------------------------------------------------------------

/// Fraction of v's neighbors sharing v's label; 0 for isolated nodes.
double local_homophily(const AttributedGraph& graph, RelId edge, std::span<const int> labels,
                       NodeId v);
/// Fraction of edges whose endpoints share a label; 0 without edges.
double global_homophily(const AttributedGraph& graph, RelId edge, std::span<const int> labels);

struct HomophilyOptions {
  std::size_t iterations = 100;
  double tolerance = 1e-4;
};

struct HomophilyEstimate {
  std::vector<double> values;  // per node, in [0, 1]
  std::size_t iterations = 0;   // update rounds performed
  std::vector<double> max_change;  // per round
  bool converged = false;
};

/// Neighbor-averaging estimate of local homophily from the labels of the
/// nodes with `is_train` set. Train nodes with train neighbors start from
/// their local homophily over those neighbors, every other node from the
/// homophily over train-train edges (0.5 if there are none). Nodes are
/// updated in place, in node order.
HomophilyEstimate propagate_homophily(const AttributedGraph& graph, RelId edge,
                                      std::span<const int> labels,
                                      const std::vector<char>& is_train,
                                      const HomophilyOptions& options = {});

}  // namespace nesy
