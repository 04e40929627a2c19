#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "nesy/gnn.hpp"
#include "nesy/graph.hpp"
#include "nesy/model.hpp"

namespace nesy {

struct LGOptions {
  /// Samples kept per unobserved atom; forced to 1 when there are none.
  std::size_t samples = 20;
  std::uint64_t seed = 1;
};

enum class LGOp : std::uint8_t {
  constant,
  param,
  input,      // a MAP or unobserved atom's current value
  indicator,  // child value == aux
  equal_pair,
  sum,
  prod,
  negate,  // 1 - a
  disj,    // a + b - ab
  wif,
  sigmoid,
  inverse,
  gnn,            // whole-graph forward pass, width node_count * classes
  atom_bool,      // log P of a Boolean atom: children {p, value}
  atom_softmax,   // children {logits..., value}
  atom_gnn,       // children {gnn, value}, aux = node id
};

/// Computation DAG for the log-likelihood of data, MAP and unobserved atoms.
///
/// Atom values of observed atoms are folded into the graph as constants.
/// Every node is hash-consed, so identical ground sub-formulas are shared;
/// creation order is a topological order. Nodes reachable from an
/// unobserved atom hold one value per sample, all others a single value.
///
/// The log-likelihood is log(mean_k exp(T_k)) where T_k sums the atom
/// log-probabilities of sample k. Per-sample sums use a fixed-shape
/// segment tree, so incremental and full evaluation give identical bits.
///
/// Guards of COMBINE must be decidable at build time: they may not
/// reference MAP or unobserved atoms.
class LikelihoodGraph {
 public:
  LikelihoodGraph(const RBNModel& model, const AttributedGraph& graph,
                  const AtomPartition& partition, const ParameterStore& params,
                  const ModelRegistry* registry = nullptr, const LGOptions& options = {});

  // --- MAP atoms ---
  std::size_t map_count() const { return map_atoms_.size(); }
  const GroundAtom& map_atom(std::size_t i) const { return map_atoms_[i]; }
  std::size_t map_cardinality(std::size_t i) const { return map_card_[i]; }
  int map_value(std::size_t i) const;
  /// Changes a MAP value; takes effect at the next evaluation.
  void set_map_value(std::size_t i, int value);
  std::vector<int> map_values() const;

  /// MAP atoms sharing an atom-probability node with atom i (i included).
  const std::vector<std::size_t>& siblings(std::size_t i);

  // --- unobserved atoms ---
  std::size_t unobserved_count() const { return unobserved_.size(); }
  const GroundAtom& unobserved_atom(std::size_t j) const { return unobserved_[j]; }
  std::size_t sample_count() const { return samples_; }
  int sample_value(std::size_t j, std::size_t k) const;
  /// Unobserved atoms summed out because no other atom depends on them.
  const std::vector<GroundAtom>& pruned_atoms() const { return pruned_; }
  /// One Gibbs pass over every unobserved atom in every sample, followed by
  /// a consistent cache state. Throws NumericError when every value of an
  /// atom has probability 0.
  void gibbs_sweep();

  // --- parameters ---
  void set_param(const std::string& name, double value);
  std::vector<std::string> parameter_names() const;

  // --- evaluation ---
  /// Recomputes every node; returns the log-likelihood.
  double evaluate_full();
  /// Recomputes only nodes depending on inputs changed since the last
  /// evaluation; returns the log-likelihood.
  double evaluate_incremental();
  double log_likelihood() const { return loglik_; }
  /// Number of node evaluations during the last evaluate_* call.
  std::size_t last_visit_count() const { return visits_; }
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t atom_count() const { return leaves_.size(); }

  /// Gradient of the log-likelihood for every parameter, by one reverse
  /// pass over the current caches. Call after an evaluation.
  std::map<std::string, double> gradient();

  /// MAP values plus the sample bank.
  struct State {
    std::vector<double> inputs;
    std::vector<std::mt19937_64> rngs;
  };
  State save_state() const;
  /// Restores a saved state and re-evaluates fully.
  void restore_state(const State& state);

  /// Graphviz rendering of the DAG.
  std::string to_dot() const;

 private:
  struct Node {
    LGOp op = LGOp::constant;
    bool per_sample = false;
    bool has_param = false;
    std::uint32_t width = 1;
    std::int64_t aux = 0;
    std::size_t offset = 0;  // into values_
    std::vector<std::uint32_t> kids;
  };
  struct Builder;
  friend struct Builder;

  double& val(std::uint32_t id, std::size_t k) {
    const Node& n = nodes_[id];
    return values_[n.offset + (n.per_sample ? k * n.width : 0)];
  }
  double val(std::uint32_t id, std::size_t k) const {
    const Node& n = nodes_[id];
    return values_[n.offset + (n.per_sample ? k * n.width : 0)];
  }
  void compute(std::uint32_t id, std::size_t k);
  void compute_all_samples(std::uint32_t id);
  void update_leaves(std::uint32_t id, std::size_t k);
  void rebuild_tree(std::size_t k);
  void finish();
  const std::vector<std::uint32_t>& dependents(std::uint32_t input);
  void resample(std::size_t j, std::size_t k);
  void prune_barren(const std::vector<GroundAtom>& order);
  /// Number of root slots holding node `id`; 0 for non-leaves and pruned leaves.
  std::size_t slot_count(std::uint32_t id) const {
    auto it = leaf_slots_.find(id);
    return it == leaf_slots_.end() ? 0 : it->second.size();
  }

  const AttributedGraph& graph_;
  const ModelRegistry* registry_;
  std::size_t samples_ = 1;

  std::vector<Node> nodes_;
  std::vector<double> values_;
  std::vector<const GnnModel*> gnn_models_;

  std::vector<GroundAtom> map_atoms_;
  std::vector<std::size_t> map_card_;
  std::vector<std::uint32_t> map_inputs_;
  std::vector<GroundAtom> unobserved_;
  std::vector<std::size_t> unobserved_card_;
  std::vector<std::uint32_t> unobserved_inputs_;
  std::vector<GroundAtom> pruned_;
  std::map<std::string, std::uint32_t> param_nodes_;

  std::vector<std::vector<std::uint32_t>> parents_;
  std::unordered_map<std::uint32_t, std::vector<std::uint32_t>> dependents_;
  std::vector<std::vector<std::size_t>> siblings_;
  std::vector<bool> siblings_ready_;

  // Atom log-probability leaves: leaves_[i] is a node id; one segment tree
  // per sample over the leaves.
  std::vector<std::uint32_t> leaves_;
  std::unordered_map<std::uint32_t, std::vector<std::uint32_t>> leaf_slots_;
  std::size_t tree_size_ = 1;
  std::vector<std::vector<double>> trees_;

  std::vector<std::uint32_t> dirty_;
  std::vector<std::mt19937_64> rngs_;
  std::vector<std::uint64_t> stamp_;
  std::uint64_t epoch_ = 0;
  double loglik_ = 0.0;
  std::size_t visits_ = 0;
};

}  // namespace nesy
