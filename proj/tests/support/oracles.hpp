#pragma once

// Independent reference computations and random problem generators shared by
// the unit tests and the acceptance runner.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "nesy/gnn.hpp"
#include "nesy/graph.hpp"
#include "nesy/likelihood_graph.hpp"
#include "nesy/model.hpp"

namespace nesy::testing {

std::string fixture_path(const std::string& name);

/// Sum over every probabilistic ground atom of log P(stored value), computed
/// with the tree-walking evaluator. Every such atom must have a value.
double enumerate_log_likelihood(const RBNModel& model, const AttributedGraph& graph,
                                const ParameterStore& params, const ModelRegistry* registry = nullptr);

/// Exact log-likelihood of the partition's observed and MAP values, summing
/// out the unobserved atoms by enumeration.
double exact_log_likelihood(const RBNModel& model, const AttributedGraph& graph,
                            const AtomPartition& partition, const std::vector<int>& map_values,
                            const ParameterStore& params, const ModelRegistry* registry = nullptr);

struct BruteForceMap {
  std::vector<int> values;
  double log_likelihood = 0.0;
};

/// Global MAP optimum by enumerating every MAP configuration.
BruteForceMap brute_force_map(const RBNModel& model, const AttributedGraph& graph,
                              const AtomPartition& partition, const ParameterStore& params,
                              const ModelRegistry* registry = nullptr);

/// Enumerated Ising distribution on an n x n grid. Index bit i is set when
/// node i (row-major) has label +1. Built from
/// phi(y) = sum_v y_v (F f(v) + H sum_{u ~ v} y_u), f linear from -0.5 at the
/// top-left to +0.5 at the bottom-right.
std::vector<double> ising_exact(std::size_t n, double H, double F);
std::size_t ising_index(const std::vector<int>& labels);

/// Random 2-layer GNN on a random graph: numeric feature A, categorical
/// feature B, edge relations E (directed) and S (symmetric), target T with
/// three values.
struct GnnProbe {
  GnnModel model;
  AttributedGraph graph;
};
GnnProbe random_gnn_probe(std::uint64_t seed, std::size_t nodes = 8, std::size_t hidden = 4);

/// Random model over six nodes with 12 Boolean MAP atoms (p and q) and
/// every s atom observed, so nothing is sampled.
struct MapProblem {
  RBNModel model;
  AttributedGraph graph;
  AtomPartition partition;
};
MapProblem random_map_problem(std::uint64_t seed);

/// One fixture model with a matching graph, partition and classifiers.
struct FixtureCase {
  std::string name;
  std::string file;
  RBNModel model;
  AttributedGraph graph;
  AtomPartition partition;
  ModelRegistry registry;
};
/// fig1c (MAP star, sampled edges), collective (MAP labels, GNN) and
/// planning (MAP land use, sampled pollution, GNN).
std::vector<FixtureCase> fixture_cases();

/// Random model AST for round-trip fuzzing; names need not resolve.
RBNModel random_model_ast(std::mt19937_64& rng);

/// Total variation distance between two distributions of equal size.
double total_variation(const std::vector<double>& p, const std::vector<double>& q);

}  // namespace nesy::testing
