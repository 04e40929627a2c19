#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "nesy/likelihood_graph.hpp"

namespace nesy {

struct SolverParams {
  std::size_t depth = 1;        // lookahead depth d
  std::size_t batch = 1;        // batch size b
  std::size_t max_iterations = 200;
  std::size_t stall_iterations = 3;  // stop after this many |delta| < tolerance
  double tolerance = 1e-9;
  std::size_t restarts = 1;
  std::uint64_t seed = 1;
  /// Gibbs sweeps before the first scoring pass and after every batch flip.
  std::size_t burn_in = 5;
  std::size_t sweeps_per_flip = 1;
  /// Start from a uniformly random configuration (else the current one).
  bool random_init = true;
  std::size_t jobs = 1;
};

struct TraceRow {
  std::size_t restart = 0;
  std::size_t iteration = 0;
  std::size_t flips = 0;
  double log_likelihood = 0.0;
};

struct MAPResult {
  std::vector<int> values;  // indexed like the graph's MAP atoms
  double log_likelihood = 0.0;
  std::size_t best_restart = 0;
  std::vector<double> restart_log_likelihoods;
  std::vector<std::vector<int>> restart_values;
  std::vector<TraceRow> trace;
};

struct Score {
  double delta = 0.0;  // best log-likelihood change over alternative values
  int maxval = 0;
};

/// Log-likelihood change for each alternative value of MAP atom i; the
/// configuration is restored afterwards.
Score score_atom(LikelihoodGraph& lg, std::size_t i);

/// One greedy run on `lg`. Leaves `lg` at the returned configuration.
MAPResult map_inference(LikelihoodGraph& lg, const SolverParams& params,
                        std::size_t restart_index = 0);

using LikelihoodGraphFactory = std::function<std::unique_ptr<LikelihoodGraph>(std::size_t restart)>;

/// `params.restarts` independent runs on graphs from the factory, up to
/// `params.jobs` at a time. Keeps the best run; ties go to the lowest
/// restart index.
MAPResult map_with_restarts(const LikelihoodGraphFactory& factory, const SolverParams& params);

}  // namespace nesy
