#include "nesy/map_solver.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <random>
#include <thread>

#include "nesy/numeric.hpp"

namespace nesy {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double change(double after, double before) {
  if (after == before) return 0.0;  // also covers -inf to -inf
  return after - before;
}

class Search {
 public:
  Search(LikelihoodGraph& lg, const SolverParams& params, std::size_t restart)
      : lg_(lg), params_(params), restart_(restart), scores_(lg.map_count()) {}

  void sweep(std::size_t n) {
    for (std::size_t s = 0; s < n; ++s) lg_.gibbs_sweep();
  }

  void rescore(const std::vector<std::size_t>& atoms) {
    for (auto i : atoms) scores_[i] = score_atom(lg_, i);
  }

  // Atoms of `subset` ordered by decreasing score; ties keep MAP order,
  // which is sorted by (relation name, arguments).
  std::vector<std::size_t> ranked(const std::vector<std::size_t>& subset) const {
    std::vector<std::size_t> order(subset);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return scores_[a].delta > scores_[b].delta;
    });
    return order;
  }

  std::vector<std::size_t> flip(const std::vector<std::size_t>& atoms) {
    std::vector<std::size_t> flipped;
    for (auto i : atoms) {
      if (lg_.map_value(i) == scores_[i].maxval) continue;
      lg_.set_map_value(i, scores_[i].maxval);
      flipped.push_back(i);
    }
    lg_.evaluate_incremental();
    if (lg_.unobserved_count() > 0) sweep(params_.sweeps_per_flip);
    return flipped;
  }

  std::vector<std::size_t> sibling_union(const std::vector<std::size_t>& atoms,
                                         const std::vector<std::size_t>& subset) {
    std::vector<char> in_subset(lg_.map_count(), 0);
    for (auto i : subset) in_subset[i] = 1;
    std::vector<char> seen(lg_.map_count(), 0);
    std::vector<std::size_t> out;
    for (auto i : atoms) {
      for (auto s : lg_.siblings(i)) {
        if (in_subset[s] && !seen[s]) {
          seen[s] = 1;
          out.push_back(s);
        }
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  // The greedy loop over `subset` with lookahead depth `depth`.
  double run(const std::vector<std::size_t>& subset, std::size_t depth, bool top_level) {
    if (subset.empty()) return lg_.log_likelihood();
    rescore(subset);
    std::size_t stall = 0;
    for (std::size_t iter = 1; iter <= params_.max_iterations; ++iter) {
      const double before = lg_.log_likelihood();
      const auto order = ranked(subset);
      std::size_t positive = 0;
      while (positive < order.size() && scores_[order[positive]].delta > 0.0) ++positive;
      std::size_t flips = 0;
      if (positive > 0) {
        const std::size_t b = std::min(params_.batch, positive);
        const std::vector<std::size_t> top(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(b));
        const auto flipped = flip(top);
        flips = flipped.size();
        rescore(sibling_union(top, subset));
      } else if (depth > 0) {
        const auto saved = lg_.save_state();
        const std::size_t b = std::min(params_.batch, order.size());
        const std::vector<std::size_t> top(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(b));
        const auto flipped = flip(top);
        auto rest = sibling_union(top, subset);
        rest.erase(std::remove_if(rest.begin(), rest.end(),
                                  [&](std::size_t s) {
                                    return std::find(top.begin(), top.end(), s) != top.end();
                                  }),
                   rest.end());
        const double after = run(rest, depth - 1, false);
        if (after < before || flipped.empty()) {
          lg_.restore_state(saved);
          if (top_level) trace_.push_back({restart_, iter, 0, lg_.log_likelihood()});
          break;
        }
        flips = flipped.size();
        rescore(subset);
      } else {
        break;
      }
      if (top_level) trace_.push_back({restart_, iter, flips, lg_.log_likelihood()});
      const double delta = change(lg_.log_likelihood(), before);
      stall = std::abs(delta) < params_.tolerance ? stall + 1 : 0;
      if (stall >= params_.stall_iterations) break;
    }
    return lg_.log_likelihood();
  }

  std::vector<TraceRow> take_trace() { return std::move(trace_); }

 private:
  LikelihoodGraph& lg_;
  const SolverParams& params_;
  std::size_t restart_;
  std::vector<Score> scores_;
  std::vector<TraceRow> trace_;
};

}  // namespace

Score score_atom(LikelihoodGraph& lg, std::size_t i) {
  const int current = lg.map_value(i);
  const double base = lg.log_likelihood();
  Score best{kNegInf, current};
  const auto card = static_cast<int>(lg.map_cardinality(i));
  for (int x = 0; x < card; ++x) {
    if (x == current) continue;
    lg.set_map_value(i, x);
    const double delta = change(lg.evaluate_incremental(), base);
    if (delta > best.delta) best = {delta, x};
  }
  lg.set_map_value(i, current);
  lg.evaluate_incremental();
  return best;
}

MAPResult map_inference(LikelihoodGraph& lg, const SolverParams& params,
                        std::size_t restart_index) {
  if (params.random_init) {
    std::mt19937_64 rng(mix_seed(params.seed, restart_index));
    for (std::size_t i = 0; i < lg.map_count(); ++i) {
      std::uniform_int_distribution<int> pick(0, static_cast<int>(lg.map_cardinality(i)) - 1);
      lg.set_map_value(i, pick(rng));
    }
  }
  lg.evaluate_incremental();
  if (lg.unobserved_count() > 0) {
    for (std::size_t s = 0; s < params.burn_in; ++s) lg.gibbs_sweep();
  }
  Search search(lg, params, restart_index);
  std::vector<std::size_t> all(lg.map_count());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  MAPResult result;
  result.trace.push_back({restart_index, 0, 0, lg.log_likelihood()});
  search.run(all, params.depth, true);
  for (auto& row : search.take_trace()) result.trace.push_back(row);
  result.values = lg.map_values();
  result.log_likelihood = lg.log_likelihood();
  result.best_restart = restart_index;
  result.restart_log_likelihoods = {result.log_likelihood};
  result.restart_values = {result.values};
  return result;
}

MAPResult map_with_restarts(const LikelihoodGraphFactory& factory, const SolverParams& params) {
  const std::size_t r = std::max<std::size_t>(params.restarts, 1);
  std::vector<MAPResult> runs(r);
  std::vector<std::exception_ptr> errors(r);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < r; i = next++) {
      try {
        auto lg = factory(i);
        runs[i] = map_inference(*lg, params, i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t jobs = std::clamp<std::size_t>(params.jobs, 1, r);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  MAPResult best;
  std::size_t arg = 0;
  for (std::size_t i = 1; i < r; ++i) {
    if (runs[i].log_likelihood > runs[arg].log_likelihood) arg = i;
  }
  best.values = runs[arg].values;
  best.log_likelihood = runs[arg].log_likelihood;
  best.best_restart = arg;
  for (auto& run : runs) {
    best.restart_log_likelihoods.push_back(run.log_likelihood);
    best.restart_values.push_back(run.values);
    best.trace.insert(best.trace.end(), run.trace.begin(), run.trace.end());
  }
  return best;
}

}  // namespace nesy
