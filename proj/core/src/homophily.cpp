#include <algorithm>
#include <cmath>

#include "nesy/ising.hpp"

namespace nesy {

double local_homophily(const AttributedGraph& graph, RelId edge, std::span<const int> labels,
                       NodeId v) {
  const auto nb = neighbors(graph, edge, v, Direction::both);
  if (nb.empty()) return 0.0;
  std::size_t same = 0;
  for (auto u : nb) same += labels[u] == labels[v];
  return static_cast<double>(same) / static_cast<double>(nb.size());
}

double global_homophily(const AttributedGraph& graph, RelId edge, std::span<const int> labels) {
  std::size_t total = 0;
  std::size_t same = 0;
  for (const auto& [atom, value] : graph.atoms_of(edge)) {
    if (value < 0.5 || atom.args[0] == atom.args[1]) continue;
    ++total;
    same += labels[atom.args[0]] == labels[atom.args[1]];
  }
  return total ? static_cast<double>(same) / static_cast<double>(total) : 0.0;
}

HomophilyEstimate propagate_homophily(const AttributedGraph& graph, RelId edge,
                                      std::span<const int> labels,
                                      const std::vector<char>& is_train,
                                      const HomophilyOptions& options) {
  const std::size_t n = graph.node_count();
  std::vector<std::vector<NodeId>> train_nb(n), test_nb(n);
  std::size_t train_edges = 0;
  std::size_t train_same = 0;
  for (NodeId v = 0; v < n; ++v) {
    for (auto u : neighbors(graph, edge, v, Direction::both)) {
      if (u == v) continue;
      (is_train[u] ? train_nb[v] : test_nb[v]).push_back(u);
      if (is_train[u] && is_train[v] && v < u) {
        ++train_edges;
        train_same += labels[u] == labels[v];
      }
    }
  }
  const double global =
      train_edges ? static_cast<double>(train_same) / static_cast<double>(train_edges) : 0.5;

  HomophilyEstimate est;
  std::vector<double> local(n, 0.0);
  est.values.assign(n, global);
  for (NodeId v = 0; v < n; ++v) {
    if (!is_train[v] || train_nb[v].empty()) continue;
    std::size_t same = 0;
    for (auto u : train_nb[v]) same += labels[u] == labels[v];
    local[v] = static_cast<double>(same) / static_cast<double>(train_nb[v].size());
    est.values[v] = local[v];
  }

  auto mean_of = [&](const std::vector<NodeId>& nodes, const std::vector<double>& h) {
    double s = 0.0;
    for (auto u : nodes) s += h[u];
    return s / static_cast<double>(nodes.size());
  };
  for (std::size_t it = 0; it < options.iterations; ++it) {
    double change = 0.0;
    for (NodeId v = 0; v < n; ++v) {
      const auto nt = train_nb[v].size();
      const auto nu = test_nb[v].size();
      double h = est.values[v];
      if (nt + nu == 0) {
        // isolated: nothing to average
      } else if (!is_train[v] || nt == 0) {
        std::vector<NodeId> all = train_nb[v];
        all.insert(all.end(), test_nb[v].begin(), test_nb[v].end());
        h = mean_of(all, est.values);
      } else if (nu > 0) {
        const double avg_test = mean_of(test_nb[v], est.values);
        h = (local[v] * static_cast<double>(nt) + avg_test * static_cast<double>(nu)) /
            static_cast<double>(nt + nu);
      } else {
        h = local[v];
      }
      h = std::clamp(h, 0.0, 1.0);
      change = std::max(change, std::abs(h - est.values[v]));
      est.values[v] = h;
    }
    ++est.iterations;
    est.max_change.push_back(change);
    if (change <= options.tolerance) {
      est.converged = true;
      break;
    }
  }
  return est;
}

}  // namespace nesy
