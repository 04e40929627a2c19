#pragma once

#include <string>
#include <vector>

#include "nesy/gnn.hpp"
#include "nesy/ising.hpp"
#include "nesy/likelihood_graph.hpp"
#include "nesy/map_solver.hpp"
#include "nesy/model.hpp"

namespace nesy {

/// Slope and offset of the two logistic factors of P(overline_LH = true).
inline constexpr double kLhSlope = 4.39;
inline constexpr double kLhOffset = 2.2;

/// P(overline_LH = true) as a function of hom_hat - predicted homophily.
double lh_curve(double diff);

/// Model text: Label from the GNN `classifier_id` over `feature`, the
/// predicted homophily macro and the overline_LH constraint.
std::string collective_model_text(const std::string& classifier_id,
                                  const std::string& feature = "attr");

/// Parses the collective model over the graph's signature after checking
/// that `classifier_id` is registered (BuildError otherwise), and stores
/// the estimate as observed hom_hat values in `graph`.
RBNModel build_collective_model(const std::string& classifier_id, const ModelRegistry& registry,
                                const HomophilyEstimate& estimate, AttributedGraph& graph,
                                const std::string& feature = "attr");

struct CollectiveOptions {
  std::string feature = "attr";  // or attr_noisy
  std::vector<std::size_t> hidden{4};
  TrainOptions training{};
  std::uint64_t gnn_seed = 1;
  HomophilyOptions homophily{};
  SolverParams solver{.restarts = 3};
  LGOptions lgraph{};
};

struct CollectiveReport {
  double base_accuracy = 0.0;  // classifier arg-max on test nodes
  double map_accuracy = 0.0;   // MAP labels on test nodes
  double map_log_likelihood = 0.0;
  double true_homophily = 0.0;
  double homophily_mae = 0.0;  // mean |estimate - local homophily| over non-train nodes
  std::size_t homophily_iterations = 0;
  std::size_t map_atoms = 0;
  double final_loss = 0.0;  // classifier training loss, when trained here
};

/// Label classifier trained on the instance's train nodes.
GnnModel train_label_classifier(const IsingInstance& instance, const CollectiveOptions& options = {},
                                std::vector<double>* loss_trace = nullptr);

/// Estimates homophily from the train labels and runs MAP over the labels
/// of all non-train nodes with every overline_LH atom observed true.
CollectiveReport run_collective_map(const IsingInstance& instance, const GnnModel& classifier,
                                    const CollectiveOptions& options = {});

/// train_label_classifier followed by run_collective_map.
CollectiveReport run_collective_experiment(const IsingInstance& instance,
                                           const CollectiveOptions& options = {});

}  // namespace nesy
