#include "nesy/collective.hpp"

#include <array>
#include <cmath>
#include <memory>

#include "nesy/error.hpp"
#include "nesy/numeric.hpp"
#include "nesy/parser.hpp"

namespace nesy {

double lh_curve(double diff) {
  return sigmoid(kLhSlope * diff + kLhOffset) * sigmoid(-kLhSlope * diff + kLhOffset);
}

std::string collective_model_text(const std::string& classifier_id, const std::string& feature) {
  return "Label([node]i) = COMPUTEWITHGNN " + classifier_id +
         " WithNumValues 2 ForFreeVars (i)\n"
         "    COMBINE " + feature + "(j) USINGGNN FORALL j WHERE edge(i, j);\n"
         "@predict_hom([node]i) = COMBINE Label(i) = Label(j) WITH mean\n"
         "    FORALL j WHERE (edge(i, j) | edge(j, i));\n"
         "@diff([node]i) = (hom_hat(i) + (-1 * @predict_hom(i)));\n"
         "@lowerbound([node]i) = COMBINE (4.39 * @diff(i)), 2.2 WITH l-reg FORALL;\n"
         "@upperbound([node]i) = COMBINE (-4.39 * @diff(i)), 2.2 WITH l-reg FORALL;\n"
         "overline_LH([node]i) = (@upperbound(i) * @lowerbound(i));\n";
}

RBNModel build_collective_model(const std::string& classifier_id, const ModelRegistry& registry,
                                const HomophilyEstimate& estimate, AttributedGraph& graph,
                                const std::string& feature) {
  if (!registry.contains(classifier_id)) {
    throw BuildError("classifier '" + classifier_id + "' is not registered");
  }
  const RelId hom = graph.signature().id_of("hom_hat");
  for (NodeId v = 0; v < graph.node_count(); ++v) {
    graph.set_value(graph.atom(hom, std::array<NodeId, 1>{v}), estimate.values.at(v));
  }
  return parse_model_or_throw(collective_model_text(classifier_id, feature), graph.signature(),
                              "<collective>");
}

GnnModel train_label_classifier(const IsingInstance& instance, const CollectiveOptions& options,
                                std::vector<double>* loss_trace) {
  const Signature& sig = instance.graph.signature();
  GnnArchitecture arch{"Label", {options.feature}, {{"edge", Direction::both}}, options.hidden, false};
  GnnModel gnn = init_gnn(arch, sig, options.gnn_seed);
  auto trained = train(gnn, {{&instance.graph, instance.train}}, options.training);
  if (loss_trace) *loss_trace = std::move(trained.loss_trace);
  return gnn;
}

CollectiveReport run_collective_experiment(const IsingInstance& instance,
                                           const CollectiveOptions& options) {
  std::vector<double> loss;
  const GnnModel gnn = train_label_classifier(instance, options, &loss);
  CollectiveReport report = run_collective_map(instance, gnn, options);
  report.final_loss = loss.back();
  return report;
}

CollectiveReport run_collective_map(const IsingInstance& instance, const GnnModel& gnn,
                                    const CollectiveOptions& options) {
  CollectiveReport report;
  const AttributedGraph& full = instance.graph;
  const Signature& sig = full.signature();
  const RelId edge = sig.id_of("edge");
  const std::size_t n = full.node_count();
  report.base_accuracy = accuracy(gnn, full, instance.test);

  std::vector<char> is_train(n, 0);
  for (auto v : instance.train) is_train[v] = 1;
  const auto estimate = propagate_homophily(full, edge, instance.labels, is_train, options.homophily);
  report.homophily_iterations = estimate.iterations;
  report.true_homophily = global_homophily(full, edge, instance.labels);
  double err = 0.0;
  std::size_t unlabeled = 0;
  for (NodeId v = 0; v < n; ++v) {
    if (is_train[v]) continue;
    err += std::abs(estimate.values[v] - local_homophily(full, edge, instance.labels, v));
    ++unlabeled;
  }
  report.homophily_mae = unlabeled ? err / static_cast<double>(unlabeled) : 0.0;

  // Working graph: structure and attributes, train labels only, and the
  // constraint atoms observed true.
  AttributedGraph work(sig);
  for (NodeId v = 0; v < n; ++v) work.add_node(full.node_name(v), full.node_type(v));
  for (const char* rel : {"edge", "attr", "attr_noisy"}) {
    for (const auto& [atom, value] : full.atoms_of(sig.id_of(rel))) work.set_value(atom, value);
  }
  const RelId label = sig.id_of("Label");
  const RelId lh = sig.id_of("overline_LH");
  for (auto v : instance.train) {
    const auto atom = work.atom(label, std::array<NodeId, 1>{v});
    work.set_value(atom, *full.value(atom));
  }
  for (NodeId v = 0; v < n; ++v) work.set_value(work.atom(lh, std::array<NodeId, 1>{v}), 1.0);

  const std::string id = "label_gnn";
  ModelRegistry registry;
  registry.add(id, gnn);
  const RBNModel model = build_collective_model(id, registry, estimate, work, gnn.features.front());
  const AtomPartition partition = make_partition(model, work, {"Label"});
  report.map_atoms = partition.map_atoms.size();

  const ParameterStore params = model.default_params();
  LikelihoodGraphFactory factory = [&](std::size_t restart) {
    LGOptions lgo = options.lgraph;
    lgo.seed = mix_seed(options.lgraph.seed, restart);
    return std::make_unique<LikelihoodGraph>(model, work, partition, params, &registry, lgo);
  };
  const MAPResult result = map_with_restarts(factory, options.solver);
  report.map_log_likelihood = result.log_likelihood;

  std::vector<int> predicted(n, -1);
  for (std::size_t i = 0; i < partition.map_atoms.size(); ++i) {
    predicted[partition.map_atoms[i].args[0]] = result.values[i];
  }
  std::size_t correct = 0;
  for (auto v : instance.test) correct += predicted[v] == label_index(instance.labels[v]);
  report.map_accuracy =
      instance.test.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(instance.test.size());
  return report;
}

}  // namespace nesy
