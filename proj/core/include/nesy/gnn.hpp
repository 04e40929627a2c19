#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "nesy/formula.hpp"
#include "nesy/graph.hpp"
#include "nesy/model.hpp"

namespace nesy {

/// Message-passing edge type: aggregate over u with rel(u,v) (incoming),
/// rel(v,u) (outgoing) or either.
struct EdgeSpec {
  std::string relation;
  Direction direction = Direction::incoming;
  bool operator==(const EdgeSpec&) const = default;
};

/// One aggregate-combine-readout layer with sigmoid activation. Matrices
/// are row-major out x in.
struct GnnLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> self;
  std::vector<std::vector<double>> agg;  // one per edge type
  bool readout = false;
  std::vector<double> read;
  std::vector<double> bias;

  bool operator==(const GnnLayer&) const = default;
};

/// Input feature column: a unary relation, one-hot expanded when categorical.
struct FeatureColumn {
  RelId rel = 0;
  int category = -1;  // -1: the stored value itself
};

/// Scalar-semantics GNN node classifier. The final layer's outputs go
/// through a softmax to give a distribution over the target's values.
class GnnModel {
 public:
  std::string target;
  std::vector<std::string> features;  // unary input relations, in order
  std::vector<EdgeSpec> edges;
  std::vector<GnnLayer> layers;

  std::size_t classes() const { return layers.empty() ? 0 : layers.back().out; }
  std::size_t input_width(const Signature& sig) const;
  std::vector<FeatureColumn> columns(const Signature& sig) const;
  /// Throws SchemaError on dimension or signature mismatches.
  void check(const Signature& sig) const;
  std::size_t parameter_count() const;

  bool operator==(const GnnModel&) const = default;
};

struct GnnArchitecture {
  std::string target;
  std::vector<std::string> features;
  std::vector<EdgeSpec> edges;
  std::vector<std::size_t> hidden;  // widths of the hidden layers
  bool readout = false;
};

/// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], seeded.
GnnModel init_gnn(const GnnArchitecture& arch, const Signature& sig, std::uint64_t seed);

/// Node feature matrix (row-major, node_count x input width). Nodes outside
/// a relation's domain and Boolean atoms without value get 0.
std::vector<double> node_features(const GnnModel& model, const AttributedGraph& graph);

/// Per-node class distributions, row-major node_count x classes.
std::vector<double> forward(const GnnModel& model, const AttributedGraph& graph);
/// Same, with an explicit feature matrix; the graph supplies adjacency only.
std::vector<double> forward(const GnnModel& model, const AttributedGraph& graph,
                            const std::vector<double>& features);

/// Training data: a graph plus the nodes whose target value is a label.
struct LabeledGraph {
  const AttributedGraph* graph = nullptr;
  std::vector<NodeId> train_nodes;
};

/// Mean cross-entropy over all train nodes and its gradient, flattened in
/// `flatten` order.
double cross_entropy(const GnnModel& model, const std::vector<LabeledGraph>& data,
                     std::vector<double>* gradient = nullptr);

/// Parameters in a fixed order: per layer self, agg..., read, bias.
std::vector<double> flatten(const GnnModel& model);
void unflatten(GnnModel& model, const std::vector<double>& values);

enum class Optimizer : std::uint8_t { gradient_descent, adam };

struct TrainOptions {
  std::size_t epochs = 300;
  double learning_rate = 0.05;
  /// Learning rate multiplied by this factor every `decay_every` epochs.
  double decay = 1.0;
  std::size_t decay_every = 100;
  Optimizer optimizer = Optimizer::adam;
};

struct TrainResult {
  std::vector<double> loss_trace;  // loss before each epoch, then final
};

/// Full-batch training; throws NumericError when the loss becomes NaN.
TrainResult train(GnnModel& model, const std::vector<LabeledGraph>& data,
                  const TrainOptions& options);

/// Fraction of nodes whose arg-max prediction matches the stored target.
double accuracy(const GnnModel& model, const AttributedGraph& graph,
                const std::vector<NodeId>& nodes);

/// id -> model. Write once, then shared by readers.
class ModelRegistry {
 public:
  void add(const std::string& id, GnnModel model);  // throws on duplicates
  const GnnModel& resolve(const std::string& id) const;  // BuildError if unknown
  bool contains(const std::string& id) const { return models_.count(id) != 0; }

 private:
  std::map<std::string, std::shared_ptr<const GnnModel>> models_;
};

/// Checks that a COMPUTEWITHGNN reference matches the registered model: the
/// clause atoms name exactly the model's feature relations, the guards only
/// use the model's edge relations, and the value count matches. Throws
/// BuildError describing the mismatch.
void check_gnn_reference(const Formula& ref, const GnnModel& model);

struct CompileOptions {
  /// Macro name prefix: hidden units become @<prefix>_h<layer>_<unit>.
  std::string prefix = "gnn";
  /// Emit weights as $<prefix>_... parameters instead of constants.
  bool weights_as_params = false;
};

struct CompiledGnn {
  std::vector<MacroDef> macros;
  FormulaPtr target_body;  // SOFTMAX over the final layer's macros
  std::map<std::string, double> params;
};

/// Probability-formula encoding of the model.
CompiledGnn compile(const GnnModel& model, const Signature& sig,
                    const CompileOptions& options = {});
/// Parameter names of the flattened weights, in `flatten` order.
std::vector<std::string> parameter_names(const GnnModel& model, const std::string& prefix);

GnnModel load_gnn(const std::string& path);
void save_gnn(const GnnModel& model, const std::string& path);
std::string gnn_to_json(const GnnModel& model);
GnnModel gnn_from_json(const std::string& text);

}  // namespace nesy
