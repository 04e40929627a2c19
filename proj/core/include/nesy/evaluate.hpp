#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "nesy/formula.hpp"
#include "nesy/graph.hpp"
#include "nesy/model.hpp"

namespace nesy {

class ModelRegistry;

/// Variable assignment; later entries shadow earlier ones.
class Binding {
 public:
  Binding() = default;
  Binding(std::initializer_list<std::pair<std::string, NodeId>> init)
      : slots_(init.begin(), init.end()) {}

  void push(const std::string& var, NodeId v) { slots_.emplace_back(var, v); }
  void pop() { slots_.pop_back(); }
  std::size_t size() const { return slots_.size(); }
  void truncate(std::size_t n) { slots_.resize(n); }
  const NodeId* find(const std::string& var) const {
    for (auto it = slots_.rbegin(); it != slots_.rend(); ++it) {
      if (it->first == var) return &it->second;
    }
    return nullptr;
  }

 private:
  std::vector<std::pair<std::string, NodeId>> slots_;
};

/// Everything evaluation needs besides the formula and the binding. Holds a
/// memo of macro results, so one context must not outlive a graph change.
class EvalContext {
 public:
  EvalContext(const AttributedGraph& graph, const ParameterStore& params,
              const RBNModel* model = nullptr, const ModelRegistry* registry = nullptr)
      : graph_(graph), params_(params), model_(model), registry_(registry) {}

  const AttributedGraph& graph() const { return graph_; }
  const ParameterStore& params() const { return params_; }
  const RBNModel* model() const { return model_; }
  const ModelRegistry* registry() const { return registry_; }

  /// Resolves a term to a node id; throws EvalError for unbound variables or
  /// unknown node names.
  NodeId resolve(const Term& term, const Binding& binding) const;
  RelId relation_id(const std::string& name) const;

  std::unordered_map<std::string, double>& memo() { return memo_; }
  std::unordered_map<std::string, std::vector<double>>& gnn_cache() { return gnn_cache_; }

 private:
  const AttributedGraph& graph_;
  const ParameterStore& params_;
  const RBNModel* model_;
  const ModelRegistry* registry_;
  std::unordered_map<std::string, double> memo_;
  std::unordered_map<std::string, std::vector<double>> gnn_cache_;
};

/// Real value of a formula under the binding. Boolean atoms without a
/// stored value read as false; categorical or numeric atoms without a value
/// raise EvalError. Atoms outside a relation's typed domain read as 0.
double evaluate(const Formula& formula, EvalContext& ctx, Binding& binding);
double evaluate(const Formula& formula, const AttributedGraph& graph, const Binding& binding,
                const ParameterStore& params, const RBNModel* model = nullptr);

/// Probability distribution over the values of `atom` defined by the
/// model's definition for its relation (size 2 for Boolean relations:
/// {P(false), P(true)}). Checks the [0,1] range with tolerance 1e-9.
std::vector<double> atom_distribution(const RelationDef& def, const GroundAtom& atom,
                                      EvalContext& ctx);

/// Enumerates the forall tuples of a combine whose guard holds; calls
/// `fn()` with the binding extended by each satisfying tuple.
template <class Fn>
void for_each_instance(const std::vector<TypedVar>& vars, const Formula* where,
                       EvalContext& ctx, Binding& binding, Fn&& fn);

/// Ground atoms whose values can affect evaluate(formula): body atoms of
/// every satisfying instance plus every atom consulted by a guard.
std::vector<GroundAtom> dependencies(const Formula& formula, EvalContext& ctx, Binding& binding);

/// Nodes that can satisfy `guard` for variable `var` given the binding, or
/// all nodes of the variable's type when the guard gives no adjacency hint.
/// A sorted superset of the true solutions. `pending` lists quantified
/// variables not bound yet, which must not be read from the binding.
std::vector<NodeId> guard_candidates(const TypedVar& var, const Formula* guard,
                                     EvalContext& ctx, const Binding& binding,
                                     std::span<const TypedVar> pending = {});

// --- implementation -------------------------------------------------------

namespace detail {

template <class Fn>
void enumerate(const std::vector<TypedVar>& vars, std::size_t i, const Formula* where,
               EvalContext& ctx, Binding& binding, Fn& fn) {
  if (i == vars.size()) {
    if (where == nullptr || evaluate(*where, ctx, binding) > 0.5) fn();
    return;
  }
  const auto candidates = guard_candidates(
      vars[i], where, ctx, binding, std::span<const TypedVar>(vars).subspan(i + 1));
  for (NodeId v : candidates) {
    binding.push(vars[i].name, v);
    enumerate(vars, i + 1, where, ctx, binding, fn);
    binding.pop();
  }
}

}  // namespace detail

template <class Fn>
void for_each_instance(const std::vector<TypedVar>& vars, const Formula* where,
                       EvalContext& ctx, Binding& binding, Fn&& fn) {
  detail::enumerate(vars, 0, where, ctx, binding, fn);
}

}  // namespace nesy
