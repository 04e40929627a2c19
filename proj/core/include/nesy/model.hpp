#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nesy/formula.hpp"
#include "nesy/graph.hpp"

namespace nesy {

struct MacroDef {
  std::string name;
  std::vector<TypedVar> params;
  FormulaPtr body;
  SourceSpan span;
};

/// `relation(params) = body;` The body gives P(atom = true) for Boolean
/// relations, or is a SOFTMAX / GNN reference for categorical ones.
struct RelationDef {
  std::string relation;
  std::vector<TypedVar> params;
  FormulaPtr body;
  SourceSpan span;
};

struct ParamDecl {
  std::string name;
  double value = 0.0;
  std::optional<double> lo;
  std::optional<double> hi;
  bool operator==(const ParamDecl&) const = default;
};

/// Named real parameters. Ordered so iteration is deterministic.
class ParameterStore {
 public:
  void set(const std::string& name, double value) { values_[name] = value; }
  bool contains(const std::string& name) const { return values_.count(name) != 0; }
  double get(const std::string& name) const;  // throws EvalError when absent
  const std::map<std::string, double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }

 private:
  std::map<std::string, double> values_;
};

class RBNModel {
 public:
  Signature signature;
  std::vector<MacroDef> macros;
  /// Relation definitions in dependency order.
  std::vector<RelationDef> definitions;
  std::vector<ParamDecl> params;

  const MacroDef* find_macro(std::string_view name) const;
  const RelationDef* find_definition(std::string_view relation) const;
  /// True for relations defined by the model (as opposed to input relations).
  bool is_probabilistic(std::string_view relation) const {
    return find_definition(relation) != nullptr;
  }
  /// Parameter store holding every declared parameter value.
  ParameterStore default_params() const;
  /// Names of all parameters referenced anywhere in the model, sorted.
  std::vector<std::string> referenced_params() const;
};

/// Structural equality of macros, definitions and parameter declarations.
bool structurally_equal(const RBNModel& a, const RBNModel& b);

/// Relations whose atoms occur in the formula, following macro calls.
/// Includes guard atoms and GNN clause atoms.
std::vector<std::string> referenced_relations(const RBNModel& model, const Formula& formula);

/// Replaces every macro call by its body with parameters substituted.
/// Throws BuildError on recursion or arity mismatch.
RBNModel expand_macros(const RBNModel& model);
FormulaPtr expand_macros(const RBNModel& model, const FormulaPtr& formula);

/// Replaces every numeric constant outside guards by a fresh parameter
/// `prefix<k>` initialized with the constant; used for gradient probes.
RBNModel parameterize_constants(const RBNModel& model, const std::string& prefix = "c");

/// Partition in which every probabilistic atom with a stored value is
/// observed; value-less atoms of `map_relations` become MAP atoms and all
/// other value-less atoms unobserved. MAP atoms are ordered by name.
AtomPartition make_partition(const RBNModel& model, const AttributedGraph& graph,
                             const std::vector<std::string>& map_relations = {});

/// Empty iff the partition is disjoint and covers every ground atom of every
/// probabilistic relation.
std::vector<std::string> check_partition(const RBNModel& model, const AttributedGraph& graph,
                                         const AtomPartition& partition);

}  // namespace nesy
