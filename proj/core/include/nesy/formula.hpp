#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace nesy {

/// Location in a model source file. `line` and `column` are 1-based,
/// `offset` is a 0-based byte offset. A default span (line 0) means
/// "synthesized, no source".
struct SourceSpan {
  std::size_t line = 0;
  std::size_t column = 0;
  std::size_t offset = 0;
};

/// Argument of an atom: a variable name or a quoted node id.
struct Term {
  enum class Kind : std::uint8_t { variable, node };
  Kind kind = Kind::variable;
  std::string name;

  static Term var(std::string n) { return {Kind::variable, std::move(n)}; }
  static Term node(std::string n) { return {Kind::node, std::move(n)}; }
  bool is_var() const { return kind == Kind::variable; }
  bool operator==(const Term&) const = default;
};

/// Variable declaration with an optional node-type restriction (`[type]v`).
struct TypedVar {
  std::string name;
  std::string type;
  bool operator==(const TypedVar&) const = default;
};

enum class Combiner : std::uint8_t { sum, mean, lreg, invsum };

const char* combiner_name(Combiner c);

enum class FormulaKind : std::uint8_t {
  constant,      // value
  param,         // name
  atom,          // name(terms)
  equals_value,  // name(terms) = category
  equals_atom,   // children[0] = children[1], both atoms
  term_compare,  // terms[0] = terms[1], negated for !=
  negate,        // !children[0]
  conj,          // children[0] & children[1]
  disj,          // children[0] | children[1]
  wif,           // WIF c THEN t ELSE e
  add,
  mul,
  combine,
  softmax,
  macro,  // @name(terms)
  gnn,    // COMPUTEWITHGNN
};

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

/// `COMBINE atoms USINGGNN [FORALL vars] [WHERE guard]` input clause of a GNN
/// reference. `atoms` holds atom formulas.
struct GnnClause {
  std::vector<FormulaPtr> atoms;
  std::vector<TypedVar> forall;
  FormulaPtr where;
};

/// Probability-formula AST node. Immutable once built; shared freely.
struct Formula {
  FormulaKind kind = FormulaKind::constant;
  double value = 0.0;
  /// Relation, parameter, macro or GNN id, depending on kind.
  std::string name;
  /// Category name for equals_value.
  std::string category;
  std::vector<Term> terms;
  std::vector<FormulaPtr> children;
  Combiner combiner = Combiner::sum;
  std::vector<TypedVar> forall;
  FormulaPtr where;
  bool negated = false;
  int num_values = 0;
  std::vector<std::string> free_vars;
  std::vector<GnnClause> clauses;
  SourceSpan span;
};

namespace f {

FormulaPtr constant(double c);
FormulaPtr param(std::string name);
FormulaPtr atom(std::string relation, std::vector<Term> terms);
FormulaPtr equals_value(std::string relation, std::vector<Term> terms, std::string category);
FormulaPtr equals_atom(FormulaPtr lhs, FormulaPtr rhs);
FormulaPtr term_compare(Term a, Term b, bool negated);
FormulaPtr negate(FormulaPtr a);
FormulaPtr conj(FormulaPtr a, FormulaPtr b);
FormulaPtr disj(FormulaPtr a, FormulaPtr b);
FormulaPtr wif(FormulaPtr c, FormulaPtr t, FormulaPtr e);
FormulaPtr add(FormulaPtr a, FormulaPtr b);
FormulaPtr mul(FormulaPtr a, FormulaPtr b);
FormulaPtr scale(double c, FormulaPtr a);
FormulaPtr combine(std::vector<FormulaPtr> body, Combiner combiner,
                   std::vector<TypedVar> forall = {}, FormulaPtr where = nullptr);
FormulaPtr softmax(std::vector<FormulaPtr> parts);
FormulaPtr macro(std::string name, std::vector<Term> terms);
FormulaPtr gnn(std::string id, int num_values, std::vector<std::string> free_vars,
               std::vector<GnnClause> clauses);

}  // namespace f

/// Structural equality, ignoring source spans.
bool equal(const Formula& a, const Formula& b);
bool equal(const FormulaPtr& a, const FormulaPtr& b);

/// Variables occurring free in the formula (first-occurrence order).
std::vector<std::string> free_variables(const Formula& formula);

/// Visits every node of the tree in pre-order, including GNN clause parts.
template <class Fn>
void visit(const Formula& formula, Fn&& fn) {
  fn(formula);
  for (const auto& c : formula.children) visit(*c, fn);
  if (formula.where) visit(*formula.where, fn);
  for (const auto& clause : formula.clauses) {
    for (const auto& a : clause.atoms) visit(*a, fn);
    if (clause.where) visit(*clause.where, fn);
  }
}

}  // namespace nesy
