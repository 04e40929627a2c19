#include "nesy/formula.hpp"

#include <algorithm>

namespace nesy {

const char* combiner_name(Combiner c) {
  switch (c) {
    case Combiner::sum:
      return "sum";
    case Combiner::mean:
      return "mean";
    case Combiner::lreg:
      return "l-reg";
    case Combiner::invsum:
      return "invsum";
  }
  return "sum";
}

namespace f {
namespace {

std::shared_ptr<Formula> make(FormulaKind kind) {
  auto p = std::make_shared<Formula>();
  p->kind = kind;
  return p;
}

}  // namespace

FormulaPtr constant(double c) {
  auto p = make(FormulaKind::constant);
  p->value = c;
  return p;
}

FormulaPtr param(std::string name) {
  auto p = make(FormulaKind::param);
  p->name = std::move(name);
  return p;
}

FormulaPtr atom(std::string relation, std::vector<Term> terms) {
  auto p = make(FormulaKind::atom);
  p->name = std::move(relation);
  p->terms = std::move(terms);
  return p;
}

FormulaPtr equals_value(std::string relation, std::vector<Term> terms, std::string category) {
  auto p = make(FormulaKind::equals_value);
  p->name = std::move(relation);
  p->terms = std::move(terms);
  p->category = std::move(category);
  return p;
}

FormulaPtr equals_atom(FormulaPtr lhs, FormulaPtr rhs) {
  auto p = make(FormulaKind::equals_atom);
  p->children = {std::move(lhs), std::move(rhs)};
  return p;
}

FormulaPtr term_compare(Term a, Term b, bool negated) {
  auto p = make(FormulaKind::term_compare);
  p->terms = {std::move(a), std::move(b)};
  p->negated = negated;
  return p;
}

FormulaPtr negate(FormulaPtr a) {
  auto p = make(FormulaKind::negate);
  p->children = {std::move(a)};
  return p;
}

FormulaPtr conj(FormulaPtr a, FormulaPtr b) {
  auto p = make(FormulaKind::conj);
  p->children = {std::move(a), std::move(b)};
  return p;
}

FormulaPtr disj(FormulaPtr a, FormulaPtr b) {
  auto p = make(FormulaKind::disj);
  p->children = {std::move(a), std::move(b)};
  return p;
}

FormulaPtr wif(FormulaPtr c, FormulaPtr t, FormulaPtr e) {
  auto p = make(FormulaKind::wif);
  p->children = {std::move(c), std::move(t), std::move(e)};
  return p;
}

FormulaPtr add(FormulaPtr a, FormulaPtr b) {
  auto p = make(FormulaKind::add);
  p->children = {std::move(a), std::move(b)};
  return p;
}

FormulaPtr mul(FormulaPtr a, FormulaPtr b) {
  auto p = make(FormulaKind::mul);
  p->children = {std::move(a), std::move(b)};
  return p;
}

FormulaPtr scale(double c, FormulaPtr a) { return mul(constant(c), std::move(a)); }

FormulaPtr combine(std::vector<FormulaPtr> body, Combiner combiner, std::vector<TypedVar> forall,
                   FormulaPtr where) {
  auto p = make(FormulaKind::combine);
  p->children = std::move(body);
  p->combiner = combiner;
  p->forall = std::move(forall);
  p->where = std::move(where);
  return p;
}

FormulaPtr softmax(std::vector<FormulaPtr> parts) {
  auto p = make(FormulaKind::softmax);
  p->children = std::move(parts);
  return p;
}

FormulaPtr macro(std::string name, std::vector<Term> terms) {
  auto p = make(FormulaKind::macro);
  p->name = std::move(name);
  p->terms = std::move(terms);
  return p;
}

FormulaPtr gnn(std::string id, int num_values, std::vector<std::string> free_vars,
               std::vector<GnnClause> clauses) {
  auto p = make(FormulaKind::gnn);
  p->name = std::move(id);
  p->num_values = num_values;
  p->free_vars = std::move(free_vars);
  p->clauses = std::move(clauses);
  return p;
}

}  // namespace f

bool equal(const FormulaPtr& a, const FormulaPtr& b) {
  if (!a || !b) return !a && !b;
  return equal(*a, *b);
}

namespace {

bool equal_lists(const std::vector<FormulaPtr>& a, const std::vector<FormulaPtr>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!equal(a[i], b[i])) return false;
  }
  return true;
}

}  // namespace

bool equal(const Formula& a, const Formula& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case FormulaKind::constant:
      return a.value == b.value;
    case FormulaKind::param:
      return a.name == b.name;
    case FormulaKind::atom:
    case FormulaKind::macro:
      return a.name == b.name && a.terms == b.terms;
    case FormulaKind::equals_value:
      return a.name == b.name && a.terms == b.terms && a.category == b.category;
    case FormulaKind::term_compare:
      return a.terms == b.terms && a.negated == b.negated;
    case FormulaKind::combine:
      return a.combiner == b.combiner && a.forall == b.forall && equal(a.where, b.where) &&
             equal_lists(a.children, b.children);
    case FormulaKind::gnn: {
      if (a.name != b.name || a.num_values != b.num_values || a.free_vars != b.free_vars ||
          a.clauses.size() != b.clauses.size()) {
        return false;
      }
      for (std::size_t i = 0; i < a.clauses.size(); ++i) {
        const auto& x = a.clauses[i];
        const auto& y = b.clauses[i];
        if (x.forall != y.forall || !equal(x.where, y.where) || !equal_lists(x.atoms, y.atoms)) {
          return false;
        }
      }
      return true;
    }
    default:
      return equal_lists(a.children, b.children);
  }
}

namespace {

void collect_free(const Formula& fm, std::vector<std::string>& bound,
                  std::vector<std::string>& out) {
  auto note = [&](const Term& t) {
    if (!t.is_var()) return;
    if (std::find(bound.begin(), bound.end(), t.name) != bound.end()) return;
    if (std::find(out.begin(), out.end(), t.name) == out.end()) out.push_back(t.name);
  };
  for (const auto& t : fm.terms) note(t);
  if (fm.kind == FormulaKind::combine) {
    const std::size_t mark = bound.size();
    for (const auto& v : fm.forall) bound.push_back(v.name);
    for (const auto& c : fm.children) collect_free(*c, bound, out);
    if (fm.where) collect_free(*fm.where, bound, out);
    bound.resize(mark);
    return;
  }
  if (fm.kind == FormulaKind::gnn) {
    for (const auto& v : fm.free_vars) note(Term::var(v));
    return;
  }
  for (const auto& c : fm.children) collect_free(*c, bound, out);
}

}  // namespace

std::vector<std::string> free_variables(const Formula& formula) {
  std::vector<std::string> bound;
  std::vector<std::string> out;
  collect_free(formula, bound, out);
  return out;
}

}  // namespace nesy
