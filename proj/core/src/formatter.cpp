#include <cmath>
#include <sstream>

#include "nesy/numeric.hpp"
#include "nesy/parser.hpp"

namespace nesy {
namespace {

// Binding strength; operands weaker than the context get parentheses.
// WIF, COMBINE, SOFTMAX and GNN references extend as far right as possible,
// so they are parenthesized whenever they are not a whole definition.
int precedence(const Formula& fm) {
  switch (fm.kind) {
    case FormulaKind::disj:
      return 1;
    case FormulaKind::conj:
      return 2;
    case FormulaKind::add:
      return 3;
    case FormulaKind::mul:
      return 4;
    case FormulaKind::negate:
      return 5;
    case FormulaKind::constant:
      return fm.value < 0 || std::signbit(fm.value) ? 5 : 7;
    case FormulaKind::equals_value:
    case FormulaKind::equals_atom:
    case FormulaKind::term_compare:
      return 6;
    case FormulaKind::wif:
    case FormulaKind::combine:
    case FormulaKind::softmax:
    case FormulaKind::gnn:
      return 0;
    default:
      return 7;
  }
}

std::string term_text(const Term& t) { return t.is_var() ? t.name : "\"" + t.name + "\""; }

std::string terms_text(const std::vector<Term>& terms) {
  std::string out = "(";
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (i) out += ", ";
    out += term_text(terms[i]);
  }
  return out + ")";
}

std::string vars_text(const std::vector<TypedVar>& vars) {
  std::string out;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (i) out += ", ";
    if (!vars[i].type.empty()) out += "[" + vars[i].type + "]";
    out += vars[i].name;
  }
  return out;
}

void emit(std::ostream& os, const Formula& fm, int min_prec, bool guard = false);

void list(std::ostream& os, const std::vector<FormulaPtr>& items) {
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) os << ", ";
    emit(os, *items[i], 1);
  }
}

void emit_inner(std::ostream& os, const Formula& fm, bool guard) {
  switch (fm.kind) {
    case FormulaKind::constant:
      if (guard && fm.value == 1.0) {
        os << "true";
      } else if (guard && fm.value == 0.0 && !std::signbit(fm.value)) {
        os << "false";
      } else {
        os << format_double(fm.value);
      }
      return;
    case FormulaKind::param:
      os << '$' << fm.name;
      return;
    case FormulaKind::atom:
      os << fm.name << terms_text(fm.terms);
      return;
    case FormulaKind::macro:
      os << '@' << fm.name << terms_text(fm.terms);
      return;
    case FormulaKind::equals_value:
      os << fm.name << terms_text(fm.terms) << " = " << fm.category;
      return;
    case FormulaKind::equals_atom:
      emit(os, *fm.children[0], 7);
      os << " = ";
      emit(os, *fm.children[1], 7);
      return;
    case FormulaKind::term_compare:
      os << term_text(fm.terms[0]) << (fm.negated ? " != " : " = ") << term_text(fm.terms[1]);
      return;
    case FormulaKind::negate:
      os << '!';
      emit(os, *fm.children[0], 5, guard);
      return;
    case FormulaKind::disj:
      emit(os, *fm.children[0], 1, guard);
      os << " | ";
      emit(os, *fm.children[1], 2, guard);
      return;
    case FormulaKind::conj:
      emit(os, *fm.children[0], 2, guard);
      os << " & ";
      emit(os, *fm.children[1], 3, guard);
      return;
    case FormulaKind::add:
      emit(os, *fm.children[0], 3);
      os << " + ";
      emit(os, *fm.children[1], 4);
      return;
    case FormulaKind::mul:
      emit(os, *fm.children[0], 4);
      os << " * ";
      emit(os, *fm.children[1], 5);
      return;
    case FormulaKind::wif:
      os << "WIF ";
      emit(os, *fm.children[0], 1);
      os << " THEN ";
      emit(os, *fm.children[1], 1);
      os << " ELSE ";
      emit(os, *fm.children[2], 1);
      return;
    case FormulaKind::combine:
      os << "COMBINE ";
      list(os, fm.children);
      os << " WITH " << combiner_name(fm.combiner);
      if (!fm.forall.empty()) os << " FORALL " << vars_text(fm.forall);
      if (fm.where) {
        os << " WHERE ";
        emit(os, *fm.where, 1, true);
      }
      return;
    case FormulaKind::softmax:
      os << "SOFTMAX ";
      list(os, fm.children);
      return;
    case FormulaKind::gnn: {
      os << "COMPUTEWITHGNN " << fm.name << " WithNumValues " << fm.num_values
         << " ForFreeVars (";
      for (std::size_t i = 0; i < fm.free_vars.size(); ++i) {
        os << (i ? ", " : "") << fm.free_vars[i];
      }
      os << ")";
      for (std::size_t c = 0; c < fm.clauses.size(); ++c) {
        const auto& clause = fm.clauses[c];
        os << (c ? ",\n    COMBINE " : "\n    COMBINE ");
        for (std::size_t i = 0; i < clause.atoms.size(); ++i) {
          if (i) os << ", ";
          emit(os, *clause.atoms[i], 7);
        }
        os << " USINGGNN";
        if (!clause.forall.empty()) os << " FORALL " << vars_text(clause.forall);
        if (clause.where) {
          os << " WHERE ";
          emit(os, *clause.where, 1, true);
        }
      }
      return;
    }
  }
}

void emit(std::ostream& os, const Formula& fm, int min_prec, bool guard) {
  const bool parens = precedence(fm) < min_prec;
  if (parens) os << '(';
  emit_inner(os, fm, guard);
  if (parens) os << ')';
}

std::string head(const std::string& name, const std::vector<TypedVar>& params) {
  return name + "(" + vars_text(params) + ")";
}

}  // namespace

std::string format_formula(const Formula& formula) {
  std::ostringstream os;
  emit(os, formula, 0);
  return os.str();
}

std::string format_model(const RBNModel& model) {
  std::ostringstream os;
  for (const auto& p : model.params) {
    os << '$' << p.name << " = " << format_double(p.value);
    if (p.lo && p.hi) os << " [" << format_double(*p.lo) << ", " << format_double(*p.hi) << "]";
    os << ";\n";
  }
  if (!model.params.empty()) os << '\n';
  for (const auto& m : model.macros) {
    os << '@' << head(m.name, m.params) << " = " << format_formula(*m.body) << ";\n";
  }
  if (!model.macros.empty()) os << '\n';
  for (const auto& d : model.definitions) {
    os << head(d.relation, d.params) << " = " << format_formula(*d.body) << ";\n";
  }
  return os.str();
}

}  // namespace nesy
