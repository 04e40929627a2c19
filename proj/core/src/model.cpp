#include "nesy/model.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <unordered_set>

#include "nesy/error.hpp"

namespace nesy {

double ParameterStore::get(const std::string& name) const {
  auto it = values_.find(name);
  if (it == values_.end()) throw EvalError("unknown parameter $" + name);
  return it->second;
}

const MacroDef* RBNModel::find_macro(std::string_view name) const {
  for (const auto& m : macros) {
    if (m.name == name) return &m;
  }
  return nullptr;
}

const RelationDef* RBNModel::find_definition(std::string_view relation) const {
  for (const auto& d : definitions) {
    if (d.relation == relation) return &d;
  }
  return nullptr;
}

ParameterStore RBNModel::default_params() const {
  ParameterStore store;
  for (const auto& p : params) store.set(p.name, p.value);
  return store;
}

std::vector<std::string> RBNModel::referenced_params() const {
  std::set<std::string> names;
  auto collect = [&](const FormulaPtr& body) {
    visit(*body, [&](const Formula& fm) {
      if (fm.kind == FormulaKind::param) names.insert(fm.name);
    });
  };
  for (const auto& m : macros) collect(m.body);
  for (const auto& d : definitions) collect(d.body);
  return {names.begin(), names.end()};
}

bool structurally_equal(const RBNModel& a, const RBNModel& b) {
  if (a.macros.size() != b.macros.size() || a.definitions.size() != b.definitions.size() ||
      a.params != b.params) {
    return false;
  }
  for (std::size_t i = 0; i < a.macros.size(); ++i) {
    const auto& x = a.macros[i];
    const auto& y = b.macros[i];
    if (x.name != y.name || x.params != y.params || !equal(x.body, y.body)) return false;
  }
  for (std::size_t i = 0; i < a.definitions.size(); ++i) {
    const auto& x = a.definitions[i];
    const auto& y = b.definitions[i];
    if (x.relation != y.relation || x.params != y.params || !equal(x.body, y.body)) return false;
  }
  return true;
}

std::vector<std::string> referenced_relations(const RBNModel& model, const Formula& formula) {
  std::set<std::string> out;
  std::set<std::string> seen_macros;
  std::function<void(const Formula&)> walk = [&](const Formula& root) {
    visit(root, [&](const Formula& fm) {
      switch (fm.kind) {
        case FormulaKind::atom:
        case FormulaKind::equals_value:
          out.insert(fm.name);
          break;
        case FormulaKind::macro:
          if (seen_macros.insert(fm.name).second) {
            if (const MacroDef* m = model.find_macro(fm.name)) walk(*m->body);
          }
          break;
        default:
          break;
      }
    });
  };
  walk(formula);
  return {out.begin(), out.end()};
}

// --- macro expansion --------------------------------------------------------

namespace {

using Subst = std::map<std::string, Term>;

Term substitute(const Term& t, const Subst& s) {
  if (!t.is_var()) return t;
  auto it = s.find(t.name);
  return it == s.end() ? t : it->second;
}

bool clashes(const std::string& var, const Subst& s) {
  for (const auto& [from, to] : s) {
    if (to.is_var() && to.name == var && from != var) return true;
  }
  return false;
}

struct Expander {
  const RBNModel& model;
  std::vector<std::string> stack;
  int fresh = 0;

  std::vector<TypedVar> bind_vars(const std::vector<TypedVar>& vars, Subst& s) {
    std::vector<TypedVar> out;
    for (const auto& v : vars) {
      if (clashes(v.name, s)) {
        std::string renamed;
        do {
          renamed = v.name + "_" + std::to_string(++fresh);
        } while (clashes(renamed, s));
        s[v.name] = Term::var(renamed);
        out.push_back({renamed, v.type});
      } else {
        s.erase(v.name);
        out.push_back(v);
      }
    }
    return out;
  }

  FormulaPtr run(const FormulaPtr& fp, const Subst& s) {
    const Formula& fm = *fp;
    auto copy = std::make_shared<Formula>(fm);
    for (auto& t : copy->terms) t = substitute(t, s);
    switch (fm.kind) {
      case FormulaKind::macro: {
        const MacroDef* m = model.find_macro(fm.name);
        if (m == nullptr) throw BuildError("unknown macro @" + fm.name);
        if (m->params.size() != fm.terms.size()) {
          throw BuildError("macro @" + fm.name + " expects " + std::to_string(m->params.size()) +
                           " arguments, got " + std::to_string(fm.terms.size()));
        }
        if (std::find(stack.begin(), stack.end(), fm.name) != stack.end()) {
          throw BuildError("recursive macro @" + fm.name);
        }
        Subst inner;
        for (std::size_t i = 0; i < m->params.size(); ++i) {
          inner[m->params[i].name] = copy->terms[i];
        }
        stack.push_back(fm.name);
        FormulaPtr body = run(m->body, inner);
        stack.pop_back();
        return body;
      }
      case FormulaKind::combine: {
        Subst inner = s;
        copy->forall = bind_vars(fm.forall, inner);
        for (auto& c : copy->children) c = run(c, inner);
        if (copy->where) copy->where = run(copy->where, inner);
        return copy;
      }
      case FormulaKind::gnn: {
        for (auto& v : copy->free_vars) v = substitute(Term::var(v), s).name;
        for (auto& clause : copy->clauses) {
          Subst inner = s;
          clause.forall = bind_vars(clause.forall, inner);
          for (auto& a : clause.atoms) a = run(a, inner);
          if (clause.where) clause.where = run(clause.where, inner);
        }
        return copy;
      }
      default:
        for (auto& c : copy->children) c = run(c, s);
        return copy;
    }
  }
};

}  // namespace

FormulaPtr expand_macros(const RBNModel& model, const FormulaPtr& formula) {
  Expander ex{model, {}, 0};
  return ex.run(formula, {});
}

RBNModel expand_macros(const RBNModel& model) {
  RBNModel out = model;
  out.macros.clear();
  for (auto& d : out.definitions) d.body = expand_macros(model, d.body);
  return out;
}

// --- constant parameterization ------------------------------------------------

namespace {

FormulaPtr parameterize(const FormulaPtr& fp, const std::string& prefix,
                        std::vector<ParamDecl>& decls) {
  const Formula& fm = *fp;
  if (fm.kind == FormulaKind::constant) {
    std::string name = prefix + std::to_string(decls.size());
    decls.push_back({name, fm.value, std::nullopt, std::nullopt});
    auto p = std::make_shared<Formula>(*f::param(name));
    p->span = fm.span;
    return p;
  }
  if (fm.kind == FormulaKind::gnn || fm.children.empty()) return fp;
  auto copy = std::make_shared<Formula>(fm);
  // A WIF condition selects a branch; it stays constant so 0/1 conditions
  // keep their meaning.
  const std::size_t first = fm.kind == FormulaKind::wif ? 1 : 0;
  for (std::size_t i = first; i < copy->children.size(); ++i) {
    copy->children[i] = parameterize(copy->children[i], prefix, decls);
  }
  return copy;
}

}  // namespace

RBNModel parameterize_constants(const RBNModel& model, const std::string& prefix) {
  RBNModel out = model;
  std::vector<ParamDecl> decls;
  for (auto& m : out.macros) m.body = parameterize(m.body, prefix, decls);
  for (auto& d : out.definitions) d.body = parameterize(d.body, prefix, decls);
  for (auto& p : decls) out.params.push_back(p);
  return out;
}

// --- partitions ---------------------------------------------------------------

AtomPartition make_partition(const RBNModel& model, const AttributedGraph& graph,
                             const std::vector<std::string>& map_relations) {
  AtomPartition part;
  const Signature& sig = graph.signature();
  for (const auto& def : model.definitions) {
    const RelId rel = sig.id_of(def.relation);
    const bool is_map = std::find(map_relations.begin(), map_relations.end(), def.relation) !=
                        map_relations.end();
    for (const auto& atom : enumerate_ground_atoms(graph, rel)) {
      if (auto v = graph.value(atom)) {
        part.observed.emplace_back(atom, *v);
      } else if (is_map) {
        part.map_atoms.push_back(atom);
      } else {
        part.unobserved.push_back(atom);
      }
    }
  }
  std::sort(part.map_atoms.begin(), part.map_atoms.end(),
            [&](const GroundAtom& a, const GroundAtom& b) { return atom_name_less(sig, a, b); });
  return part;
}

std::vector<std::string> check_partition(const RBNModel& model, const AttributedGraph& graph,
                                         const AtomPartition& partition) {
  std::vector<std::string> issues;
  const Signature& sig = graph.signature();
  std::unordered_set<GroundAtom, GroundAtomHash> seen;
  auto note = [&](const GroundAtom& a, const char* what) {
    if (a.rel >= sig.size() || !model.is_probabilistic(sig.relation(a.rel).name)) {
      issues.push_back(std::string(what) + " atom " + graph.atom_to_string(a) +
                       " is not of a probabilistic relation");
      return;
    }
    if (!seen.insert(a).second) {
      issues.push_back("atom " + graph.atom_to_string(a) + " appears twice in the partition");
    }
  };
  for (const auto& [a, v] : partition.observed) {
    note(a, "observed");
    if (a.rel < sig.size() && !sig.relation(a.rel).range.contains(v)) {
      issues.push_back("observed atom " + graph.atom_to_string(a) + " has an out-of-range value");
    }
  }
  for (const auto& a : partition.map_atoms) note(a, "MAP");
  for (const auto& a : partition.unobserved) note(a, "unobserved");
  for (const auto& def : model.definitions) {
    const RelId rel = sig.id_of(def.relation);
    for (const auto& atom : enumerate_ground_atoms(graph, rel)) {
      if (!seen.count(atom)) {
        issues.push_back("atom " + graph.atom_to_string(atom) + " is not covered by the partition");
      }
    }
  }
  return issues;
}

}  // namespace nesy
