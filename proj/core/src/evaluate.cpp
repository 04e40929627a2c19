#include "nesy/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <set>

#include "nesy/error.hpp"
#include "nesy/gnn.hpp"
#include "nesy/numeric.hpp"

namespace nesy {

NodeId EvalContext::resolve(const Term& term, const Binding& binding) const {
  if (term.is_var()) {
    if (const NodeId* v = binding.find(term.name)) return *v;
    throw EvalError("unbound variable '" + term.name + "'");
  }
  if (auto v = graph_.find_node(term.name)) return *v;
  throw EvalError("unknown node \"" + term.name + "\"");
}

RelId EvalContext::relation_id(const std::string& name) const {
  if (auto id = graph_.signature().find(name)) return *id;
  throw EvalError("unknown relation '" + name + "'");
}

namespace {

struct AtomLookup {
  RelId rel = 0;
  GroundAtom atom;
  bool in_domain = false;
};

AtomLookup lookup(const Formula& fm, EvalContext& ctx, const Binding& binding) {
  AtomLookup out;
  out.rel = ctx.relation_id(fm.name);
  const Relation& r = ctx.graph().signature().relation(out.rel);
  if (static_cast<int>(fm.terms.size()) != r.arity) {
    throw EvalError("relation '" + r.name + "' expects " + std::to_string(r.arity) +
                    " arguments");
  }
  std::array<NodeId, 2> args{0, 0};
  for (std::size_t i = 0; i < fm.terms.size(); ++i) args[i] = ctx.resolve(fm.terms[i], binding);
  std::span<const NodeId> view(args.data(), fm.terms.size());
  out.in_domain = ctx.graph().in_domain(out.rel, view);
  out.atom = ctx.graph().atom(out.rel, view);
  return out;
}

/// Stored value of a discrete atom; absent Boolean atoms read as false.
std::optional<double> discrete_value(const AtomLookup& a, EvalContext& ctx) {
  if (!a.in_domain) return std::nullopt;
  const Relation& r = ctx.graph().signature().relation(a.rel);
  if (auto v = ctx.graph().value(a.atom)) return *v;
  if (r.range.kind == RangeKind::boolean) return 0.0;
  throw EvalError("no value for atom " + ctx.graph().atom_to_string(a.atom));
}

std::string value_name(const Relation& r, double v) {
  if (r.range.kind == RangeKind::boolean) return v != 0.0 ? "true" : "false";
  return r.range.categories.at(static_cast<std::size_t>(v));
}

std::string memo_key(const std::string& name, std::span<const NodeId> args) {
  std::string key = name;
  for (NodeId v : args) {
    key.push_back('\x1f');
    key += std::to_string(v);
  }
  return key;
}

double eval(const Formula& fm, EvalContext& ctx, Binding& binding);

double eval_combine(const Formula& fm, EvalContext& ctx, Binding& binding) {
  double sum = 0.0;
  std::size_t count = 0;
  for_each_instance(fm.forall, fm.where.get(), ctx, binding, [&] {
    ++count;
    for (const auto& c : fm.children) sum += eval(*c, ctx, binding);
  });
  switch (fm.combiner) {
    case Combiner::sum:
      return sum;
    case Combiner::mean:
      return count == 0 ? 0.0 : sum / static_cast<double>(count);
    case Combiner::lreg:
      return sigmoid(sum);
    case Combiner::invsum:
      if (std::abs(sum) < 1e-12) throw EvalError("invsum of a zero sum");
      return 1.0 / sum;
  }
  return sum;
}

double eval_macro(const Formula& fm, EvalContext& ctx, Binding& binding) {
  if (ctx.model() == nullptr) throw EvalError("macro @" + fm.name + " without a model");
  const MacroDef* m = ctx.model()->find_macro(fm.name);
  if (m == nullptr) throw EvalError("unknown macro @" + fm.name);
  if (m->params.size() != fm.terms.size()) {
    throw EvalError("macro @" + fm.name + " called with " + std::to_string(fm.terms.size()) +
                    " arguments, expects " + std::to_string(m->params.size()));
  }
  std::vector<NodeId> args;
  args.reserve(fm.terms.size());
  for (const auto& t : fm.terms) args.push_back(ctx.resolve(t, binding));
  const std::string key = memo_key("@" + fm.name, args);
  if (auto it = ctx.memo().find(key); it != ctx.memo().end()) return it->second;
  Binding inner;
  for (std::size_t i = 0; i < args.size(); ++i) inner.push(m->params[i].name, args[i]);
  const double value = eval(*m->body, ctx, inner);
  ctx.memo().emplace(key, value);
  return value;
}

double eval(const Formula& fm, EvalContext& ctx, Binding& binding) {
  switch (fm.kind) {
    case FormulaKind::constant:
      return fm.value;
    case FormulaKind::param:
      return ctx.params().get(fm.name);
    case FormulaKind::atom: {
      const AtomLookup a = lookup(fm, ctx, binding);
      const Relation& r = ctx.graph().signature().relation(a.rel);
      if (r.range.kind == RangeKind::categorical) {
        throw EvalError("categorical atom " + ctx.graph().atom_to_string(a.atom) +
                        " used as a number; compare it with a value");
      }
      if (!a.in_domain) return 0.0;
      if (auto v = ctx.graph().value(a.atom)) return *v;
      if (r.range.kind == RangeKind::boolean) return 0.0;
      throw EvalError("no value for atom " + ctx.graph().atom_to_string(a.atom));
    }
    case FormulaKind::equals_value: {
      const AtomLookup a = lookup(fm, ctx, binding);
      const Relation& r = ctx.graph().signature().relation(a.rel);
      auto idx = r.range.index_of(fm.category);
      if (!r.range.is_discrete() || !idx) {
        throw EvalError("'" + fm.category + "' is not a value of relation '" + r.name + "'");
      }
      auto v = discrete_value(a, ctx);
      return v && *v == static_cast<double>(*idx) ? 1.0 : 0.0;
    }
    case FormulaKind::equals_atom: {
      const AtomLookup a = lookup(*fm.children[0], ctx, binding);
      const AtomLookup b = lookup(*fm.children[1], ctx, binding);
      const Relation& ra = ctx.graph().signature().relation(a.rel);
      const Relation& rb = ctx.graph().signature().relation(b.rel);
      auto va = discrete_value(a, ctx);
      auto vb = discrete_value(b, ctx);
      if (!va || !vb) return 0.0;
      if (a.rel == b.rel) return *va == *vb ? 1.0 : 0.0;
      return value_name(ra, *va) == value_name(rb, *vb) ? 1.0 : 0.0;
    }
    case FormulaKind::term_compare: {
      const bool same = ctx.resolve(fm.terms[0], binding) == ctx.resolve(fm.terms[1], binding);
      return same != fm.negated ? 1.0 : 0.0;
    }
    case FormulaKind::negate:
      return 1.0 - eval(*fm.children[0], ctx, binding);
    case FormulaKind::conj: {
      const double a = eval(*fm.children[0], ctx, binding);
      if (a == 0.0) return 0.0;
      return a * eval(*fm.children[1], ctx, binding);
    }
    case FormulaKind::disj: {
      const double a = eval(*fm.children[0], ctx, binding);
      const double b = eval(*fm.children[1], ctx, binding);
      return a + b - a * b;
    }
    case FormulaKind::wif: {
      const double c = eval(*fm.children[0], ctx, binding);
      if (c == 1.0) return eval(*fm.children[1], ctx, binding);
      if (c == 0.0) return eval(*fm.children[2], ctx, binding);
      return c * eval(*fm.children[1], ctx, binding) +
             (1.0 - c) * eval(*fm.children[2], ctx, binding);
    }
    case FormulaKind::add:
      return eval(*fm.children[0], ctx, binding) + eval(*fm.children[1], ctx, binding);
    case FormulaKind::mul:
      return eval(*fm.children[0], ctx, binding) * eval(*fm.children[1], ctx, binding);
    case FormulaKind::combine:
      return eval_combine(fm, ctx, binding);
    case FormulaKind::macro:
      return eval_macro(fm, ctx, binding);
    case FormulaKind::softmax:
      throw EvalError("SOFTMAX is only allowed as a relation definition");
    case FormulaKind::gnn:
      throw EvalError("COMPUTEWITHGNN is only allowed as a relation definition");
  }
  return 0.0;
}

}  // namespace

double evaluate(const Formula& formula, EvalContext& ctx, Binding& binding) {
  return eval(formula, ctx, binding);
}

double evaluate(const Formula& formula, const AttributedGraph& graph, const Binding& binding,
                const ParameterStore& params, const RBNModel* model) {
  EvalContext ctx(graph, params, model);
  Binding b = binding;
  return eval(formula, ctx, b);
}

std::vector<double> atom_distribution(const RelationDef& def, const GroundAtom& atom,
                                      EvalContext& ctx) {
  const Relation& r = ctx.graph().signature().relation(atom.rel);
  if (def.params.size() != atom.arity) {
    throw EvalError("definition of '" + def.relation + "' has the wrong arity");
  }
  Binding binding;
  for (std::size_t i = 0; i < def.params.size(); ++i) binding.push(def.params[i].name, atom.args[i]);
  const Formula& body = *def.body;
  const std::size_t k = r.range.cardinality();
  if (body.kind == FormulaKind::softmax) {
    if (body.children.size() != k) {
      throw EvalError("SOFTMAX for '" + r.name + "' has " + std::to_string(body.children.size()) +
                      " parts, the relation has " + std::to_string(k) + " values");
    }
    std::vector<double> logits;
    for (const auto& c : body.children) logits.push_back(eval(*c, ctx, binding));
    const double z = log_sum_exp(logits);
    for (auto& x : logits) x = std::exp(x - z);
    return logits;
  }
  if (body.kind == FormulaKind::gnn) {
    if (ctx.registry() == nullptr) throw EvalError("COMPUTEWITHGNN without a model registry");
    const GnnModel& model = ctx.registry()->resolve(body.name);
    check_gnn_reference(body, model);
    if (static_cast<std::size_t>(body.num_values) != k) {
      throw EvalError("COMPUTEWITHGNN " + body.name + " has " + std::to_string(body.num_values) +
                      " values, relation '" + r.name + "' has " + std::to_string(k));
    }
    auto& cache = ctx.gnn_cache();
    auto it = cache.find(body.name);
    if (it == cache.end()) it = cache.emplace(body.name, forward(model, ctx.graph())).first;
    const NodeId v = atom.args[0];
    return {it->second.begin() + static_cast<std::ptrdiff_t>(v * k),
            it->second.begin() + static_cast<std::ptrdiff_t>((v + 1) * k)};
  }
  if (r.range.kind != RangeKind::boolean) {
    throw EvalError("relation '" + r.name + "' is categorical; define it with SOFTMAX or a GNN");
  }
  double p = eval(body, ctx, binding);
  if (!(p >= -1e-9 && p <= 1.0 + 1e-9)) {
    throw EvalError("probability " + format_double(p) + " of " +
                    ctx.graph().atom_to_string(atom) + " is outside [0,1]");
  }
  p = std::clamp(p, 0.0, 1.0);
  return {1.0 - p, p};
}

// --- guard candidates ----------------------------------------------------------

namespace {

std::optional<std::vector<NodeId>> hint(const Formula& g, const std::string& var,
                                        EvalContext& ctx, const Binding& binding,
                                        std::span<const TypedVar> pending) {
  auto is_pending = [&](const Term& t) {
    if (!t.is_var()) return false;
    if (t.name == var) return true;
    return std::any_of(pending.begin(), pending.end(),
                       [&](const TypedVar& p) { return p.name == t.name; });
  };
  switch (g.kind) {
    case FormulaKind::atom: {
      if (g.terms.size() != 2) return std::nullopt;
      auto rel = ctx.graph().signature().find(g.name);
      if (!rel) return std::nullopt;
      const Relation& r = ctx.graph().signature().relation(*rel);
      if (r.range.kind != RangeKind::boolean) return std::nullopt;
      const Term& a = g.terms[0];
      const Term& b = g.terms[1];
      auto try_side = [&](const Term& mine, const Term& other,
                          bool var_is_target) -> std::optional<std::vector<NodeId>> {
        if (!(mine.is_var() && mine.name == var) || is_pending(other)) return std::nullopt;
        if (other.is_var() && binding.find(other.name) == nullptr) return std::nullopt;
        const NodeId x = ctx.resolve(other, binding);
        auto s = var_is_target ? ctx.graph().out_edges(*rel, x) : ctx.graph().in_edges(*rel, x);
        return std::vector<NodeId>(s.begin(), s.end());
      };
      if (auto h = try_side(b, a, true)) return h;
      return try_side(a, b, false);
    }
    case FormulaKind::conj: {
      auto l = hint(*g.children[0], var, ctx, binding, pending);
      auto r = hint(*g.children[1], var, ctx, binding, pending);
      if (l && r) {
        std::vector<NodeId> out;
        std::set_intersection(l->begin(), l->end(), r->begin(), r->end(),
                              std::back_inserter(out));
        return out;
      }
      return l ? l : r;
    }
    case FormulaKind::disj: {
      auto l = hint(*g.children[0], var, ctx, binding, pending);
      if (!l) return std::nullopt;
      auto r = hint(*g.children[1], var, ctx, binding, pending);
      if (!r) return std::nullopt;
      std::vector<NodeId> out;
      std::set_union(l->begin(), l->end(), r->begin(), r->end(), std::back_inserter(out));
      return out;
    }
    default:
      return std::nullopt;
  }
}

}  // namespace

std::vector<NodeId> guard_candidates(const TypedVar& var, const Formula* guard,
                                     EvalContext& ctx, const Binding& binding,
                                     std::span<const TypedVar> pending) {
  const AttributedGraph& g = ctx.graph();
  std::vector<NodeId> out;
  std::optional<std::vector<NodeId>> h;
  if (guard != nullptr) h = hint(*guard, var.name, ctx, binding, pending);
  if (h) {
    for (NodeId v : *h) {
      if (g.node_matches(v, var.type)) out.push_back(v);
    }
    return out;
  }
  out.reserve(g.node_count());
  for (NodeId v = 0; v < g.node_count(); ++v) {
    if (g.node_matches(v, var.type)) out.push_back(v);
  }
  return out;
}

// --- dependencies ------------------------------------------------------------------

namespace {

void collect(const Formula& fm, EvalContext& ctx, Binding& binding,
             std::set<GroundAtom>& out) {
  auto add_atom = [&](const Formula& a) {
    const AtomLookup l = lookup(a, ctx, binding);
    if (l.in_domain) out.insert(l.atom);
  };
  switch (fm.kind) {
    case FormulaKind::atom:
    case FormulaKind::equals_value:
      add_atom(fm);
      return;
    case FormulaKind::equals_atom:
      add_atom(*fm.children[0]);
      add_atom(*fm.children[1]);
      return;
    case FormulaKind::combine: {
      std::vector<TypedVar> vars = fm.forall;
      std::function<void(std::size_t)> rec = [&](std::size_t i) {
        if (i == vars.size()) {
          bool holds = true;
          if (fm.where) {
            collect(*fm.where, ctx, binding, out);
            holds = evaluate(*fm.where, ctx, binding) > 0.5;
          }
          if (holds) {
            for (const auto& c : fm.children) collect(*c, ctx, binding, out);
          }
          return;
        }
        for (NodeId v = 0; v < ctx.graph().node_count(); ++v) {
          if (!ctx.graph().node_matches(v, vars[i].type)) continue;
          binding.push(vars[i].name, v);
          rec(i + 1);
          binding.pop();
        }
      };
      rec(0);
      return;
    }
    case FormulaKind::macro: {
      if (ctx.model() == nullptr) throw EvalError("macro @" + fm.name + " without a model");
      const MacroDef* m = ctx.model()->find_macro(fm.name);
      if (m == nullptr || m->params.size() != fm.terms.size()) {
        throw EvalError("bad call of macro @" + fm.name);
      }
      Binding inner;
      for (std::size_t i = 0; i < fm.terms.size(); ++i) {
        inner.push(m->params[i].name, ctx.resolve(fm.terms[i], binding));
      }
      collect(*m->body, ctx, inner, out);
      return;
    }
    case FormulaKind::gnn: {
      if (ctx.registry() == nullptr) throw EvalError("COMPUTEWITHGNN without a model registry");
      const GnnModel& model = ctx.registry()->resolve(fm.name);
      const Signature& sig = ctx.graph().signature();
      std::vector<std::string> rels = model.features;
      for (const auto& e : model.edges) rels.push_back(e.relation);
      for (const auto& name : rels) {
        const RelId rel = sig.id_of(name);
        for (const auto& a : enumerate_ground_atoms(ctx.graph(), rel)) out.insert(a);
      }
      return;
    }
    default:
      for (const auto& c : fm.children) collect(*c, ctx, binding, out);
      return;
  }
}

}  // namespace

std::vector<GroundAtom> dependencies(const Formula& formula, EvalContext& ctx,
                                     Binding& binding) {
  std::set<GroundAtom> out;
  collect(formula, ctx, binding, out);
  return {out.begin(), out.end()};
}

}  // namespace nesy
