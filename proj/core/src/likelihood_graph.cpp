#include "nesy/likelihood_graph.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_set>

#include "nesy/error.hpp"
#include "nesy/evaluate.hpp"
#include "nesy/numeric.hpp"

namespace nesy {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool is_leaf_op(LGOp op) {
  return op == LGOp::atom_bool || op == LGOp::atom_softmax || op == LGOp::atom_gnn;
}

double safe_log(double p) { return p > 0.0 ? std::log(p) : kNegInf; }

// Value of a scalar op from its children's values.
double apply_op(LGOp op, std::int64_t aux, const std::vector<double>& x) {
  switch (op) {
    case LGOp::indicator:
      return x[0] == static_cast<double>(aux) ? 1.0 : 0.0;
    case LGOp::equal_pair:
      return x[0] == x[1] ? 1.0 : 0.0;
    case LGOp::sum: {
      double s = 0.0;
      for (double v : x) s += v;
      return s;
    }
    case LGOp::prod: {
      double p = 1.0;
      for (double v : x) p *= v;
      return p;
    }
    case LGOp::negate:
      return 1.0 - x[0];
    case LGOp::disj:
      return x[0] + x[1] - x[0] * x[1];
    case LGOp::wif:
      if (x[0] == 1.0) return x[1];
      if (x[0] == 0.0) return x[2];
      return x[0] * x[1] + (1.0 - x[0]) * x[2];
    case LGOp::sigmoid:
      return sigmoid(x[0]);
    case LGOp::inverse:
      if (std::abs(x[0]) < 1e-12) throw EvalError("invsum of a zero sum");
      return 1.0 / x[0];
    case LGOp::atom_bool: {
      const double p = x[0];
      if (!(p >= -1e-9 && p <= 1.0 + 1e-9)) {
        throw EvalError("probability " + format_double(p) + " is outside [0,1]");
      }
      const double q = std::clamp(p, 0.0, 1.0);
      return x[1] != 0.0 ? safe_log(q) : safe_log(1.0 - q);
    }
    case LGOp::atom_softmax: {
      const std::span<const double> logits(x.data(), x.size() - 1);
      const auto v = static_cast<std::size_t>(x.back());
      return logits[v] - log_sum_exp(logits);
    }
    default:
      throw BuildError("internal: op is not scalar");
  }
}

const char* op_name(LGOp op) {
  switch (op) {
    case LGOp::constant: return "const";
    case LGOp::param: return "param";
    case LGOp::input: return "input";
    case LGOp::indicator: return "indicator";
    case LGOp::equal_pair: return "equal";
    case LGOp::sum: return "sum";
    case LGOp::prod: return "prod";
    case LGOp::negate: return "not";
    case LGOp::disj: return "or";
    case LGOp::wif: return "wif";
    case LGOp::sigmoid: return "sigmoid";
    case LGOp::inverse: return "inverse";
    case LGOp::gnn: return "gnn";
    case LGOp::atom_bool: return "P(bool)";
    case LGOp::atom_softmax: return "P(softmax)";
    case LGOp::atom_gnn: return "P(gnn)";
  }
  return "?";
}

}  // namespace

// --- grounding --------------------------------------------------------------------

struct LikelihoodGraph::Builder {
  LikelihoodGraph& lg;
  const RBNModel& model;
  const AttributedGraph& g;
  const ParameterStore& params;
  EvalContext ctx;
  std::unordered_map<GroundAtom, std::uint32_t, GroundAtomHash> atom_nodes;
  std::unordered_set<std::string> latent_relations;
  std::unordered_map<std::string, std::uint32_t> cons;
  std::unordered_map<std::string, std::uint32_t> macro_memo;
  std::unordered_map<std::string, std::uint32_t> gnn_nodes;
  std::unordered_map<const Formula*, bool> guard_ok;
  std::vector<double> init;  // initial scalar values, by node id
  std::vector<std::vector<double>> const_store;

  Builder(LikelihoodGraph& l, const RBNModel& m, const AttributedGraph& graph,
          const ParameterStore& p)
      : lg(l), model(m), g(graph), params(p), ctx(graph, p, &m, l.registry_) {}

  bool is_const(std::uint32_t id) const { return lg.nodes_[id].op == LGOp::constant; }
  double const_value(std::uint32_t id) const { return init[id]; }

  std::uint32_t push(LikelihoodGraph::Node node, double value) {
    const auto id = static_cast<std::uint32_t>(lg.nodes_.size());
    for (auto k : node.kids) {
      node.per_sample = node.per_sample || lg.nodes_[k].per_sample;
      node.has_param = node.has_param || lg.nodes_[k].has_param;
    }
    lg.nodes_.push_back(std::move(node));
    init.push_back(value);
    return id;
  }

  std::uint32_t constant(double c) {
    std::string key(1, 'c');
    key.append(reinterpret_cast<const char*>(&c), sizeof c);
    if (auto it = cons.find(key); it != cons.end()) return it->second;
    LikelihoodGraph::Node n;
    n.op = LGOp::constant;
    const auto id = push(std::move(n), c);
    cons.emplace(std::move(key), id);
    return id;
  }

  std::uint32_t param(const std::string& name) {
    if (auto it = lg.param_nodes_.find(name); it != lg.param_nodes_.end()) return it->second;
    LikelihoodGraph::Node n;
    n.op = LGOp::param;
    n.has_param = true;
    const auto id = push(std::move(n), params.get(name));
    lg.param_nodes_.emplace(name, id);
    return id;
  }

  std::uint32_t make(LGOp op, std::vector<std::uint32_t> kids, std::int64_t aux = 0) {
    // Algebraic simplifications that are exact in floating point.
    if (op == LGOp::sum || op == LGOp::prod) {
      const double unit = op == LGOp::sum ? 0.0 : 1.0;
      std::vector<std::uint32_t> kept;
      for (auto k : kids) {
        if (is_const(k) && const_value(k) == unit) continue;
        if (op == LGOp::prod && is_const(k) && const_value(k) == 0.0) return constant(0.0);
        kept.push_back(k);
      }
      if (kept.empty()) return constant(unit);
      if (kept.size() == 1) return kept[0];
      kids = std::move(kept);
    }
    if (op == LGOp::wif && is_const(kids[0])) {
      if (const_value(kids[0]) == 1.0) return kids[1];
      if (const_value(kids[0]) == 0.0) return kids[2];
    }
    const bool foldable = op != LGOp::gnn && op != LGOp::atom_gnn &&
                          std::all_of(kids.begin(), kids.end(), [&](auto k) { return is_const(k); });
    if (foldable && !is_leaf_op(op)) {
      std::vector<double> x;
      for (auto k : kids) x.push_back(const_value(k));
      return constant(apply_op(op, aux, x));
    }
    std::string key(1, static_cast<char>(op));
    key.append(reinterpret_cast<const char*>(&aux), sizeof aux);
    key.append(reinterpret_cast<const char*>(kids.data()), kids.size() * sizeof(std::uint32_t));
    if (auto it = cons.find(key); it != cons.end()) return it->second;
    LikelihoodGraph::Node n;
    n.op = op;
    n.aux = aux;
    n.kids = std::move(kids);
    const auto id = push(std::move(n), 0.0);
    cons.emplace(std::move(key), id);
    return id;
  }

  std::uint32_t input(bool unobserved, std::size_t index, double value) {
    LikelihoodGraph::Node n;
    n.op = LGOp::input;
    n.per_sample = unobserved;
    n.aux = static_cast<std::int64_t>(index);
    return push(std::move(n), value);
  }

  // Node holding the raw value of an in-domain atom.
  std::uint32_t value_node(RelId rel, const GroundAtom& atom) {
    const Relation& r = g.signature().relation(rel);
    if (model.is_probabilistic(r.name)) {
      auto it = atom_nodes.find(atom);
      if (it == atom_nodes.end()) {
        throw BuildError("atom " + g.atom_to_string(atom) + " is missing from the partition");
      }
      return it->second;
    }
    if (auto v = g.value(atom)) return constant(*v);
    if (r.range.kind == RangeKind::boolean) return constant(0.0);
    throw BuildError("input atom " + g.atom_to_string(atom) + " has no value");
  }

  struct Lookup {
    RelId rel = 0;
    GroundAtom atom;
    bool in_domain = false;
  };

  Lookup lookup(const Formula& fm, const Binding& binding) {
    Lookup out;
    auto rel = g.signature().find(fm.name);
    if (!rel) throw BuildError("unknown relation '" + fm.name + "'");
    out.rel = *rel;
    const Relation& r = g.signature().relation(*rel);
    if (static_cast<int>(fm.terms.size()) != r.arity) {
      throw BuildError("relation '" + r.name + "' expects " + std::to_string(r.arity) + " arguments");
    }
    std::array<NodeId, 2> args{0, 0};
    for (std::size_t i = 0; i < fm.terms.size(); ++i) args[i] = ctx.resolve(fm.terms[i], binding);
    std::span<const NodeId> view(args.data(), fm.terms.size());
    out.in_domain = g.in_domain(*rel, view);
    out.atom = g.atom(*rel, view);
    return out;
  }

  void check_guard(const Formula* guard) {
    if (guard == nullptr) return;
    auto [it, fresh] = guard_ok.emplace(guard, true);
    if (!fresh) return;
    for (const auto& rel : referenced_relations(model, *guard)) {
      if (latent_relations.count(rel)) {
        throw BuildError("a COMBINE guard uses relation '" + rel +
                         "', which has MAP or unobserved atoms; guards must be decidable from data");
      }
    }
  }

  std::uint32_t ground(const Formula& fm, Binding& binding) {
    switch (fm.kind) {
      case FormulaKind::constant:
        return constant(fm.value);
      case FormulaKind::param:
        return param(fm.name);
      case FormulaKind::atom: {
        const Lookup a = lookup(fm, binding);
        const Relation& r = g.signature().relation(a.rel);
        if (r.range.kind == RangeKind::categorical) {
          throw BuildError("categorical atom " + g.atom_to_string(a.atom) +
                           " used as a number; compare it with a value");
        }
        if (!a.in_domain) return constant(0.0);
        return value_node(a.rel, a.atom);
      }
      case FormulaKind::equals_value: {
        const Lookup a = lookup(fm, binding);
        const Relation& r = g.signature().relation(a.rel);
        auto idx = r.range.index_of(fm.category);
        if (!r.range.is_discrete() || !idx) {
          throw BuildError("'" + fm.category + "' is not a value of relation '" + r.name + "'");
        }
        if (!a.in_domain) return constant(0.0);
        const auto v = value_node(a.rel, a.atom);
        if (is_const(v)) return constant(const_value(v) == static_cast<double>(*idx) ? 1.0 : 0.0);
        return make(LGOp::indicator, {v}, static_cast<std::int64_t>(*idx));
      }
      case FormulaKind::equals_atom: {
        const Lookup a = lookup(*fm.children[0], binding);
        const Lookup b = lookup(*fm.children[1], binding);
        if (!a.in_domain || !b.in_domain) return constant(0.0);
        const Relation& ra = g.signature().relation(a.rel);
        const Relation& rb = g.signature().relation(b.rel);
        const auto va = value_node(a.rel, a.atom);
        const auto vb = value_node(b.rel, b.atom);
        if (ra.range.kind == rb.range.kind && ra.range.categories == rb.range.categories) {
          return make(LGOp::equal_pair, {va, vb});
        }
        if (is_const(va) && is_const(vb)) {
          auto name = [](const Relation& r, double v) -> std::string {
            if (r.range.kind == RangeKind::boolean) return v != 0.0 ? "true" : "false";
            return r.range.categories.at(static_cast<std::size_t>(v));
          };
          return constant(name(ra, const_value(va)) == name(rb, const_value(vb)) ? 1.0 : 0.0);
        }
        throw BuildError("comparison of '" + ra.name + "' and '" + rb.name +
                         "' needs identical value ranges when either is latent");
      }
      case FormulaKind::term_compare: {
        const bool same = ctx.resolve(fm.terms[0], binding) == ctx.resolve(fm.terms[1], binding);
        return constant(same != fm.negated ? 1.0 : 0.0);
      }
      case FormulaKind::negate:
        return make(LGOp::negate, {ground(*fm.children[0], binding)});
      case FormulaKind::conj:
        return make(LGOp::prod, {ground(*fm.children[0], binding), ground(*fm.children[1], binding)});
      case FormulaKind::disj:
        return make(LGOp::disj, {ground(*fm.children[0], binding), ground(*fm.children[1], binding)});
      case FormulaKind::wif: {
        const auto c = ground(*fm.children[0], binding);
        if (is_const(c) && const_value(c) == 1.0) return ground(*fm.children[1], binding);
        if (is_const(c) && const_value(c) == 0.0) return ground(*fm.children[2], binding);
        return make(LGOp::wif, {c, ground(*fm.children[1], binding), ground(*fm.children[2], binding)});
      }
      case FormulaKind::add:
        return make(LGOp::sum, {ground(*fm.children[0], binding), ground(*fm.children[1], binding)});
      case FormulaKind::mul:
        return make(LGOp::prod, {ground(*fm.children[0], binding), ground(*fm.children[1], binding)});
      case FormulaKind::combine: {
        check_guard(fm.where.get());
        std::vector<std::uint32_t> parts;
        std::size_t count = 0;
        for_each_instance(fm.forall, fm.where.get(), ctx, binding, [&] {
          ++count;
          for (const auto& c : fm.children) parts.push_back(ground(*c, binding));
        });
        switch (fm.combiner) {
          case Combiner::sum:
            return make(LGOp::sum, std::move(parts));
          case Combiner::mean:
            if (count == 0) return constant(0.0);
            return make(LGOp::prod,
                        {constant(1.0 / static_cast<double>(count)), make(LGOp::sum, std::move(parts))});
          case Combiner::lreg:
            return make(LGOp::sigmoid, {make(LGOp::sum, std::move(parts))});
          case Combiner::invsum:
            return make(LGOp::inverse, {make(LGOp::sum, std::move(parts))});
        }
        return constant(0.0);
      }
      case FormulaKind::macro: {
        const MacroDef* m = model.find_macro(fm.name);
        if (m == nullptr) throw BuildError("unknown macro @" + fm.name);
        if (m->params.size() != fm.terms.size()) {
          throw BuildError("macro @" + fm.name + " called with the wrong number of arguments");
        }
        std::string key = fm.name;
        Binding inner;
        for (std::size_t i = 0; i < fm.terms.size(); ++i) {
          const NodeId v = ctx.resolve(fm.terms[i], binding);
          key.push_back('\x1f');
          key += std::to_string(v);
          inner.push(m->params[i].name, v);
        }
        if (auto it = macro_memo.find(key); it != macro_memo.end()) return it->second;
        const auto id = ground(*m->body, inner);
        macro_memo.emplace(std::move(key), id);
        return id;
      }
      case FormulaKind::softmax:
        throw BuildError("SOFTMAX is only allowed as a relation definition");
      case FormulaKind::gnn:
        throw BuildError("COMPUTEWITHGNN is only allowed as a relation definition");
    }
    return constant(0.0);
  }

  std::uint32_t gnn_node(const Formula& ref) {
    if (auto it = gnn_nodes.find(ref.name); it != gnn_nodes.end()) return it->second;
    if (lg.registry_ == nullptr) throw BuildError("COMPUTEWITHGNN " + ref.name + " without a model registry");
    const GnnModel& gm = lg.registry_->resolve(ref.name);
    check_gnn_reference(ref, gm);
    try {
      gm.check(g.signature());
    } catch (const SchemaError& e) {
      throw BuildError("GNN '" + ref.name + "': " + e.what());
    }
    const auto cols = gm.columns(g.signature());
    std::vector<std::uint32_t> feats;
    for (NodeId v = 0; v < g.node_count(); ++v) {
      const NodeId arg[1] = {v};
      for (const auto& c : cols) {
        if (!g.in_domain(c.rel, arg)) {
          feats.push_back(constant(0.0));
          continue;
        }
        const auto vn = value_node(c.rel, g.atom(c.rel, arg));
        if (c.category < 0) {
          feats.push_back(vn);
        } else if (is_const(vn)) {
          feats.push_back(constant(const_value(vn) == c.category ? 1.0 : 0.0));
        } else {
          feats.push_back(make(LGOp::indicator, {vn}, c.category));
        }
      }
    }
    LikelihoodGraph::Node n;
    n.op = LGOp::gnn;
    n.kids = std::move(feats);
    n.aux = static_cast<std::int64_t>(lg.gnn_models_.size());
    n.width = static_cast<std::uint32_t>(g.node_count() * gm.classes());
    lg.gnn_models_.push_back(&gm);
    const auto id = push(std::move(n), 0.0);
    gnn_nodes.emplace(ref.name, id);
    return id;
  }

  std::uint32_t leaf(const GroundAtom& atom) {
    const Relation& r = g.signature().relation(atom.rel);
    const RelationDef* def = model.find_definition(r.name);
    Binding binding;
    for (std::size_t i = 0; i < def->params.size(); ++i) binding.push(def->params[i].name, atom.args[i]);
    const auto value = atom_nodes.at(atom);
    const Formula& body = *def->body;
    const std::size_t k = r.range.cardinality();
    if (body.kind == FormulaKind::softmax) {
      if (body.children.size() != k) {
        throw BuildError("SOFTMAX for '" + r.name + "' has the wrong number of parts");
      }
      std::vector<std::uint32_t> kids;
      for (const auto& c : body.children) kids.push_back(ground(*c, binding));
      kids.push_back(value);
      return make(LGOp::atom_softmax, std::move(kids));
    }
    if (body.kind == FormulaKind::gnn) {
      if (static_cast<std::size_t>(body.num_values) != k) {
        throw BuildError("COMPUTEWITHGNN " + body.name + " value count does not match '" + r.name + "'");
      }
      const auto gn = gnn_node(body);
      return make(LGOp::atom_gnn, {gn, value}, atom.args[0]);
    }
    if (r.range.kind != RangeKind::boolean) {
      throw BuildError("relation '" + r.name + "' is categorical; define it with SOFTMAX or a GNN");
    }
    return make(LGOp::atom_bool, {ground(body, binding), value});
  }
};

// --- construction -------------------------------------------------------------------

LikelihoodGraph::LikelihoodGraph(const RBNModel& model, const AttributedGraph& graph,
                                 const AtomPartition& partition, const ParameterStore& params,
                                 const ModelRegistry* registry, const LGOptions& options)
    : graph_(graph), registry_(registry) {
  if (auto issues = check_partition(model, graph, partition); !issues.empty()) {
    std::string msg = "invalid atom partition: " + issues.front();
    if (issues.size() > 1) msg += " (and " + std::to_string(issues.size() - 1) + " more)";
    throw BuildError(msg);
  }
  samples_ = partition.unobserved.empty() ? 1 : std::max<std::size_t>(options.samples, 1);
  for (std::size_t k = 0; k < samples_; ++k) rngs_.emplace_back(mix_seed(options.seed, k));

  Builder b(*this, model, graph, params);
  const Signature& sig = graph.signature();
  std::vector<GroundAtom> all;
  for (const auto& [atom, value] : partition.observed) {
    b.atom_nodes.emplace(atom, b.constant(value));
    all.push_back(atom);
  }
  for (std::size_t i = 0; i < partition.map_atoms.size(); ++i) {
    const GroundAtom& a = partition.map_atoms[i];
    map_atoms_.push_back(a);
    map_card_.push_back(sig.relation(a.rel).range.cardinality());
    const auto id = b.input(false, i, 0.0);
    map_inputs_.push_back(id);
    b.atom_nodes.emplace(a, id);
    b.latent_relations.insert(sig.relation(a.rel).name);
    all.push_back(a);
  }
  for (std::size_t j = 0; j < partition.unobserved.size(); ++j) {
    const GroundAtom& a = partition.unobserved[j];
    unobserved_.push_back(a);
    unobserved_card_.push_back(sig.relation(a.rel).range.cardinality());
    const auto id = b.input(true, j, 0.0);
    unobserved_inputs_.push_back(id);
    b.atom_nodes.emplace(a, id);
    b.latent_relations.insert(sig.relation(a.rel).name);
    all.push_back(a);
  }
  std::sort(all.begin(), all.end(),
            [&](const GroundAtom& x, const GroundAtom& y) { return atom_name_less(sig, x, y); });
  for (const auto& a : all) {
    try {
      leaves_.push_back(b.leaf(a));
    } catch (const EvalError& e) {
      throw BuildError(graph.atom_to_string(a) + ": " + e.what());
    }
  }
  prune_barren(all);
  if (unobserved_.empty() && samples_ > 1) {
    samples_ = 1;
    rngs_.resize(1);
  }

  // Value storage.
  std::size_t total = 0;
  for (auto& n : nodes_) {
    n.offset = total;
    total += static_cast<std::size_t>(n.width) * (n.per_sample ? samples_ : 1);
  }
  values_.assign(total, 0.0);
  for (std::uint32_t id = 0; id < nodes_.size(); ++id) {
    const Node& n = nodes_[id];
    if (n.op == LGOp::constant || n.op == LGOp::param || n.op == LGOp::input) {
      for (std::size_t k = 0; k < (n.per_sample ? samples_ : 1); ++k) val(id, k) = b.init[id];
    }
  }
  // Random initial sample bank.
  for (std::size_t k = 0; k < samples_; ++k) {
    for (std::size_t j = 0; j < unobserved_.size(); ++j) {
      std::uniform_int_distribution<std::size_t> pick(0, unobserved_card_[j] - 1);
      val(unobserved_inputs_[j], k) = static_cast<double>(pick(rngs_[k]));
    }
  }

  parents_.resize(nodes_.size());
  for (std::uint32_t id = 0; id < nodes_.size(); ++id) {
    for (auto k : nodes_[id].kids) {
      if (parents_[k].empty() || parents_[k].back() != id) parents_[k].push_back(id);
    }
  }
  for (std::uint32_t i = 0; i < leaves_.size(); ++i) leaf_slots_[leaves_[i]].push_back(i);
  while (tree_size_ < leaves_.size()) tree_size_ *= 2;
  trees_.assign(samples_, std::vector<double>(2 * tree_size_, 0.0));
  siblings_.resize(map_atoms_.size());
  siblings_ready_.assign(map_atoms_.size(), false);
  stamp_.assign(nodes_.size(), 0);
  evaluate_full();
}

// An unobserved atom no other leaf depends on sums out to 1, so its leaf and
// its sampling are dropped. Repeated until nothing changes, since dropping
// one leaf can leave another atom barren.
void LikelihoodGraph::prune_barren(const std::vector<GroundAtom>& order) {
  if (unobserved_.empty()) return;
  std::vector<std::vector<std::uint32_t>> up(nodes_.size());
  for (std::uint32_t id = 0; id < nodes_.size(); ++id) {
    for (auto k : nodes_[id].kids) up[k].push_back(id);
  }
  std::vector<char> is_leaf(nodes_.size(), 0);
  for (auto l : leaves_) is_leaf[l] = 1;
  std::map<GroundAtom, std::size_t> slot;
  for (std::size_t i = 0; i < order.size(); ++i) slot.emplace(order[i], i);
  // Leaves reachable from each unobserved input.
  std::vector<std::vector<std::uint32_t>> reach(unobserved_.size());
  for (std::size_t j = 0; j < unobserved_.size(); ++j) {
    std::vector<char> seen(nodes_.size(), 0);
    std::vector<std::uint32_t> stack{unobserved_inputs_[j]};
    while (!stack.empty()) {
      const auto id = stack.back();
      stack.pop_back();
      if (seen[id]) continue;
      seen[id] = 1;
      if (is_leaf[id]) reach[j].push_back(id);
      for (auto p : up[id]) stack.push_back(p);
    }
  }
  std::vector<char> dropped(leaves_.size(), 0);
  std::vector<char> barren(unobserved_.size(), 0);
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t j = 0; j < unobserved_.size(); ++j) {
      if (barren[j]) continue;
      const std::size_t own = slot.at(unobserved_[j]);
      bool alone = true;
      for (std::size_t i = 0; i < leaves_.size() && alone; ++i) {
        if (i == own || dropped[i]) continue;
        if (std::find(reach[j].begin(), reach[j].end(), leaves_[i]) != reach[j].end()) alone = false;
      }
      if (alone) {
        barren[j] = 1;
        dropped[own] = 1;
        changed = true;
      }
    }
  }
  std::vector<std::uint32_t> leaves;
  for (std::size_t i = 0; i < leaves_.size(); ++i) {
    if (!dropped[i]) leaves.push_back(leaves_[i]);
  }
  leaves_ = std::move(leaves);
  std::vector<GroundAtom> atoms;
  std::vector<std::size_t> cards;
  std::vector<std::uint32_t> inputs;
  for (std::size_t j = 0; j < unobserved_.size(); ++j) {
    if (barren[j]) {
      pruned_.push_back(unobserved_[j]);
      continue;
    }
    atoms.push_back(unobserved_[j]);
    cards.push_back(unobserved_card_[j]);
    inputs.push_back(unobserved_inputs_[j]);
  }
  unobserved_ = std::move(atoms);
  unobserved_card_ = std::move(cards);
  unobserved_inputs_ = std::move(inputs);
}

// --- values ---------------------------------------------------------------------------

int LikelihoodGraph::map_value(std::size_t i) const {
  return static_cast<int>(val(map_inputs_.at(i), 0));
}

void LikelihoodGraph::set_map_value(std::size_t i, int value) {
  if (value < 0 || static_cast<std::size_t>(value) >= map_card_.at(i)) {
    throw EvalError("value " + std::to_string(value) + " out of range for " +
                    graph_.atom_to_string(map_atoms_[i]));
  }
  double& slot = val(map_inputs_[i], 0);
  if (slot == value) return;
  slot = value;
  dirty_.push_back(map_inputs_[i]);
}

std::vector<int> LikelihoodGraph::map_values() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < map_atoms_.size(); ++i) out.push_back(map_value(i));
  return out;
}

int LikelihoodGraph::sample_value(std::size_t j, std::size_t k) const {
  return static_cast<int>(val(unobserved_inputs_.at(j), k));
}

void LikelihoodGraph::set_param(const std::string& name, double value) {
  auto it = param_nodes_.find(name);
  if (it == param_nodes_.end()) return;  // not referenced by any grounded formula
  val(it->second, 0) = value;
  dirty_.push_back(it->second);
}

std::vector<std::string> LikelihoodGraph::parameter_names() const {
  std::vector<std::string> out;
  for (const auto& [name, id] : param_nodes_) out.push_back(name);
  return out;
}

void LikelihoodGraph::compute(std::uint32_t id, std::size_t k) {
  Node& n = nodes_[id];
  switch (n.op) {
    case LGOp::constant:
    case LGOp::param:
    case LGOp::input:
      return;
    case LGOp::gnn: {
      const GnnModel& gm = *gnn_models_[static_cast<std::size_t>(n.aux)];
      std::vector<double> x(n.kids.size());
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = val(n.kids[i], k);
      const auto out = forward(gm, graph_, x);
      std::copy(out.begin(), out.end(), &val(id, k));
      return;
    }
    case LGOp::atom_gnn: {
      const Node& gn = nodes_[n.kids[0]];
      const std::size_t classes = gn.width / graph_.node_count();
      const auto v = static_cast<std::size_t>(n.aux);
      const auto y = static_cast<std::size_t>(val(n.kids[1], k));
      const double p = (&val(n.kids[0], k))[v * classes + y];
      val(id, k) = safe_log(p);
      return;
    }
    default: {
      thread_local std::vector<double> x;
      x.resize(n.kids.size());
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = val(n.kids[i], k);
      val(id, k) = apply_op(n.op, n.aux, x);
    }
  }
}

void LikelihoodGraph::compute_all_samples(std::uint32_t id) {
  const std::size_t count = nodes_[id].per_sample ? samples_ : 1;
  for (std::size_t k = 0; k < count; ++k) compute(id, k);
}

void LikelihoodGraph::rebuild_tree(std::size_t k) {
  auto& t = trees_[k];
  for (std::size_t i = 0; i < leaves_.size(); ++i) t[tree_size_ + i] = val(leaves_[i], k);
  for (std::size_t i = tree_size_ - 1; i >= 1; --i) t[i] = t[2 * i] + t[2 * i + 1];
}

void LikelihoodGraph::update_leaves(std::uint32_t id, std::size_t k) {
  auto it = leaf_slots_.find(id);
  if (it == leaf_slots_.end()) return;
  auto& t = trees_[k];
  for (auto slot : it->second) {
    std::size_t i = tree_size_ + slot;
    t[i] = val(id, k);
    for (i /= 2; i >= 1; i /= 2) t[i] = t[2 * i] + t[2 * i + 1];
  }
}

void LikelihoodGraph::finish() {
  std::vector<double> totals(samples_);
  for (std::size_t k = 0; k < samples_; ++k) totals[k] = trees_[k][1];
  loglik_ = log_sum_exp(totals) - std::log(static_cast<double>(samples_));
}

double LikelihoodGraph::evaluate_full() {
  visits_ = 0;
  for (std::uint32_t id = 0; id < nodes_.size(); ++id) {
    const LGOp op = nodes_[id].op;
    if (op == LGOp::constant || op == LGOp::param || op == LGOp::input) continue;
    compute_all_samples(id);
    ++visits_;
  }
  for (std::size_t k = 0; k < samples_; ++k) rebuild_tree(k);
  dirty_.clear();
  finish();
  return loglik_;
}

const std::vector<std::uint32_t>& LikelihoodGraph::dependents(std::uint32_t input) {
  auto it = dependents_.find(input);
  if (it != dependents_.end()) return it->second;
  ++epoch_;
  std::vector<std::uint32_t> out;
  std::vector<std::uint32_t> stack{input};
  while (!stack.empty()) {
    const auto id = stack.back();
    stack.pop_back();
    for (auto p : parents_[id]) {
      if (stamp_[p] == epoch_) continue;
      stamp_[p] = epoch_;
      out.push_back(p);
      stack.push_back(p);
    }
  }
  std::sort(out.begin(), out.end());
  return dependents_.emplace(input, std::move(out)).first->second;
}

double LikelihoodGraph::evaluate_incremental() {
  visits_ = 0;
  if (dirty_.empty()) return loglik_;
  std::vector<std::uint32_t> work;
  if (dirty_.size() == 1) {
    work = dependents(dirty_.front());
  } else {
    std::vector<std::uint32_t> inputs = dirty_;
    std::sort(inputs.begin(), inputs.end());
    inputs.erase(std::unique(inputs.begin(), inputs.end()), inputs.end());
    std::vector<const std::vector<std::uint32_t>*> lists;
    for (auto in : inputs) lists.push_back(&dependents(in));
    ++epoch_;
    for (const auto* l : lists) {
      for (auto id : *l) {
        if (stamp_[id] == epoch_) continue;
        stamp_[id] = epoch_;
        work.push_back(id);
      }
    }
    std::sort(work.begin(), work.end());
  }
  dirty_.clear();
  std::size_t touched_leaves = 0;
  for (auto id : work) {
    compute_all_samples(id);
    touched_leaves += slot_count(id);
  }
  visits_ = work.size();
  if (touched_leaves * 8 > leaves_.size()) {
    for (std::size_t k = 0; k < samples_; ++k) rebuild_tree(k);
  } else {
    for (auto id : work) {
      if (!is_leaf_op(nodes_[id].op)) continue;
      for (std::size_t k = 0; k < samples_; ++k) update_leaves(id, k);
    }
  }
  finish();
  return loglik_;
}

const std::vector<std::size_t>& LikelihoodGraph::siblings(std::size_t i) {
  if (siblings_ready_.at(i)) return siblings_[i];
  // Map input node -> MAP index.
  std::unordered_map<std::uint32_t, std::size_t> index;
  for (std::size_t m = 0; m < map_inputs_.size(); ++m) index.emplace(map_inputs_[m], m);
  std::set<std::size_t> out;
  out.insert(i);
  const auto deps = dependents(map_inputs_[i]);  // copy: dependents() may rehash
  for (auto leaf : deps) {
    if (slot_count(leaf) == 0) continue;
    // MAP inputs among the ancestors of this leaf.
    ++epoch_;
    std::vector<std::uint32_t> stack{leaf};
    stamp_[leaf] = epoch_;
    while (!stack.empty()) {
      const auto id = stack.back();
      stack.pop_back();
      for (auto k : nodes_[id].kids) {
        if (stamp_[k] == epoch_) continue;
        stamp_[k] = epoch_;
        if (nodes_[k].op == LGOp::input) {
          if (auto it = index.find(k); it != index.end()) out.insert(it->second);
        } else {
          stack.push_back(k);
        }
      }
    }
  }
  siblings_[i].assign(out.begin(), out.end());
  siblings_ready_[i] = true;
  return siblings_[i];
}

// --- Gibbs -----------------------------------------------------------------------------

void LikelihoodGraph::resample(std::size_t j, std::size_t k) {
  const auto in = unobserved_inputs_[j];
  const auto& deps = dependents(in);
  const std::size_t card = unobserved_card_[j];
  std::vector<double> score(card, 0.0);
  for (std::size_t x = 0; x < card; ++x) {
    val(in, k) = static_cast<double>(x);
    for (auto id : deps) {
      compute(id, k);
      if (const auto c = slot_count(id); c > 0) score[x] += val(id, k) * static_cast<double>(c);
    }
  }
  double mx = kNegInf;
  for (double s : score) mx = std::max(mx, s);
  if (!std::isfinite(mx)) {
    throw NumericError("every value of " + graph_.atom_to_string(unobserved_[j]) +
                       " has probability 0 given the rest of sample " + std::to_string(k));
  }
  std::vector<double> w(card);
  for (std::size_t x = 0; x < card; ++x) w[x] = std::exp(score[x] - mx);
  std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
  const std::size_t chosen = pick(rngs_[k]);
  if (chosen != card - 1) {
    val(in, k) = static_cast<double>(chosen);
    for (auto id : deps) compute(id, k);
  }
}

void LikelihoodGraph::gibbs_sweep() {
  if (unobserved_.empty()) return;
  if (!dirty_.empty()) evaluate_incremental();
  for (std::size_t k = 0; k < samples_; ++k) {
    for (std::size_t j = 0; j < unobserved_.size(); ++j) resample(j, k);
  }
  for (std::size_t k = 0; k < samples_; ++k) rebuild_tree(k);
  finish();
}

// --- gradient ----------------------------------------------------------------------------

std::map<std::string, double> LikelihoodGraph::gradient() {
  if (!dirty_.empty()) evaluate_incremental();
  std::vector<double> adj(values_.size(), 0.0);
  auto slot = [&](std::uint32_t id, std::size_t k) -> double& {
    const Node& n = nodes_[id];
    return adj[n.offset + (n.per_sample ? k * n.width : 0)];
  };
  // dL/dT_k: softmax over the per-sample totals.
  std::vector<double> weight(samples_);
  for (std::size_t k = 0; k < samples_; ++k) weight[k] = trees_[k][1];
  const double z = log_sum_exp(weight);
  for (auto& w : weight) w = std::isfinite(z) ? std::exp(w - z) : 1.0 / static_cast<double>(samples_);
  for (const auto& [leaf, slots] : leaf_slots_) {
    if (!nodes_[leaf].has_param) continue;
    for (std::size_t k = 0; k < samples_; ++k) {
      slot(leaf, k) += weight[k] * static_cast<double>(slots.size());
    }
  }
  std::vector<double> x;
  for (std::size_t id = nodes_.size(); id-- > 0;) {
    const Node& n = nodes_[id];
    if (!n.has_param || n.op == LGOp::param) continue;
    const auto uid = static_cast<std::uint32_t>(id);
    const std::size_t count = n.per_sample ? samples_ : 1;
    for (std::size_t k = 0; k < count; ++k) {
      const double a = slot(uid, k);
      if (a == 0.0) continue;
      x.resize(n.kids.size());
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = val(n.kids[i], k);
      auto give = [&](std::size_t i, double d) {
        if (nodes_[n.kids[i]].has_param) slot(n.kids[i], k) += d;
      };
      switch (n.op) {
        case LGOp::sum:
          for (std::size_t i = 0; i < x.size(); ++i) give(i, a);
          break;
        case LGOp::prod: {
          std::vector<double> prefix(x.size() + 1, 1.0);
          for (std::size_t i = 0; i < x.size(); ++i) prefix[i + 1] = prefix[i] * x[i];
          double suffix = 1.0;
          for (std::size_t i = x.size(); i-- > 0;) {
            give(i, a * prefix[i] * suffix);
            suffix *= x[i];
          }
          break;
        }
        case LGOp::negate:
          give(0, -a);
          break;
        case LGOp::disj:
          give(0, a * (1.0 - x[1]));
          give(1, a * (1.0 - x[0]));
          break;
        case LGOp::wif:
          give(0, a * (x[1] - x[2]));
          give(1, a * x[0]);
          give(2, a * (1.0 - x[0]));
          break;
        case LGOp::sigmoid: {
          const double s = val(uid, k);
          give(0, a * s * (1.0 - s));
          break;
        }
        case LGOp::inverse: {
          const double r = val(uid, k);
          give(0, -a * r * r);
          break;
        }
        case LGOp::atom_bool: {
          const double p = std::clamp(x[0], 0.0, 1.0);
          give(0, x[1] != 0.0 ? a / p : -a / (1.0 - p));
          break;
        }
        case LGOp::atom_softmax: {
          const std::size_t m = x.size() - 1;
          const std::span<const double> logits(x.data(), m);
          const double lse = log_sum_exp(logits);
          const auto y = static_cast<std::size_t>(x.back());
          for (std::size_t i = 0; i < m; ++i) {
            give(i, a * ((i == y ? 1.0 : 0.0) - std::exp(logits[i] - lse)));
          }
          break;
        }
        default:
          break;  // discrete or parameter-free ops
      }
    }
  }
  std::map<std::string, double> out;
  for (const auto& [name, id] : param_nodes_) out[name] = slot(id, 0);
  return out;
}

// --- state -------------------------------------------------------------------------------

LikelihoodGraph::State LikelihoodGraph::save_state() const {
  State s;
  for (auto id : map_inputs_) s.inputs.push_back(val(id, 0));
  for (auto id : unobserved_inputs_) {
    for (std::size_t k = 0; k < samples_; ++k) s.inputs.push_back(val(id, k));
  }
  s.rngs = rngs_;
  return s;
}

void LikelihoodGraph::restore_state(const State& state) {
  std::size_t i = 0;
  for (auto id : map_inputs_) val(id, 0) = state.inputs.at(i++);
  for (auto id : unobserved_inputs_) {
    for (std::size_t k = 0; k < samples_; ++k) val(id, k) = state.inputs.at(i++);
  }
  rngs_ = state.rngs;
  evaluate_full();
}

std::string LikelihoodGraph::to_dot() const {
  std::ostringstream os;
  os << "digraph likelihood {\n  rankdir=BT;\n  root [shape=doublecircle];\n";
  for (std::uint32_t id = 0; id < nodes_.size(); ++id) {
    const Node& n = nodes_[id];
    os << "  n" << id << " [label=\"" << op_name(n.op);
    if (n.op == LGOp::constant || n.op == LGOp::param) os << "\\n" << format_double(val(id, 0));
    if (n.op == LGOp::input) {
      const auto idx = static_cast<std::size_t>(n.aux);
      os << "\\n" << graph_.atom_to_string(n.per_sample ? unobserved_[idx] : map_atoms_[idx]);
    }
    os << "\"";
    if (n.op == LGOp::input) os << (n.per_sample ? " shape=box style=dashed" : " shape=box");
    os << "];\n";
    for (auto k : n.kids) os << "  n" << k << " -> n" << id << ";\n";
  }
  for (auto leaf : leaves_) os << "  n" << leaf << " -> root;\n";
  os << "}\n";
  return os.str();
}

}  // namespace nesy
