#include "oracles.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "nesy/evaluate.hpp"
#include "nesy/graph_io.hpp"
#include "nesy/ising.hpp"
#include "nesy/numeric.hpp"
#include "nesy/parser.hpp"
#include "nesy/planning.hpp"

#ifndef NESY_FIXTURE_DIR
#error "NESY_FIXTURE_DIR must point at the fixtures directory"
#endif

namespace nesy::testing {

std::string fixture_path(const std::string& name) { return std::string(NESY_FIXTURE_DIR) + "/" + name; }

double enumerate_log_likelihood(const RBNModel& model, const AttributedGraph& graph,
                                const ParameterStore& params, const ModelRegistry* registry) {
  EvalContext ctx(graph, params, &model, registry);
  const Signature& sig = graph.signature();
  double ll = 0.0;
  for (const auto& def : model.definitions) {
    const RelId rel = sig.id_of(def.relation);
    const bool boolean = sig.relation(rel).range.kind == RangeKind::boolean;
    for (const auto& atom : enumerate_ground_atoms(graph, rel)) {
      const auto value = graph.value(atom);
      if (!value) throw std::logic_error("atom without value: " + graph.atom_to_string(atom));
      const auto dist = atom_distribution(def, atom, ctx);
      const auto index = boolean ? (*value > 0.5 ? 1 : 0) : static_cast<std::size_t>(*value);
      ll += std::log(dist.at(index));
    }
  }
  return ll;
}

namespace {

std::size_t cardinality(const AttributedGraph& g, const GroundAtom& a) {
  return g.signature().relation(a.rel).range.cardinality();
}

// Calls fn() for every joint assignment of `atoms` written into `g`.
template <class Fn>
void for_each_assignment(AttributedGraph& g, const std::vector<GroundAtom>& atoms, std::size_t i, Fn& fn) {
  if (i == atoms.size()) {
    fn();
    return;
  }
  for (std::size_t v = 0; v < cardinality(g, atoms[i]); ++v) {
    g.set_value(atoms[i], static_cast<double>(v));
    for_each_assignment(g, atoms, i + 1, fn);
  }
}

}  // namespace

double exact_log_likelihood(const RBNModel& model, const AttributedGraph& graph,
                            const AtomPartition& partition, const std::vector<int>& map_values,
                            const ParameterStore& params, const ModelRegistry* registry) {
  AttributedGraph g = graph;
  for (std::size_t i = 0; i < partition.map_atoms.size(); ++i) {
    g.set_value(partition.map_atoms[i], static_cast<double>(map_values.at(i)));
  }
  std::vector<double> terms;
  auto add = [&] { terms.push_back(enumerate_log_likelihood(model, g, params, registry)); };
  for_each_assignment(g, partition.unobserved, 0, add);
  return log_sum_exp(terms);
}

BruteForceMap brute_force_map(const RBNModel& model, const AttributedGraph& graph,
                              const AtomPartition& partition, const ParameterStore& params,
                              const ModelRegistry* registry) {
  BruteForceMap best;
  best.log_likelihood = -std::numeric_limits<double>::infinity();
  const std::size_t m = partition.map_atoms.size();
  std::vector<int> values(m, 0);
  while (true) {
    const double ll = exact_log_likelihood(model, graph, partition, values, params, registry);
    if (ll > best.log_likelihood) best = {values, ll};
    std::size_t i = 0;
    for (; i < m; ++i) {
      if (static_cast<std::size_t>(++values[i]) < cardinality(graph, partition.map_atoms[i])) break;
      values[i] = 0;
    }
    if (i == m) break;
  }
  return best;
}

std::vector<double> ising_exact(std::size_t n, double H, double F) {
  const std::size_t nodes = n * n;
  std::vector<double> field(nodes, 0.0);
  if (n > 1) {
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) {
        field[r * n + c] = -0.5 + static_cast<double>(r + c) / static_cast<double>(2 * (n - 1));
      }
    }
  }
  std::vector<double> logw(std::size_t{1} << nodes);
  for (std::size_t mask = 0; mask < logw.size(); ++mask) {
    auto y = [&](std::size_t r, std::size_t c) { return (mask >> (r * n + c)) & 1U ? 1.0 : -1.0; };
    double phi = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) {
        double around = 0.0;
        if (r > 0) around += y(r - 1, c);
        if (r + 1 < n) around += y(r + 1, c);
        if (c > 0) around += y(r, c - 1);
        if (c + 1 < n) around += y(r, c + 1);
        phi += y(r, c) * (F * field[r * n + c] + H * around);
      }
    }
    logw[mask] = phi;
  }
  const double z = log_sum_exp(logw);
  for (auto& w : logw) w = std::exp(w - z);
  return logw;
}

std::size_t ising_index(const std::vector<int>& labels) {
  std::size_t mask = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] > 0) mask |= std::size_t{1} << i;
  }
  return mask;
}

GnnProbe random_gnn_probe(std::uint64_t seed, std::size_t nodes, std::size_t hidden) {
  Signature sig;
  sig.add({"A", 1, ValueRange::numeric(-1.0, 1.0), false, {}});
  sig.add({"B", 1, ValueRange::categorical({"x", "y", "z"}), false, {}});
  sig.add({"E", 2, ValueRange::boolean(), false, {}});
  sig.add({"S", 2, ValueRange::boolean(), true, {}});
  sig.add({"T", 1, ValueRange::categorical({"t0", "t1", "t2"}), false, {}});
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> weight(-2.0, 2.0);
  const Direction dirs[3] = {Direction::incoming, Direction::outgoing, Direction::both};
  GnnArchitecture arch{"T", {"A", "B"}, {{"E", dirs[rng() % 3]}, {"S", Direction::both}}, {hidden},
                       unit(rng) < 0.5};
  GnnProbe probe{init_gnn(arch, sig, seed), AttributedGraph(sig)};
  std::vector<double> w(flatten(probe.model).size());
  for (auto& x : w) x = weight(rng);
  unflatten(probe.model, w);

  AttributedGraph& g = probe.graph;
  for (std::size_t i = 0; i < nodes; ++i) g.add_node("n" + std::to_string(i));
  for (NodeId v = 0; v < nodes; ++v) {
    g.set_value("A", std::array<NodeId, 1>{v}, 2.0 * unit(rng) - 1.0);
    g.set_value("B", std::array<NodeId, 1>{v}, static_cast<double>(rng() % 3));
  }
  for (NodeId a = 0; a < nodes; ++a) {
    for (NodeId b = 0; b < nodes; ++b) {
      if (a != b && unit(rng) < 0.3) g.set_value("E", std::array<NodeId, 2>{a, b}, 1.0);
      if (a < b && unit(rng) < 0.3) g.set_value("S", std::array<NodeId, 2>{a, b}, 1.0);
    }
  }
  return probe;
}

MapProblem random_map_problem(std::uint64_t seed) {
  Signature sig;
  sig.add_node_type("node");
  sig.add({"e", 2, ValueRange::boolean(), false, {"node", "node"}});
  for (const char* r : {"p", "q", "s"}) sig.add({r, 1, ValueRange::boolean(), false, {"node"}});
  AttributedGraph g(sig);
  for (int i = 0; i < 6; ++i) g.add_node("n" + std::to_string(i), "node");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> w(-3.0, 3.0);
  for (NodeId a = 0; a < 6; ++a) {
    for (NodeId b = 0; b < 6; ++b) {
      if (a != b && unit(rng) < 0.35) g.set_value("e", std::array<NodeId, 2>{a, b}, 1.0);
    }
    g.set_value("s", std::array<NodeId, 1>{a}, unit(rng) < 0.5 ? 1.0 : 0.0);
  }
  // Drawn up front: operands of + are not sequenced.
  std::vector<std::string> k;
  for (int i = 0; i < 8; ++i) k.push_back(format_double(w(rng)));
  const std::string fallback = format_double(0.05 + 0.9 * unit(rng));
  const std::string text =
      "p([node]v) = COMBINE " + k[0] + " * (COMBINE 1 WITH sum FORALL u WHERE e(u, v)), " + k[1] +
      " WITH l-reg;\n"
      "q([node]v) = COMBINE " + k[2] + " * p(v), " + k[3] +
      " * (COMBINE p(u) WITH sum FORALL u WHERE e(u, v)), " + k[4] + " WITH l-reg;\n"
      "s([node]v) = WIF q(v) THEN (COMBINE " + k[5] + " * p(v), " + k[6] +
      " * (COMBINE q(u) WITH sum FORALL u WHERE e(v, u)), " + k[7] + " WITH l-reg) ELSE " +
      fallback + ";\n";
  MapProblem problem{parse_model_or_throw(text, sig, "<random-map>"), std::move(g), {}};
  problem.partition = make_partition(problem.model, problem.graph, {"p", "q"});
  return problem;
}

std::vector<FixtureCase> fixture_cases() {
  std::vector<FixtureCase> cases;
  {
    FixtureCase c;
    c.name = "fig1c";
    c.file = fixture_path("fig1c.rbn");
    c.graph = load_graph(fixture_path("fig1c_graph.json"));
    c.model = parse_model_or_throw(read_text_file(c.file), c.graph.signature(), c.file);
    c.partition = make_partition(c.model, c.graph, {"star"});
    cases.push_back(std::move(c));
  }
  {
    FixtureCase c;
    c.name = "collective";
    c.file = fixture_path("collective.rbn");
    IsingParams p;
    p.n = 4;
    p.seed = 1;
    p.max_majority = 1.0;
    const IsingInstance inst = build_instance(p);
    c.graph = inst.graph;
    const Signature& sig = c.graph.signature();
    const RelId label = sig.id_of("Label");
    std::vector<char> is_train(c.graph.node_count(), 0);
    for (auto v : inst.train) is_train[v] = 1;
    for (NodeId v = 0; v < c.graph.node_count(); ++v) {
      const std::array<NodeId, 1> arg{v};
      if (!is_train[v]) c.graph.erase_value(c.graph.atom(label, arg));
      c.graph.set_value("hom_hat", arg, 0.8);
      c.graph.set_value("overline_LH", arg, 1.0);
    }
    GnnArchitecture arch{"Label", {"attr"}, {{"edge", Direction::both}}, {4}, false};
    c.registry.add("label_gnn", init_gnn(arch, sig, 1));
    c.model = parse_model_or_throw(read_text_file(c.file), sig, c.file);
    c.partition = make_partition(c.model, c.graph, {"Label"});
    cases.push_back(std::move(c));
  }
  {
    FixtureCase c;
    c.name = "planning";
    c.file = fixture_path("planning.rbn");
    WatershedParams p;
    p.subbasins = 3;
    p.agr_nodes = 5;
    p.urban_nodes = 1;
    p.seed = 1;
    const Watershed ws = generate_watershed(p);
    c.graph = planning_graph(ws);
    c.registry.add("pollution", oracle_pollution_gnn(c.graph.signature()));
    c.model = parse_model_or_throw(read_text_file(c.file), c.graph.signature(), c.file);
    c.partition = make_partition(c.model, c.graph, {"LandUse"});
    cases.push_back(std::move(c));
  }
  return cases;
}

// --- AST fuzzing ---------------------------------------------------------------

namespace {

struct AstGen {
  std::mt19937_64& rng;

  std::size_t pick(std::size_t n) { return static_cast<std::size_t>(rng() % n); }
  bool coin(double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }

  std::string var() { return std::string(1, "vwux"[pick(4)]); }
  std::string rel() { return "r" + std::to_string(pick(4)); }
  std::string category() { return "c" + std::to_string(pick(3)); }
  std::string type() {
    static const char* types[] = {"", "", "node", "sub"};
    return types[pick(4)];
  }

  Term term() { return coin(0.85) ? Term::var(var()) : Term::node("n" + std::to_string(pick(5))); }
  std::vector<Term> terms() {
    std::vector<Term> t{term()};
    if (coin(0.4)) t.push_back(term());
    return t;
  }
  std::vector<TypedVar> typed_vars(std::size_t lo, std::size_t hi) {
    std::vector<TypedVar> out;
    const std::size_t n = lo + pick(hi - lo + 1);
    for (std::size_t i = 0; i < n; ++i) out.push_back({std::string(1, "vwuxyz"[i]), type()});
    return out;
  }

  double constant() {
    switch (pick(6)) {
      case 0:
        return static_cast<double>(pick(10));
      case 1:
        return -static_cast<double>(1 + pick(9));
      case 2:
        return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      case 3:
        return std::uniform_real_distribution<double>(-50.0, 50.0)(rng);
      case 4:
        return std::ldexp(static_cast<double>(1 + pick(1000)), -static_cast<int>(pick(40)));
      default:
        return 1e-7 * static_cast<double>(1 + pick(100));
    }
  }

  FormulaPtr atom() { return f::atom(rel(), terms()); }

  FormulaPtr guard(int depth) {
    if (depth <= 0 || coin(0.4)) {
      switch (pick(4)) {
        case 0:
          return atom();
        case 1:
          return f::term_compare(term(), term(), coin(0.5));
        case 2:
          return f::equals_value(rel(), terms(), category());
        default:
          return f::constant(coin(0.5) ? 1.0 : 0.0);
      }
    }
    switch (pick(3)) {
      case 0:
        return f::negate(guard(depth - 1));
      case 1:
        return f::conj(guard(depth - 1), guard(depth - 1));
      default:
        return f::disj(guard(depth - 1), guard(depth - 1));
    }
  }

  FormulaPtr formula(int depth) {
    if (depth <= 0 || coin(0.3)) {
      switch (pick(7)) {
        case 0:
          return f::constant(constant());
        case 1:
          return f::param("p" + std::to_string(pick(3)));
        case 2:
          return atom();
        case 3:
          return f::equals_value(rel(), terms(), category());
        case 4:
          return f::equals_atom(atom(), atom());
        case 5:
          return f::term_compare(term(), term(), coin(0.5));
        default:
          return f::macro("m" + std::to_string(pick(3)), terms());
      }
    }
    switch (pick(7)) {
      case 0:
        return f::negate(formula(depth - 1));
      case 1:
        return f::conj(formula(depth - 1), formula(depth - 1));
      case 2:
        return f::disj(formula(depth - 1), formula(depth - 1));
      case 3:
        return f::wif(formula(depth - 1), formula(depth - 1), formula(depth - 1));
      case 4:
        return f::add(formula(depth - 1), formula(depth - 1));
      case 5:
        return f::mul(formula(depth - 1), formula(depth - 1));
      default: {
        std::vector<FormulaPtr> body;
        const std::size_t n = 1 + pick(3);
        for (std::size_t i = 0; i < n; ++i) body.push_back(formula(depth - 1));
        const auto forall = typed_vars(0, 2);
        FormulaPtr where = !forall.empty() && coin(0.6) ? guard(2) : nullptr;
        return f::combine(std::move(body), static_cast<Combiner>(pick(4)), forall, where);
      }
    }
  }

  FormulaPtr definition_body(const std::vector<TypedVar>& head) {
    const std::size_t kind = pick(10);
    if (kind < 7) return formula(4);
    if (kind == 7) {
      std::vector<FormulaPtr> parts;
      const std::size_t n = 2 + pick(3);
      for (std::size_t i = 0; i < n; ++i) parts.push_back(formula(2));
      return f::softmax(std::move(parts));
    }
    std::vector<std::string> free;
    for (const auto& p : head) free.push_back(p.name);
    std::vector<GnnClause> clauses;
    const std::size_t n = 1 + pick(2);
    for (std::size_t i = 0; i < n; ++i) {
      GnnClause c;
      c.atoms.push_back(atom());
      if (coin(0.3)) c.atoms.push_back(atom());
      c.forall = typed_vars(0, 2);
      if (coin(0.6)) c.where = guard(2);
      clauses.push_back(std::move(c));
    }
    return f::gnn("g" + std::to_string(pick(2)), static_cast<int>(2 + pick(3)), free, std::move(clauses));
  }
};

}  // namespace

RBNModel random_model_ast(std::mt19937_64& rng) {
  AstGen gen{rng};
  RBNModel model;
  const std::size_t params = gen.pick(3);
  for (std::size_t i = 0; i < params; ++i) {
    ParamDecl d{"p" + std::to_string(i), gen.constant(), std::nullopt, std::nullopt};
    if (gen.coin(0.5)) {
      d.lo = -static_cast<double>(gen.pick(5));
      d.hi = static_cast<double>(1 + gen.pick(5));
    }
    model.params.push_back(d);
  }
  const std::size_t macros = gen.pick(3);
  for (std::size_t i = 0; i < macros; ++i) {
    auto head = gen.typed_vars(1, 2);
    model.macros.push_back({"m" + std::to_string(i), head, gen.formula(4), {}});
  }
  const std::size_t defs = 1 + gen.pick(3);
  for (std::size_t i = 0; i < defs; ++i) {
    auto head = gen.typed_vars(1, 2);
    auto body = gen.definition_body(head);
    model.definitions.push_back({"r" + std::to_string(i), head, body, {}});
  }
  return model;
}

double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  double tv = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) tv += std::abs(p[i] - q.at(i));
  return 0.5 * tv;
}

}  // namespace nesy::testing
