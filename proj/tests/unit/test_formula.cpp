#include <doctest.h>

#include <cmath>

#include "nesy/error.hpp"
#include "nesy/evaluate.hpp"
#include "nesy/graph_io.hpp"
#include "nesy/numeric.hpp"
#include "nesy/parser.hpp"
#include "oracles.hpp"

using namespace nesy;

namespace {

// a,b,c red/red/green, d blue; a-b, a-c, b-c in both directions, d->a.
AttributedGraph colored() { return load_graph(nesy::testing::fixture_path("fig1c_graph.json")); }

double eval_at(const FormulaPtr& fm, const AttributedGraph& g, const std::string& node,
               const ParameterStore& params = {}, const RBNModel* model = nullptr) {
  return evaluate(*fm, g, Binding{{"v", *g.find_node(node)}}, params, model);
}

FormulaPtr c(double x) { return f::constant(x); }
Term v() { return Term::var("v"); }
Term w() { return Term::var("w"); }

}  // namespace

TEST_CASE("connectives follow the probabilistic reading") {
  const AttributedGraph g = colored();
  CHECK(eval_at(f::negate(c(0.3)), g, "a") == doctest::Approx(0.7));
  CHECK(eval_at(f::conj(c(0.3), c(0.5)), g, "a") == doctest::Approx(0.15));
  CHECK(eval_at(f::disj(c(0.3), c(0.5)), g, "a") == doctest::Approx(0.3 + 0.5 - 0.15));
  CHECK(eval_at(f::wif(c(0.25), c(0.8), c(0.4)), g, "a") == doctest::Approx(0.25 * 0.8 + 0.75 * 0.4));
  CHECK(eval_at(f::add(c(0.3), f::mul(c(2.0), c(-0.5))), g, "a") == doctest::Approx(-0.7));
}

TEST_CASE("atoms, value tests and term comparisons") {
  const AttributedGraph g = colored();
  CHECK(eval_at(f::equals_value("color", {v()}, "red"), g, "a") == 1.0);
  CHECK(eval_at(f::equals_value("color", {v()}, "red"), g, "c") == 0.0);
  CHECK(eval_at(f::atom("edge", {v(), Term::node("b")}), g, "a") == 1.0);
  CHECK(eval_at(f::atom("edge", {v(), Term::node("d")}), g, "a") == 0.0);  // absent Boolean reads false
  CHECK(eval_at(f::equals_atom(f::atom("color", {v()}), f::atom("color", {Term::node("b")})), g, "a") == 1.0);
  CHECK(eval_at(f::equals_atom(f::atom("color", {v()}), f::atom("color", {Term::node("c")})), g, "a") == 0.0);
  CHECK(eval_at(f::term_compare(v(), Term::node("a"), false), g, "a") == 1.0);
  CHECK(eval_at(f::term_compare(v(), Term::node("a"), true), g, "a") == 0.0);
}

TEST_CASE("combination functions over neighbors") {
  const AttributedGraph g = colored();
  const FormulaPtr red_neighbor = f::equals_value("color", {w()}, "red");
  const FormulaPtr guard = f::atom("edge", {v(), w()});
  const std::vector<TypedVar> forall{{"w", ""}};
  // a's out-neighbors: b (red) and c (green).
  CHECK(eval_at(f::combine({red_neighbor}, Combiner::sum, forall, guard), g, "a") == 1.0);
  CHECK(eval_at(f::combine({red_neighbor, c(1.0)}, Combiner::sum, forall, guard), g, "a") == 3.0);
  CHECK(eval_at(f::combine({red_neighbor}, Combiner::mean, forall, guard), g, "a") == 0.5);
  CHECK(eval_at(f::combine({c(0.5), c(-2.0)}, Combiner::lreg), g, "a") == doctest::Approx(sigmoid(-1.5)));
  CHECK(eval_at(f::combine({c(4.0), c(1.0)}, Combiner::invsum), g, "a") == doctest::Approx(0.2));
  CHECK_THROWS_AS(eval_at(f::combine({c(1.0), c(-1.0)}, Combiner::invsum), g, "a"), EvalError);
  // d has no out-edge to a red node other than a: d->a only.
  CHECK(eval_at(f::combine({red_neighbor}, Combiner::sum, forall, guard), g, "d") == 1.0);
}

TEST_CASE("nested quantifiers count triangles") {
  const AttributedGraph g = colored();
  const auto sig = g.signature();
  const auto r = parse_model(
      "star([node]v) := COMBINE (edge(v, w) & edge(w, u) & edge(u, v) & v != w & v != u & w != u)"
      " WITH sum FORALL w, u;",
      sig);
  REQUIRE(r.ok());
  const auto& body = r.model.definitions.front().body;
  // a sits on the triangle a-b-c, counted in both orientations.
  CHECK(eval_at(body, g, "a") == 2.0);
  CHECK(eval_at(body, g, "d") == 0.0);
}

TEST_CASE("macros and parameters") {
  const AttributedGraph g = colored();
  const auto r = parse_model(
      "$k = 0.25;\n"
      "@same(x, y) := color(x) = color(y);\n"
      "star([node]v) := COMBINE $k * @same(v, w) WITH sum FORALL w WHERE edge(v, w);",
      g.signature());
  REQUIRE(r.ok());
  const ParameterStore params = r.model.default_params();
  CHECK(params.get("k") == 0.25);
  const auto& body = r.model.definitions.front().body;
  CHECK(eval_at(body, g, "a", params, &r.model) == doctest::Approx(0.25));  // only b matches
  const RBNModel flat = expand_macros(r.model);
  CHECK(flat.macros.empty());
  CHECK(eval_at(flat.definitions.front().body, g, "a", params, &flat) == doctest::Approx(0.25));
  CHECK(r.model.referenced_params() == std::vector<std::string>{"k"});
  ParameterStore empty;
  CHECK_THROWS_AS(eval_at(body, g, "a", empty, &r.model), EvalError);
}

TEST_CASE("unbound variables raise EvalError") {
  const AttributedGraph g = colored();
  CHECK_THROWS_AS(eval_at(f::atom("edge", {v(), Term::var("zz")}), g, "a"), EvalError);
}

TEST_CASE("atom distributions") {
  const AttributedGraph g = colored();
  const auto r = parse_model(read_text_file(nesy::testing::fixture_path("fig1c.rbn")), g.signature());
  REQUIRE(r.ok());
  const ParameterStore params;
  EvalContext ctx(g, params, &r.model);
  const RelId color = g.signature().id_of("color");
  const auto dist = atom_distribution(*r.model.find_definition("color"), g.atom(color, {0}), ctx);
  const double z = std::exp(5.1) + std::exp(3.8) + std::exp(3.4);
  REQUIRE(dist.size() == 3);
  CHECK(dist[0] == doctest::Approx(std::exp(5.1) / z).epsilon(1e-14));
  CHECK(dist[2] == doctest::Approx(std::exp(3.4) / z).epsilon(1e-14));

  // edge(a, b): same color, so 0.3.
  const RelId edge = g.signature().id_of("edge");
  const auto e = atom_distribution(*r.model.find_definition("edge"), g.atom(edge, {0, 1}), ctx);
  CHECK(e[1] == doctest::Approx(0.3));
  CHECK(e[0] == doctest::Approx(0.7));

  // star(a): log-reg of 0.3 (red) and 0.5 * 2 triangle instances.
  const RelId star = g.signature().id_of("star");
  const auto s = atom_distribution(*r.model.find_definition("star"), g.atom(star, {0}), ctx);
  CHECK(s[1] == doctest::Approx(sigmoid(0.3 + 0.5 * 2.0)).epsilon(1e-14));
}

TEST_CASE("probabilities outside [0, 1] are rejected") {
  const AttributedGraph g = colored();
  const auto r = parse_model("star([node]v) := 0.5 + 0.7;", g.signature());
  REQUIRE(r.ok());
  const ParameterStore params;
  EvalContext ctx(g, params, &r.model);
  const RelId star = g.signature().id_of("star");
  CHECK_THROWS_AS(atom_distribution(r.model.definitions.front(), g.atom(star, {0}), ctx), EvalError);
}

TEST_CASE("structure helpers") {
  const AttributedGraph g = colored();
  const auto r = parse_model(read_text_file(nesy::testing::fixture_path("fig1c.rbn")), g.signature());
  REQUIRE(r.ok());
  const auto rels = referenced_relations(r.model, *r.model.find_definition("star")->body);
  CHECK(std::find(rels.begin(), rels.end(), "color") != rels.end());
  CHECK(std::find(rels.begin(), rels.end(), "edge") != rels.end());
  CHECK(free_variables(*f::add(f::atom("edge", {v(), w()}), f::atom("star", {v()}))) ==
        std::vector<std::string>{"v", "w"});

  const RBNModel probe = parameterize_constants(r.model, "c");
  CHECK(probe.params.size() >= 8);
  const ParameterStore params = probe.default_params();
  EvalContext a(g, ParameterStore{}, &r.model);
  EvalContext b(g, params, &probe);
  const RelId star = g.signature().id_of("star");
  const auto pa = atom_distribution(*r.model.find_definition("star"), g.atom(star, {1}), a);
  const auto pb = atom_distribution(*probe.find_definition("star"), g.atom(star, {1}), b);
  CHECK(pa[1] == pb[1]);
}

TEST_CASE("partitions split probabilistic atoms") {
  const AttributedGraph g = colored();
  const auto r = parse_model(read_text_file(nesy::testing::fixture_path("fig1c.rbn")), g.signature());
  REQUIRE(r.ok());
  const AtomPartition p = make_partition(r.model, g, {"star"});
  // 4 colors + 7 edges + star(d) observed; star(a..c) MAP; 9 edges unobserved.
  CHECK(p.observed.size() == 12);
  CHECK(p.map_atoms.size() == 3);
  CHECK(p.unobserved.size() == 9);
  CHECK(check_partition(r.model, g, p).empty());
  AtomPartition broken = p;
  broken.unobserved.pop_back();
  CHECK_FALSE(check_partition(r.model, g, broken).empty());
}
