#include <doctest.h>

#include <algorithm>

#include "nesy/error.hpp"
#include "nesy/graph_io.hpp"
#include "oracles.hpp"

using namespace nesy;

namespace {

Signature typed_signature() {
  Signature sig;
  sig.add_node_type("water");
  sig.add_node_type("land");
  sig.add({"flows", 2, ValueRange::boolean(), false, {"land", "water"}});
  sig.add({"near", 2, ValueRange::boolean(), true, {}});
  sig.add({"crop", 1, ValueRange::categorical({"corn", "soy"}), false, {"land"}});
  sig.add({"area", 1, ValueRange::numeric(0.0, 10.0), false, {"land"}});
  return sig;
}

AttributedGraph small_graph() {
  AttributedGraph g(typed_signature());
  g.add_node("w", "water");
  g.add_node("a", "land");
  g.add_node("b", "land");
  return g;
}

}  // namespace

TEST_CASE("signature rejects duplicates and resolves names") {
  Signature sig = typed_signature();
  CHECK_THROWS_AS(sig.add({"crop", 1, ValueRange::boolean(), false, {}}), SchemaError);
  CHECK(sig.id_of("area") == 3);
  CHECK_FALSE(sig.find("nope").has_value());
  CHECK(sig.relation(sig.id_of("crop")).range.index_of("soy") == std::optional<std::size_t>(1));
  CHECK(sig.check().empty());
}

TEST_CASE("value ranges") {
  CHECK(ValueRange::boolean().cardinality() == 2);
  CHECK(ValueRange::categorical({"a", "b", "c"}).cardinality() == 3);
  CHECK(ValueRange::numeric(0, 1).cardinality() == 0);
  CHECK(ValueRange::numeric(0, 1).contains(0.5));
  CHECK_FALSE(ValueRange::numeric(0, 1).contains(1.5));
  CHECK_FALSE(ValueRange::categorical({"a", "b"}).contains(2.0));
  CHECK_FALSE(ValueRange::boolean().contains(0.5));
}

TEST_CASE("symmetric atoms are normalized") {
  AttributedGraph g = small_graph();
  g.set_value("near", std::array<NodeId, 2>{2, 1}, 1.0);
  const RelId near = g.signature().id_of("near");
  CHECK(g.value(g.atom(near, std::array<NodeId, 2>{1, 2})) == std::optional<double>(1.0));
  CHECK(g.atoms_of(near).size() == 1);
  CHECK(neighbors(g, near, 1) == std::vector<NodeId>{2});
  CHECK(neighbors(g, near, 2) == std::vector<NodeId>{1});
}

TEST_CASE("directed adjacency follows stored edges") {
  AttributedGraph g = small_graph();
  const RelId flows = g.signature().id_of("flows");
  g.set_value("flows", std::array<NodeId, 2>{1, 0}, 1.0);
  g.set_value("flows", std::array<NodeId, 2>{2, 0}, 1.0);
  g.set_value("flows", std::array<NodeId, 2>{2, 0}, 0.0);
  CHECK(neighbors(g, flows, 0, Direction::incoming) == std::vector<NodeId>{1});
  CHECK(neighbors(g, flows, 1, Direction::outgoing) == std::vector<NodeId>{0});
  CHECK(neighbors(g, flows, 0, Direction::outgoing).empty());
}

TEST_CASE("grounding respects argument types and symmetry") {
  AttributedGraph g = small_graph();
  const Signature& sig = g.signature();
  CHECK(enumerate_ground_atoms(g, sig.id_of("flows")).size() == 2);   // land x water
  CHECK(enumerate_ground_atoms(g, sig.id_of("near")).size() == 6);    // unordered pairs with loops
  CHECK(enumerate_ground_atoms(g, sig.id_of("crop")).size() == 2);
  CHECK(g.in_domain(sig.id_of("crop"), std::array<NodeId, 1>{1}));
  CHECK_FALSE(g.in_domain(sig.id_of("crop"), std::array<NodeId, 1>{0}));
}

TEST_CASE("validate reports range and type violations") {
  AttributedGraph g = small_graph();
  CHECK(validate(g).empty());
  g.set_value("area", std::array<NodeId, 1>{1}, 12.0);
  g.set_value("crop", std::array<NodeId, 1>{0}, 0.0);
  const auto report = validate(g);
  REQUIRE(report.size() == 2);
  const bool range = std::any_of(report.begin(), report.end(),
                                 [](const Violation& v) { return v.message.find("outside") != std::string::npos; });
  CHECK(range);
}

TEST_CASE("graph JSON round trip") {
  AttributedGraph g = small_graph();
  g.set_value("flows", std::array<NodeId, 2>{1, 0}, 1.0);
  g.set_value("near", std::array<NodeId, 2>{1, 2}, 1.0);
  g.set_value("crop", std::array<NodeId, 1>{2}, 1.0);
  g.set_value("area", std::array<NodeId, 1>{1}, 3.25);
  const AttributedGraph back = graph_from_json(graph_to_json(g));
  CHECK(back == g);
  CHECK(graph_to_json(back) == graph_to_json(g));
}

TEST_CASE("graph JSON errors name the field") {
  const std::string text = R"({"signature": {"relations": [{"name": "c", "arity": 1,
      "range": {"categorical": ["x"]}}]}, "nodes": [{"id": "a"}],
      "atoms": [{"relation": "c", "args": ["a"], "value": "y"}]})";
  try {
    graph_from_json(text);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("atoms[0].value") != std::string::npos);
  }
  CHECK_THROWS_AS(graph_from_json("{"), SchemaError);
  CHECK_THROWS_AS(graph_from_json(R"({"signature": {"relations": []}, "nodes": [{"id": "a"}, {"id": "a"}]})"),
                  SchemaError);
}

TEST_CASE("fixture graphs load and validate") {
  for (const char* f : {"fig1c_graph.json", "watershed_sample.json"}) {
    CAPTURE(f);
    const AttributedGraph g = load_graph(nesy::testing::fixture_path(f));
    CHECK(validate(g).empty());
  }
  const AttributedGraph ws = load_graph(nesy::testing::fixture_path("watershed_sample.json"));
  std::size_t sub = 0, hru = 0, urb = 0;
  for (NodeId v = 0; v < ws.node_count(); ++v) {
    sub += ws.node_type(v) == "sub";
    hru += ws.node_type(v) == "hru";
    urb += ws.node_type(v) == "urb";
  }
  CHECK(sub == 23);
  CHECK(hru == 676);
  CHECK(urb == 290);
}

TEST_CASE("atom_name_less orders by relation name then arguments") {
  AttributedGraph g = small_graph();
  const Signature& sig = g.signature();
  const GroundAtom area_b = g.atom(sig.id_of("area"), std::array<NodeId, 1>{2});
  const GroundAtom crop_a = g.atom(sig.id_of("crop"), std::array<NodeId, 1>{1});
  const GroundAtom crop_b = g.atom(sig.id_of("crop"), std::array<NodeId, 1>{2});
  CHECK(atom_name_less(sig, area_b, crop_a));
  CHECK(atom_name_less(sig, crop_a, crop_b));
  CHECK_FALSE(atom_name_less(sig, crop_b, crop_a));
}
