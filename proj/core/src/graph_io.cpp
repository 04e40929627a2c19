#include "nesy/graph_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "nesy/error.hpp"

namespace nesy {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& field, const std::string& message) {
  throw SchemaError(field + ": " + message);
}

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) bad(where, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) bad(where, std::string("missing key \"") + key + "\"");
  return *it;
}

ValueRange parse_range(const json& j, const std::string& where) {
  if (j.is_string()) {
    if (j.get<std::string>() == "boolean") return ValueRange::boolean();
    bad(where, "unknown range \"" + j.get<std::string>() + "\"");
  }
  if (j.is_object() && j.contains("categorical")) {
    const json& names = j.at("categorical");
    if (!names.is_array()) bad(where + ".categorical", "expected an array of value names");
    std::vector<std::string> out;
    for (const auto& n : names) {
      if (!n.is_string()) bad(where + ".categorical", "value names must be strings");
      out.push_back(n.get<std::string>());
    }
    return ValueRange::categorical(std::move(out));
  }
  if (j.is_object() && j.contains("numeric")) {
    const json& b = j.at("numeric");
    if (!b.is_array() || b.size() != 2 || !b[0].is_number() || !b[1].is_number()) {
      bad(where + ".numeric", "expected [lo, hi]");
    }
    return ValueRange::numeric(b[0].get<double>(), b[1].get<double>());
  }
  bad(where, "expected \"boolean\", {\"categorical\": [...]} or {\"numeric\": [lo, hi]}");
}

json range_to_json(const ValueRange& r) {
  switch (r.kind) {
    case RangeKind::boolean:
      return "boolean";
    case RangeKind::categorical:
      return json{{"categorical", r.categories}};
    case RangeKind::numeric:
      return json{{"numeric", json::array({r.lo, r.hi})}};
  }
  return "boolean";
}

Signature parse_signature(const json& j) {
  Signature sig;
  if (!j.is_object()) bad("signature", "expected an object");
  if (j.contains("node_types")) {
    const json& types = j.at("node_types");
    if (!types.is_array()) bad("signature.node_types", "expected an array");
    for (const auto& t : types) {
      if (!t.is_string()) bad("signature.node_types", "node types must be strings");
      sig.add_node_type(t.get<std::string>());
    }
  }
  const json& rels = require(j, "relations", "signature");
  if (!rels.is_array()) bad("signature.relations", "expected an array");
  for (std::size_t i = 0; i < rels.size(); ++i) {
    const std::string where = "signature.relations[" + std::to_string(i) + "]";
    const json& r = rels[i];
    Relation rel;
    const json& name = require(r, "name", where);
    if (!name.is_string()) bad(where + ".name", "expected a string");
    rel.name = name.get<std::string>();
    const json& arity = require(r, "arity", where);
    if (!arity.is_number_integer()) bad(where + ".arity", "expected an integer");
    rel.arity = arity.get<int>();
    rel.range = r.contains("range") ? parse_range(r.at("range"), where + ".range")
                                    : ValueRange::boolean();
    if (r.contains("symmetric")) {
      if (!r.at("symmetric").is_boolean()) bad(where + ".symmetric", "expected a boolean");
      rel.symmetric = r.at("symmetric").get<bool>();
    }
    if (r.contains("arg_types")) {
      const json& types = r.at("arg_types");
      if (!types.is_array()) bad(where + ".arg_types", "expected an array");
      for (const auto& t : types) {
        if (!t.is_string()) bad(where + ".arg_types", "expected strings");
        rel.arg_types.push_back(t.get<std::string>());
      }
    }
    try {
      sig.add(std::move(rel));
    } catch (const SchemaError& e) {
      bad(where, e.what());
    }
  }
  return sig;
}

json signature_to_json(const Signature& sig) {
  json rels = json::array();
  for (const auto& r : sig.relations()) {
    json o{{"name", r.name}, {"arity", r.arity}, {"range", range_to_json(r.range)}};
    if (r.symmetric) o["symmetric"] = true;
    if (!r.arg_types.empty()) o["arg_types"] = r.arg_types;
    rels.push_back(std::move(o));
  }
  json out{{"relations", std::move(rels)}};
  if (!sig.node_types().empty()) out["node_types"] = sig.node_types();
  return out;
}

json parse_document(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("invalid JSON: ") + e.what());
  }
}

}  // namespace

AttributedGraph graph_from_json(const std::string& text) {
  const json doc = parse_document(text);
  if (!doc.is_object()) bad("<root>", "expected an object");
  AttributedGraph g(parse_signature(require(doc, "signature", "<root>")));
  const json& nodes = require(doc, "nodes", "<root>");
  if (!nodes.is_array()) bad("nodes", "expected an array");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string where = "nodes[" + std::to_string(i) + "]";
    const json& id = require(nodes[i], "id", where);
    if (!id.is_string()) bad(where + ".id", "expected a string");
    std::string type;
    if (nodes[i].contains("type")) {
      if (!nodes[i].at("type").is_string()) bad(where + ".type", "expected a string");
      type = nodes[i].at("type").get<std::string>();
    }
    try {
      g.add_node(id.get<std::string>(), std::move(type));
    } catch (const SchemaError& e) {
      bad(where, e.what());
    }
  }
  if (doc.contains("atoms")) {
    const json& atoms = doc.at("atoms");
    if (!atoms.is_array()) bad("atoms", "expected an array");
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      const std::string where = "atoms[" + std::to_string(i) + "]";
      const json& a = atoms[i];
      const json& rel_name = require(a, "relation", where);
      if (!rel_name.is_string()) bad(where + ".relation", "expected a string");
      auto rel = g.signature().find(rel_name.get<std::string>());
      if (!rel) bad(where + ".relation", "unknown relation \"" + rel_name.get<std::string>() + "\"");
      const Relation& r = g.signature().relation(*rel);
      const json& args = require(a, "args", where);
      if (!args.is_array() || static_cast<int>(args.size()) != r.arity) {
        bad(where + ".args", "expected " + std::to_string(r.arity) + " node ids");
      }
      std::vector<NodeId> ids;
      for (const auto& arg : args) {
        if (!arg.is_string()) bad(where + ".args", "node ids must be strings");
        auto v = g.find_node(arg.get<std::string>());
        if (!v) bad(where + ".args", "unknown node \"" + arg.get<std::string>() + "\"");
        ids.push_back(*v);
      }
      const json& value = require(a, "value", where);
      double x = 0.0;
      switch (r.range.kind) {
        case RangeKind::boolean:
          if (!value.is_boolean()) bad(where + ".value", "expected a boolean");
          x = value.get<bool>() ? 1.0 : 0.0;
          break;
        case RangeKind::categorical: {
          if (!value.is_string()) bad(where + ".value", "expected a value name");
          auto idx = r.range.index_of(value.get<std::string>());
          if (!idx) bad(where + ".value", "\"" + value.get<std::string>() + "\" is not a value of " + r.name);
          x = static_cast<double>(*idx);
          break;
        }
        case RangeKind::numeric:
          if (!value.is_number()) bad(where + ".value", "expected a number");
          x = value.get<double>();
          break;
      }
      g.set_value(g.atom(*rel, ids), x);
    }
  }
  return g;
}

std::string graph_to_json(const AttributedGraph& g) {
  json nodes = json::array();
  for (NodeId v = 0; v < g.node_count(); ++v) {
    json n{{"id", g.node_name(v)}};
    if (!g.node_type(v).empty()) n["type"] = g.node_type(v);
    nodes.push_back(std::move(n));
  }
  json atoms = json::array();
  const Signature& sig = g.signature();
  for (RelId rel = 0; rel < sig.size(); ++rel) {
    const Relation& r = sig.relation(rel);
    for (const auto& [atom, value] : g.atoms_of(rel)) {
      json args = json::array();
      for (NodeId v : atom.arguments()) args.push_back(g.node_name(v));
      json val;
      switch (r.range.kind) {
        case RangeKind::boolean:
          val = value != 0.0;
          break;
        case RangeKind::categorical:
          val = r.range.categories.at(static_cast<std::size_t>(value));
          break;
        case RangeKind::numeric:
          val = value;
          break;
      }
      atoms.push_back(json{{"relation", r.name}, {"args", std::move(args)}, {"value", std::move(val)}});
    }
  }
  json doc{{"signature", signature_to_json(sig)}, {"nodes", std::move(nodes)},
           {"atoms", std::move(atoms)}};
  return doc.dump(1) + "\n";
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SchemaError("cannot write " + path);
  out << text;
  if (!out) throw SchemaError("error writing " + path);
}

AttributedGraph load_graph(const std::string& path) {
  try {
    return graph_from_json(read_text_file(path));
  } catch (const SchemaError& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

void save_graph(const AttributedGraph& graph, const std::string& path) {
  write_text_file(path, graph_to_json(graph));
}

Signature load_signature(const std::string& path) {
  try {
    const json doc = parse_document(read_text_file(path));
    return parse_signature(require(doc, "signature", "<root>"));
  } catch (const SchemaError& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

}  // namespace nesy
