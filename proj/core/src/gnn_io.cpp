// Weight files:
//
//   {"target": "Label", "features": ["A"],
//    "edges": [{"relation": "edge", "direction": "incoming"}],
//    "layers": [{"in": 1, "out": 4, "self": [...], "agg": [[...]],
//                "readout": false, "read": [], "bias": [...]}]}
//
// A layer may carry "activation": "sigmoid"; any other activation is rejected.
// Matrices are row-major out x in. `direction` is incoming, outgoing or both.

#include <json.hpp>

#include "nesy/error.hpp"
#include "nesy/gnn.hpp"
#include "nesy/graph_io.hpp"

namespace nesy {

using nlohmann::json;

namespace {

const char* direction_name(Direction d) {
  switch (d) {
    case Direction::incoming:
      return "incoming";
    case Direction::outgoing:
      return "outgoing";
    case Direction::both:
      return "both";
  }
  return "incoming";
}

[[noreturn]] void bad(const std::string& field, const std::string& message) {
  throw SchemaError(field + ": " + message);
}

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) bad(where, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) bad(where, std::string("missing key \"") + key + "\"");
  return *it;
}

std::vector<double> numbers(const json& j, const std::string& where) {
  if (!j.is_array()) bad(where, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& x : j) {
    if (!x.is_number()) bad(where, "expected numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

std::size_t count(const json& j, const std::string& where) {
  if (!j.is_number_unsigned()) bad(where, "expected a non-negative integer");
  return j.get<std::size_t>();
}

}  // namespace

std::string gnn_to_json(const GnnModel& model) {
  json edges = json::array();
  for (const auto& e : model.edges) {
    edges.push_back({{"relation", e.relation}, {"direction", direction_name(e.direction)}});
  }
  json layers = json::array();
  for (const auto& L : model.layers) {
    layers.push_back({{"in", L.in},
                      {"out", L.out},
                      {"self", L.self},
                      {"agg", L.agg},
                      {"readout", L.readout},
                      {"read", L.read},
                      {"bias", L.bias}});
  }
  json doc{{"target", model.target},
           {"features", model.features},
           {"edges", std::move(edges)},
           {"layers", std::move(layers)}};
  return doc.dump(1) + "\n";
}

GnnModel gnn_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("invalid JSON: ") + e.what());
  }
  GnnModel model;
  const json& target = require(doc, "target", "<root>");
  if (!target.is_string()) bad("target", "expected a string");
  model.target = target.get<std::string>();
  const json& features = require(doc, "features", "<root>");
  if (!features.is_array()) bad("features", "expected an array");
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (!features[i].is_string()) bad("features[" + std::to_string(i) + "]", "expected a string");
    model.features.push_back(features[i].get<std::string>());
  }
  if (doc.contains("edges")) {
    const json& edges = doc.at("edges");
    if (!edges.is_array()) bad("edges", "expected an array");
    for (std::size_t i = 0; i < edges.size(); ++i) {
      const std::string where = "edges[" + std::to_string(i) + "]";
      EdgeSpec e;
      const json& rel = require(edges[i], "relation", where);
      if (!rel.is_string()) bad(where + ".relation", "expected a string");
      e.relation = rel.get<std::string>();
      if (edges[i].contains("direction")) {
        const json& d = edges[i].at("direction");
        const std::string name = d.is_string() ? d.get<std::string>() : "";
        if (name == "incoming") {
          e.direction = Direction::incoming;
        } else if (name == "outgoing") {
          e.direction = Direction::outgoing;
        } else if (name == "both") {
          e.direction = Direction::both;
        } else {
          bad(where + ".direction", "expected \"incoming\", \"outgoing\" or \"both\"");
        }
      }
      model.edges.push_back(std::move(e));
    }
  }
  const json& layers = require(doc, "layers", "<root>");
  if (!layers.is_array() || layers.empty()) bad("layers", "expected a non-empty array");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string where = "layers[" + std::to_string(l) + "]";
    const json& j = layers[l];
    GnnLayer L;
    if (j.contains("activation") &&
        !(j.at("activation").is_string() && j.at("activation").get<std::string>() == "sigmoid")) {
      bad(where + ".activation", "unsupported activation (only \"sigmoid\")");
    }
    L.in = count(require(j, "in", where), where + ".in");
    L.out = count(require(j, "out", where), where + ".out");
    L.self = numbers(require(j, "self", where), where + ".self");
    const json& agg = require(j, "agg", where);
    if (!agg.is_array()) bad(where + ".agg", "expected an array of matrices");
    for (std::size_t t = 0; t < agg.size(); ++t) {
      L.agg.push_back(numbers(agg[t], where + ".agg[" + std::to_string(t) + "]"));
    }
    if (j.contains("readout")) {
      if (!j.at("readout").is_boolean()) bad(where + ".readout", "expected a boolean");
      L.readout = j.at("readout").get<bool>();
    }
    if (j.contains("read")) L.read = numbers(j.at("read"), where + ".read");
    L.bias = numbers(require(j, "bias", where), where + ".bias");
    const std::size_t cells = L.in * L.out;
    if (L.self.size() != cells) bad(where + ".self", "expected " + std::to_string(cells) + " entries");
    for (std::size_t t = 0; t < L.agg.size(); ++t) {
      if (L.agg[t].size() != cells) {
        bad(where + ".agg[" + std::to_string(t) + "]", "expected " + std::to_string(cells) + " entries");
      }
    }
    if (L.agg.size() != model.edges.size()) {
      bad(where + ".agg", "expected one matrix per edge type");
    }
    if (L.readout ? L.read.size() != cells : !L.read.empty()) {
      bad(where + ".read", "expected " + std::to_string(L.readout ? cells : 0) + " entries");
    }
    if (L.bias.size() != L.out) bad(where + ".bias", "expected " + std::to_string(L.out) + " entries");
    if (l > 0 && L.in != model.layers.back().out) {
      bad(where + ".in", "does not match the previous layer's output width");
    }
    model.layers.push_back(std::move(L));
  }
  return model;
}

GnnModel load_gnn(const std::string& path) {
  try {
    return gnn_from_json(read_text_file(path));
  } catch (const SchemaError& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

void save_gnn(const GnnModel& model, const std::string& path) {
  write_text_file(path, gnn_to_json(model));
}

}  // namespace nesy
