#pragma once

#include <string>

#include "nesy/graph.hpp"

namespace nesy {

/// Graph JSON:
///
///   {
///     "signature": {
///       "node_types": ["water", "land"],
///       "relations": [
///         {"name": "edge", "arity": 2, "range": "boolean", "symmetric": true},
///         {"name": "color", "arity": 1, "range": {"categorical": ["red", "green"]}},
///         {"name": "area", "arity": 1, "range": {"numeric": [0, 100]},
///          "arg_types": ["land"]}
///       ]
///     },
///     "nodes": [{"id": "a", "type": "land"}, {"id": "b"}],
///     "atoms": [{"relation": "edge", "args": ["a", "b"], "value": true},
///               {"relation": "color", "args": ["a"], "value": "red"}]
///   }
///
/// Boolean values are JSON booleans, categorical values are value names and
/// numeric values are numbers. Errors name the offending field, e.g.
/// `atoms[3].value`.
AttributedGraph graph_from_json(const std::string& text);
std::string graph_to_json(const AttributedGraph& graph);

AttributedGraph load_graph(const std::string& path);
void save_graph(const AttributedGraph& graph, const std::string& path);

/// Reads only the "signature" object of a graph file (nodes and atoms may
/// be absent).
Signature load_signature(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace nesy
