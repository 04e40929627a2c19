#include "common.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "nesy/error.hpp"
#include "nesy/graph_io.hpp"
#include "nesy/numeric.hpp"

namespace nesy::cli {

using nlohmann::json;

json RunConfig::to_json() const {
  return json{{"tool", "nesy"},
              {"version", NESY_VERSION},
              {"subcommand", subcommand},
              {"seed", seed},
              {"jobs", jobs},
              {"config_file", config_file.empty() ? json(nullptr) : json(config_file)},
              {"options", options}};
}

RunConfig resolve_run_config(const CLI::App& sub, const GlobalOptions& global) {
  RunConfig config;
  config.subcommand = sub.get_name();
  config.seed = global.seed;
  config.jobs = global.jobs;
  config.verbose = global.verbose;
  config.config_file = global.config;
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string& name = opt->get_single_name();
    if (name == "help") continue;
    if (opt->get_type_size_max() == 0) {
      config.options[name] = opt->count() > 0;
      continue;
    }
    std::vector<std::string> values = opt->results();
    if (opt->count() == 0) {
      const std::string def = opt->get_default_str();
      if (def.empty()) {
        config.options[name] = nullptr;
        continue;
      }
      values = {def};
    }
    if (values.size() == 1 && opt->get_expected_max() <= 1) {
      config.options[name] = values.front();
    } else {
      config.options[name] = values;
    }
  }
  return config;
}

std::string meta_path(const std::string& output) { return output + ".meta.json"; }

void write_meta(const std::string& output, const RunConfig& config, const json& results) {
  json doc = config.to_json();
  doc["output"] = std::filesystem::path(output).filename().string();
  doc["results"] = results;
  write_text_file(meta_path(output), doc.dump(2) + "\n");
}

json read_json_file(const std::string& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw SchemaError(path + ": invalid JSON: " + e.what());
  }
}

ModelRegistry load_registry(const std::vector<std::string>& specs) {
  ModelRegistry registry;
  for (const auto& spec : specs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
      throw SchemaError("--gnn expects id=path, got '" + spec + "'");
    }
    const std::string id = spec.substr(0, eq);
    if (registry.contains(id)) throw SchemaError("--gnn: duplicate id '" + id + "'");
    registry.add(id, load_gnn(spec.substr(eq + 1)));
  }
  return registry;
}

EdgeSpec parse_edge(const std::string& text) {
  EdgeSpec e;
  const auto colon = text.find(':');
  e.relation = text.substr(0, colon);
  if (e.relation.empty()) throw SchemaError("--edge: empty relation name");
  if (colon == std::string::npos) return e;
  const std::string dir = text.substr(colon + 1);
  if (dir == "incoming" || dir == "in") {
    e.direction = Direction::incoming;
  } else if (dir == "outgoing" || dir == "out") {
    e.direction = Direction::outgoing;
  } else if (dir == "both") {
    e.direction = Direction::both;
  } else {
    throw SchemaError("--edge: unknown direction '" + dir + "' (incoming, outgoing or both)");
  }
  return e;
}

std::string value_name(const Relation& relation, double value) {
  switch (relation.range.kind) {
    case RangeKind::boolean:
      return value > 0.5 ? "true" : "false";
    case RangeKind::categorical: {
      const auto i = static_cast<std::size_t>(value);
      return i < relation.range.categories.size() ? relation.range.categories[i] : format_double(value);
    }
    case RangeKind::numeric:
      break;
  }
  return format_double(value);
}

void SolverFlags::add_to(CLI::App& app) {
  app.add_option("--restarts", restarts, "Independent solver runs; the best is kept")
      ->check(CLI::PositiveNumber);
  app.add_option("--depth", depth, "Lookahead depth of the greedy scores")->check(CLI::PositiveNumber);
  app.add_option("--batch", batch, "Atoms flipped per iteration")->check(CLI::PositiveNumber);
  app.add_option("--max-iterations", max_iterations, "Iteration cap per restart");
  app.add_option("--burn-in", burn_in, "Gibbs sweeps before scoring starts");
  app.add_option("--sweeps-per-flip", sweeps_per_flip, "Gibbs sweeps after each batch flip");
  app.add_option("--samples", samples, "Samples per unobserved atom")->check(CLI::PositiveNumber);
}

SolverParams SolverFlags::params(const RunConfig& config) const {
  SolverParams p;
  p.restarts = restarts;
  p.depth = depth;
  p.batch = batch;
  p.max_iterations = max_iterations;
  p.burn_in = burn_in;
  p.sweeps_per_flip = sweeps_per_flip;
  p.seed = config.seed;
  p.jobs = config.jobs;
  return p;
}

// Split from a JSON file with train/val/test node-name arrays, either at the
// top level, under "split", or under "results.split" (ising-gen metadata).
NodeSplit split_from_file(const std::string& path, const AttributedGraph& graph) {
  const json doc = read_json_file(path);
  const json* s = &doc;
  if (doc.contains("results") && doc["results"].contains("split")) {
    s = &doc["results"]["split"];
  } else if (doc.contains("split")) {
    s = &doc["split"];
  }
  NodeSplit split;
  auto read = [&](const char* key, std::vector<NodeId>& out) {
    if (!s->contains(key)) return;
    const json& names = s->at(key);
    if (!names.is_array()) throw SchemaError(path + ": split." + key + ": expected an array");
    for (const auto& n : names) {
      if (!n.is_string()) throw SchemaError(path + ": split." + key + ": expected node names");
      const auto v = graph.find_node(n.get<std::string>());
      if (!v) throw SchemaError(path + ": split." + key + ": unknown node '" + n.get<std::string>() + "'");
      out.push_back(*v);
    }
  };
  read("train", split.train);
  read("val", split.val);
  read("test", split.test);
  return split;
}

std::string join_path(const std::string& dir, const std::string& file) {
  return (std::filesystem::path(dir) / file).string();
}

void ensure_parent_dir(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

}  // namespace nesy::cli
