#pragma once

#include <CLI11.hpp>
#include <cstdint>
#include <functional>
#include <json.hpp>
#include <string>
#include <vector>

#include "nesy/gnn.hpp"
#include "nesy/graph.hpp"
#include "nesy/map_solver.hpp"

namespace nesy::cli {

/// Options shared by every subcommand.
struct GlobalOptions {
  std::string config;
  std::uint64_t seed = 1;
  std::size_t jobs = 1;
  int verbose = 0;
};

/// Resolved invocation, written next to every output file.
struct RunConfig {
  std::string subcommand;
  std::uint64_t seed = 1;
  std::size_t jobs = 1;
  int verbose = 0;
  std::string config_file;
  nlohmann::json options = nlohmann::json::object();

  nlohmann::json to_json() const;
};

/// Collects the subcommand's options (given values or defaults).
RunConfig resolve_run_config(const CLI::App& sub, const GlobalOptions& global);

using Runner = std::function<int(const RunConfig&)>;

struct Command {
  CLI::App* app = nullptr;
  Runner run;
};

/// `<path>.meta.json` holding the run config plus command-specific results.
std::string meta_path(const std::string& output);
void write_meta(const std::string& output, const RunConfig& config,
                const nlohmann::json& results = nlohmann::json::object());
nlohmann::json read_json_file(const std::string& path);

/// "id=path" pairs into a registry.
ModelRegistry load_registry(const std::vector<std::string>& specs);
/// "rel" (incoming) or "rel:incoming|outgoing|both".
EdgeSpec parse_edge(const std::string& text);
/// Display name of a stored value.
std::string value_name(const Relation& relation, double value);

struct NodeSplit {
  std::vector<NodeId> train, val, test;
};

/// Split from a JSON file with train/val/test node-name arrays, at the top
/// level, under "split", or under "results.split" (ising-gen metadata).
NodeSplit split_from_file(const std::string& path, const AttributedGraph& graph);

/// Solver flags used by map, ising-run and plan-sweep.
struct SolverFlags {
  std::size_t restarts = 1;
  std::size_t depth = 1;
  std::size_t batch = 1;
  std::size_t max_iterations = 200;
  std::size_t burn_in = 5;
  std::size_t sweeps_per_flip = 1;
  std::size_t samples = 20;

  void add_to(CLI::App& app);
  SolverParams params(const RunConfig& config) const;
};

std::string join_path(const std::string& dir, const std::string& file);
void ensure_parent_dir(const std::string& path);

void add_check(CLI::App& root, std::vector<Command>& commands);
void add_train_gnn(CLI::App& root, std::vector<Command>& commands);
void add_compile_gnn(CLI::App& root, std::vector<Command>& commands);
void add_map(CLI::App& root, std::vector<Command>& commands);
void add_ising_gen(CLI::App& root, std::vector<Command>& commands);
void add_ising_run(CLI::App& root, std::vector<Command>& commands);
void add_plan_gen(CLI::App& root, std::vector<Command>& commands);
void add_plan_sweep(CLI::App& root, std::vector<Command>& commands);
void add_report(CLI::App& root, std::vector<Command>& commands);

}  // namespace nesy::cli
