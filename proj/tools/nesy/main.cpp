// nesy: model checking, GNN training and compilation, MAP inference and the
// two benchmark drivers behind one subcommand-style binary.
//
// Exit codes: 0 success, 1 user error (bad flags, inputs or models), 2
// internal error (numerical failure or anything unexpected).

#include <algorithm>
#include <iostream>
#include <string>
#include <vector>

#include "common.hpp"
#include "nesy/error.hpp"
#include "nesy/graph_io.hpp"
#include "nesy/numeric.hpp"

namespace {

using nlohmann::json;

// Value of --config from the raw arguments, if any.
std::string find_config(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return {};
}

bool given(const std::vector<std::string>& args, const std::string& flag) {
  return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
    return a == flag || a.rfind(flag + "=", 0) == 0;
  });
}

std::string scalar(const json& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
  if (v.is_number_float()) return nesy::format_double(v.get<double>());
  throw nesy::SchemaError("config key '" + key + "': expected a string, number, boolean or list");
}

// Config keys are long option names without dashes. Each key not given on
// the command line is appended as `--key value`, so explicit flags win.
void merge_config(std::vector<std::string>& args, const std::string& path) {
  const json doc = nesy::cli::read_json_file(path);
  if (!doc.is_object()) throw nesy::SchemaError(path + ": config must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (key == "config") continue;
    const std::string flag = "--" + key;
    if (given(args, flag)) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) args.push_back(flag);
    } else if (value.is_array()) {
      std::string joined;
      for (const auto& item : value) joined += (joined.empty() ? "" : ",") + scalar(item, key);
      args.push_back(flag);
      args.push_back(joined);
    } else if (!value.is_null()) {
      args.push_back(flag);
      args.push_back(scalar(value, key));
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  namespace cli = nesy::cli;
  CLI::App app{"Neuro-symbolic inference over relational Bayesian networks with GNN components"};
  app.set_version_flag("--version", NESY_VERSION);
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->always_capture_default();

  cli::GlobalOptions global;
  app.add_option("--config", global.config, "JSON file of option defaults; explicit flags win")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", global.seed, "Master seed; every output records it");
  app.add_option("--jobs", global.jobs, "Maximum concurrent restarts")->check(CLI::PositiveNumber);
  app.add_flag("-v,--verbose", global.verbose, "Progress messages on stderr");

  std::vector<cli::Command> commands;
  cli::add_check(app, commands);
  cli::add_train_gnn(app, commands);
  cli::add_compile_gnn(app, commands);
  cli::add_map(app, commands);
  cli::add_ising_gen(app, commands);
  cli::add_ising_run(app, commands);
  cli::add_plan_gen(app, commands);
  cli::add_plan_sweep(app, commands);
  cli::add_report(app, commands);

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    if (const std::string config = find_config(args); !config.empty()) merge_config(args, config);
    std::reverse(args.begin(), args.end());
    try {
      app.parse(args);
    } catch (const CLI::ParseError& e) {
      return app.exit(e) == 0 ? 0 : 1;
    }
    for (const auto& cmd : commands) {
      if (cmd.app->parsed()) return cmd.run(cli::resolve_run_config(*cmd.app, global));
    }
    return 1;
  } catch (const nesy::NumericError& e) {
    std::cerr << "nesy: numeric error: " << e.what() << '\n';
    return 2;
  } catch (const nesy::Error& e) {
    std::cerr << "nesy: error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "nesy: internal error: " << e.what() << '\n';
    return 2;
  }
}
