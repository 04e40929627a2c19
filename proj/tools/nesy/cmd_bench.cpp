#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

#include "common.hpp"
#include "nesy/collective.hpp"
#include "nesy/csv.hpp"
#include "nesy/error.hpp"
#include "nesy/graph_io.hpp"
#include "nesy/ising.hpp"
#include "nesy/numeric.hpp"
#include "nesy/planning.hpp"

namespace nesy::cli {

using nlohmann::json;

namespace {

json node_names(const AttributedGraph& g, const std::vector<NodeId>& nodes) {
  json out = json::array();
  for (NodeId v : nodes) out.push_back(g.node_name(v));
  return out;
}

std::string fmt(double x) { return format_double(x); }

}  // namespace

// --- ising-gen -----------------------------------------------------------------

void add_ising_gen(CLI::App& root, std::vector<Command>& commands) {
  struct Opts {
    IsingParams params;
    std::string out;
  };
  auto o = std::make_shared<Opts>();
  auto* app = root.add_subcommand("ising-gen", "Sample a grid Ising instance with attributes and a split");
  app->add_option("--n", o->params.n, "Grid side length")->check(CLI::PositiveNumber);
  app->add_option("--H", o->params.H, "Coupling strength (negative: heterophily)");
  app->add_option("--F", o->params.F, "External field strength; also scales the attribute noise");
  app->add_option("--noise-sigma", o->params.noise_sigma, "Noise scale of attr_noisy relative to F");
  app->add_option("--burn-in", o->params.burn_in, "Gibbs sweeps before the labeling is taken");
  app->add_option("--thinning", o->params.thinning, "Sweeps between samples");
  app->add_option("--max-majority", o->params.max_majority,
                  "Redraw until the larger class holds at most this share (1 disables)");
  app->add_option("--out", o->out, "Graph JSON; metadata goes to <out>.meta.json")->required();

  commands.push_back({app, [o](const RunConfig& config) {
    IsingParams p = o->params;
    p.seed = config.seed;
    const IsingInstance inst = build_instance(p);
    const RelId edge = inst.graph.signature().id_of("edge");
    std::size_t pos = 0;
    for (int y : inst.labels) pos += y > 0;
    const auto n = static_cast<double>(inst.labels.size());
    const json results{
        {"params", {{"n", p.n}, {"H", p.H}, {"F", p.F}, {"noise_sigma", p.noise_sigma},
                    {"burn_in", p.burn_in}, {"thinning", p.thinning}, {"max_majority", p.max_majority},
                    {"seed", p.seed}}},
        {"draws", inst.draws},
        {"global_homophily", global_homophily(inst.graph, edge, inst.labels)},
        {"class_ratios", {{"neg", (n - static_cast<double>(pos)) / n}, {"pos", static_cast<double>(pos) / n}}},
        {"split", {{"train", node_names(inst.graph, inst.train)},
                   {"val", node_names(inst.graph, inst.val)},
                   {"test", node_names(inst.graph, inst.test)}}}};
    ensure_parent_dir(o->out);
    save_graph(inst.graph, o->out);
    write_meta(o->out, config, results);
    std::cout << "graph: " << o->out << " (" << inst.graph.node_count() << " nodes, "
              << inst.draws << " draws)\nglobal homophily: " << fmt(results["global_homophily"].get<double>())
              << "\nclass ratios: neg " << fmt(results["class_ratios"]["neg"].get<double>()) << ", pos "
              << fmt(results["class_ratios"]["pos"].get<double>()) << '\n';
    return 0;
  }});
}

// --- ising-run -----------------------------------------------------------------

void add_ising_run(CLI::App& root, std::vector<Command>& commands) {
  struct Opts {
    std::string graph, split, weights, feature = "attr", out;
    std::vector<std::size_t> hidden{4};
    std::size_t epochs = 300;
    double lr = 0.05;
    std::size_t hom_iterations = 100;
    double hom_tolerance = 1e-4;
    SolverFlags solver;
  };
  auto o = std::make_shared<Opts>();
  o->solver.restarts = 3;
  auto* app = root.add_subcommand("ising-run", "Collective classification with the homophily constraint");
  app->add_option("--graph", o->graph, "Instance graph from ising-gen")->required()->check(CLI::ExistingFile);
  app->add_option("--split", o->split, "Split JSON (default: <graph>.meta.json)")->check(CLI::ExistingFile);
  app->add_option("--weights", o->weights, "Label classifier weights (default: train one here)")
      ->check(CLI::ExistingFile);
  app->add_option("--feature", o->feature, "Classifier input when training here")
      ->check(CLI::IsMember({"attr", "attr_noisy"}));
  app->add_option("--hidden", o->hidden, "Hidden widths when training here")->delimiter(',');
  app->add_option("--epochs", o->epochs, "Epochs when training here");
  app->add_option("--lr", o->lr, "Learning rate when training here");
  app->add_option("--hom-iterations", o->hom_iterations, "Homophily propagation round cap");
  app->add_option("--hom-tolerance", o->hom_tolerance, "Homophily propagation tolerance");
  o->solver.add_to(*app);
  app->add_option("--out", o->out, "Accuracy CSV")->required();

  commands.push_back({app, [o](const RunConfig& config) {
    AttributedGraph graph = load_graph(o->graph);
    const std::string split_path = o->split.empty() ? meta_path(o->graph) : o->split;
    if (!std::filesystem::exists(split_path)) throw SchemaError("split file not found: " + split_path);
    NodeSplit split = split_from_file(split_path, graph);
    if (split.train.empty() || split.test.empty()) {
      throw SchemaError(split_path + ": split needs train and test nodes");
    }
    const json meta = read_json_file(split_path);
    json params = json::object();
    if (meta.contains("results") && meta["results"].contains("params")) params = meta["results"]["params"];

    const IsingInstance inst =
        instance_from_graph(std::move(graph), std::move(split.train), std::move(split.val), std::move(split.test));
    CollectiveOptions opts;
    opts.feature = o->feature;
    opts.hidden = o->hidden;
    opts.training.epochs = o->epochs;
    opts.training.learning_rate = o->lr;
    opts.gnn_seed = config.seed;
    opts.homophily = {o->hom_iterations, o->hom_tolerance};
    opts.solver = o->solver.params(config);
    opts.lgraph.samples = o->solver.samples;
    opts.lgraph.seed = config.seed;

    GnnModel gnn;
    if (o->weights.empty()) {
      gnn = train_label_classifier(inst, opts);
    } else {
      gnn = load_gnn(o->weights);
      if (gnn.target != "Label") throw SchemaError(o->weights + ": classifier target must be Label");
      gnn.check(inst.graph.signature());
    }
    const CollectiveReport r = run_collective_map(inst, gnn, opts);

    auto param = [&](const char* key) {
      return params.contains(key) && params[key].is_number() ? fmt(params[key].get<double>()) : std::string();
    };
    CsvTable table{{"graph", "seed", "H", "F", "feature", "base_accuracy", "map_accuracy", "lift",
                    "true_homophily", "homophily_mae", "homophily_iterations", "map_log_likelihood"},
                   {}};
    table.add_row({std::filesystem::path(o->graph).filename().string(), std::to_string(config.seed),
                   param("H"), param("F"), gnn.features.empty() ? o->feature : gnn.features.front(),
                   fmt(r.base_accuracy), fmt(r.map_accuracy), fmt(r.map_accuracy - r.base_accuracy),
                   fmt(r.true_homophily), fmt(r.homophily_mae), std::to_string(r.homophily_iterations),
                   fmt(r.map_log_likelihood)});
    ensure_parent_dir(o->out);
    write_csv(o->out, table);
    write_meta(o->out, config,
               {{"base_accuracy", r.base_accuracy}, {"map_accuracy", r.map_accuracy},
                {"map_atoms", r.map_atoms}, {"instance_params", params}});
    std::cout << "base accuracy: " << fmt(r.base_accuracy) << "\nMAP accuracy: " << fmt(r.map_accuracy)
              << "\nhomophily MAE: " << fmt(r.homophily_mae) << " after " << r.homophily_iterations
              << " rounds\n";
    return 0;
  }});
}

// --- plan-gen ------------------------------------------------------------------

void add_plan_gen(CLI::App& root, std::vector<Command>& commands) {
  struct Opts {
    WatershedParams params;
    std::size_t scenarios = 0, heldout = 0;
    std::string out, scenario_dir;
  };
  auto o = std::make_shared<Opts>();
  auto* app = root.add_subcommand("plan-gen", "Generate a synthetic watershed and labeled crop scenarios");
  app->add_option("--subbasins", o->params.subbasins, "Water nodes")->check(CLI::PositiveNumber);
  app->add_option("--agr", o->params.agr_nodes, "Agricultural land nodes (at least one per subbasin)");
  app->add_option("--urban", o->params.urban_nodes, "Urban land nodes");
  app->add_option("--area-lo", o->params.area_lo, "Smallest land area")->check(CLI::PositiveNumber);
  app->add_option("--area-hi", o->params.area_hi, "Largest land area")->check(CLI::PositiveNumber);
  app->add_option("--decay", o->params.decay, "Share of upstream load reaching the next subbasin");
  app->add_option("--scenarios", o->scenarios, "Training scenarios with Pollution labels");
  app->add_option("--heldout", o->heldout, "Held-out scenarios labeled with the training thresholds");
  app->add_option("--scenario-dir", o->scenario_dir, "Scenario directory (default: <out>.scenarios)");
  app->add_option("--out", o->out, "Watershed graph JSON")->required();

  commands.push_back({app, [o](const RunConfig& config) {
    WatershedParams p = o->params;
    p.seed = config.seed;
    if (!(p.area_lo <= p.area_hi)) throw SchemaError("--area-lo must not exceed --area-hi");
    const Watershed ws = generate_watershed(p);
    ensure_parent_dir(o->out);
    save_graph(ws.graph, o->out);
    json results{{"water_nodes", ws.water.size()},
                 {"land_agr_nodes", ws.land.size()},
                 {"land_other_nodes", ws.urban.size()},
                 {"params", {{"subbasins", p.subbasins}, {"agr", p.agr_nodes}, {"urban", p.urban_nodes},
                             {"area_lo", p.area_lo}, {"area_hi", p.area_hi}, {"decay", p.decay},
                             {"seed", p.seed}}}};
    if (o->scenarios + o->heldout > 0) {
      const ScenarioSet set = generate_scenarios(ws, o->scenarios, o->heldout, mix_seed(config.seed, 7));
      const std::string dir = o->scenario_dir.empty() ? o->out + ".scenarios" : o->scenario_dir;
      std::filesystem::create_directories(dir);
      json files = json::array();
      auto write = [&](const std::vector<AttributedGraph>& graphs, const char* stem) {
        for (std::size_t i = 0; i < graphs.size(); ++i) {
          std::ostringstream name;
          name << stem << '_' << std::setw(3) << std::setfill('0') << i << ".json";
          save_graph(graphs[i], join_path(dir, name.str()));
          files.push_back(join_path(dir, name.str()));
        }
      };
      write(set.train, "train");
      write(set.heldout, "heldout");
      results["low_threshold"] = set.low_threshold;
      results["high_threshold"] = set.high_threshold;
      results["scenario_files"] = files;
    }
    write_meta(o->out, config, results);
    std::cout << "watershed: " << o->out << " (" << ws.water.size() << " water, " << ws.land.size()
              << " agricultural, " << ws.urban.size() << " other land nodes)\n";
    return 0;
  }});
}

// --- plan-sweep ----------------------------------------------------------------

void add_plan_sweep(CLI::App& root, std::vector<Command>& commands) {
  struct Opts {
    std::string watershed, weights, out_dir;
    double decay = 0.5;
    std::vector<double> lambdas = SweepOptions{}.lambdas;
    SolverFlags solver;
  };
  auto o = std::make_shared<Opts>();
  o->solver.restarts = 5;
  auto* app = root.add_subcommand("plan-sweep", "MAP crop plans over a grid of tradeoff weights");
  app->add_option("--watershed", o->watershed, "Watershed graph JSON")->required()->check(CLI::ExistingFile);
  app->add_option("--weights", o->weights, "Pollution classifier (default: the hand-built oracle)")
      ->check(CLI::ExistingFile);
  app->add_option("--decay", o->decay, "Upstream share used by the oracle classifier");
  app->add_option("--lambdas", o->lambdas, "Tradeoff weights in [0, 1]")
      ->delimiter(',')->check(CLI::Range(0.0, 1.0));
  o->solver.add_to(*app);
  app->add_option("--out-dir", o->out_dir, "Directory for pareto.csv and composition.csv")->required();

  commands.push_back({app, [o](const RunConfig& config) {
    const AttributedGraph graph = load_graph(o->watershed);
    const Watershed ws = watershed_from_graph(graph, o->decay);
    const GnnModel gnn = o->weights.empty() ? oracle_pollution_gnn(graph.signature(), o->decay)
                                            : load_gnn(o->weights);
    if (gnn.target != "Pollution") throw SchemaError("pollution classifier target must be Pollution");
    gnn.check(graph.signature());
    SweepOptions sweep;
    sweep.lambdas = o->lambdas;
    sweep.solver = o->solver.params(config);
    sweep.lgraph.samples = o->solver.samples;
    sweep.lgraph.seed = config.seed;
    const SweepResult result = lambda_sweep(ws, gnn, sweep);

    CsvTable pareto{{"lambda", "restart", "E_low_count", "E_profit", "log_likelihood", "best"}, {}};
    for (const auto& p : result.points) {
      pareto.add_row({fmt(p.lambda), std::to_string(p.restart), fmt(p.expected_low), fmt(p.profit),
                      fmt(p.log_likelihood), p.best ? "1" : "0"});
    }
    CsvTable composition{{"lambda", "subbasin", "crop", "mean_fraction", "variance"}, {}};
    for (const auto& c : result.composition) {
      composition.add_row({fmt(c.lambda), c.subbasin, c.crop, fmt(c.mean_fraction), fmt(c.variance)});
    }
    json front = json::array();
    for (const auto& p : pareto_front(result.points)) {
      front.push_back({{"lambda", p.lambda}, {"restart", p.restart}, {"E_low_count", p.expected_low},
                       {"E_profit", p.profit}});
    }
    const json results{{"classifier", o->weights.empty() ? "oracle" : o->weights},
                       {"points", result.points.size()},
                       {"pareto_front", front}};
    std::filesystem::create_directories(o->out_dir);
    const std::string pareto_path = join_path(o->out_dir, "pareto.csv");
    const std::string composition_path = join_path(o->out_dir, "composition.csv");
    write_csv(pareto_path, pareto);
    write_meta(pareto_path, config, results);
    write_csv(composition_path, composition);
    write_meta(composition_path, config, results);
    std::cout << pareto_path << ": " << result.points.size() << " rows, " << front.size()
              << " on the Pareto front\n"
              << composition_path << ": " << result.composition.size() << " rows\n";
    return 0;
  }});
}

// --- report --------------------------------------------------------------------

void add_report(CLI::App& root, std::vector<Command>& commands) {
  struct Opts {
    std::vector<std::string> inputs;
    std::string out;
  };
  auto o = std::make_shared<Opts>();
  auto* app = root.add_subcommand("report", "Summarize result CSVs and their run metadata as Markdown");
  app->add_option("inputs", o->inputs, "CSV files written by other subcommands")->check(CLI::ExistingFile);
  app->add_option("--out", o->out, "Markdown file (default: stdout)");

  commands.push_back({app, [o](const RunConfig& config) {
    if (o->inputs.empty()) throw SchemaError("report needs at least one CSV input");
    std::ostringstream md;
    md << "# nesy run report\n\n"
       << "| file | subcommand | seed | version | rows | column means |\n"
       << "|---|---|---|---|---|---|\n";
    std::ostringstream details;
    for (const auto& path : o->inputs) {
      const CsvTable table = read_csv(path);
      json meta = nullptr;
      if (std::filesystem::exists(meta_path(path))) meta = read_json_file(meta_path(path));
      auto field = [&](const char* key) {
        if (!meta.is_object() || !meta.contains(key) || meta[key].is_null()) return std::string("-");
        return meta[key].is_string() ? meta[key].get<std::string>() : meta[key].dump();
      };
      std::string means;
      for (std::size_t c = 0; c < table.header.size(); ++c) {
        double sum = 0.0;
        bool numeric = !table.rows.empty();
        for (const auto& row : table.rows) {
          if (c >= row.size()) {
            numeric = false;
            break;
          }
          std::istringstream cell(row[c]);
          double x = 0.0;
          if (!(cell >> x) || !cell.eof()) {
            numeric = false;
            break;
          }
          sum += x;
        }
        if (!numeric) continue;
        std::ostringstream m;
        m << std::setprecision(6) << sum / static_cast<double>(table.rows.size());
        means += (means.empty() ? "" : ", ") + table.header[c] + "=" + m.str();
      }
      md << "| " << path << " | " << field("subcommand") << " | " << field("seed") << " | "
         << field("version") << " | " << table.rows.size() << " | " << (means.empty() ? "-" : means)
         << " |\n";
      details << "\n### " << path << "\n\n";
      if (!meta.is_object()) {
        details << "No run metadata (" << meta_path(path) << " not found).\n";
        continue;
      }
      details << "- subcommand: `" << field("subcommand") << "`\n"
              << "- seed: " << field("seed") << "\n"
              << "- version: " << field("version") << "\n"
              << "- options: `" << (meta.contains("options") ? meta["options"].dump() : "{}") << "`\n";
      if (meta.contains("results") && meta["results"].is_object()) {
        for (const auto& [key, value] : meta["results"].items()) {
          if (value.is_array() && value.size() > 8) {
            details << "- " << key << ": " << value.size() << " entries\n";
          } else {
            details << "- " << key << ": `" << value.dump() << "`\n";
          }
        }
      }
    }
    md << "\n## Run metadata\n" << details.str();
    if (o->out.empty()) {
      std::cout << md.str();
    } else {
      ensure_parent_dir(o->out);
      write_text_file(o->out, md.str());
      write_meta(o->out, config, {{"inputs", o->inputs}});
    }
    return 0;
  }});
}

}  // namespace nesy::cli
