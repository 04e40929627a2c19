#include <algorithm>
#include <cmath>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <sstream>

#include "common.hpp"
#include "nesy/csv.hpp"
#include "nesy/error.hpp"
#include "nesy/evaluate.hpp"
#include "nesy/graph_io.hpp"
#include "nesy/likelihood_graph.hpp"
#include "nesy/numeric.hpp"
#include "nesy/parser.hpp"

namespace nesy::cli {

using nlohmann::json;

namespace {

// Prints every diagnostic; returns the model when parsing succeeded.
std::optional<RBNModel> parse_reported(const std::string& path, const Signature& sig) {
  ParseResult result = parse_model(read_text_file(path), sig);
  for (const auto& e : result.errors) std::cerr << format_error(path, e) << '\n';
  if (!result.ok()) return std::nullopt;
  return std::move(result.model);
}

bool report_violations(const std::string& path, const AttributedGraph& graph) {
  const auto violations = validate(graph);
  for (const auto& v : violations) std::cerr << path << ": " << v.atom << ": " << v.message << '\n';
  return violations.empty();
}

json to_json_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

}  // namespace

// --- check ---------------------------------------------------------------------

void add_check(CLI::App& root, std::vector<Command>& commands) {
  struct Opts {
    std::string model, graph, signature;
    std::vector<std::string> gnn, map;
  };
  auto o = std::make_shared<Opts>();
  auto* app = root.add_subcommand("check", "Parse a model, validate a graph and dry-build the likelihood graph");
  app->add_option("model", o->model, "Model file (.rbn)")->required()->check(CLI::ExistingFile);
  app->add_option("--graph", o->graph, "Graph JSON to validate and build against")->check(CLI::ExistingFile);
  app->add_option("--signature", o->signature, "Signature source (any graph JSON)")->check(CLI::ExistingFile);
  app->add_option("--gnn", o->gnn, "Classifier for COMPUTEWITHGNN as id=weights.json")->delimiter(',');
  app->add_option("--map", o->map, "Relations whose value-less atoms become MAP atoms")->delimiter(',');

  commands.push_back({app, [o](const RunConfig&) {
    Signature sig;
    std::optional<AttributedGraph> graph;
    if (!o->graph.empty()) {
      graph = load_graph(o->graph);
      sig = graph->signature();
      if (!o->signature.empty() && !(load_signature(o->signature) == sig)) {
        std::cerr << o->graph << ": graph signature does not match " << o->signature << '\n';
        return 1;
      }
    } else if (!o->signature.empty()) {
      sig = load_signature(o->signature);
    } else {
      throw SchemaError("check needs --graph or --signature");
    }
    bool clean = true;
    for (const auto& problem : sig.check()) {
      std::cerr << (graph ? o->graph : o->signature) << ": signature: " << problem << '\n';
      clean = false;
    }
    if (graph) clean = report_violations(o->graph, *graph) && clean;
    const auto model = parse_reported(o->model, sig);
    if (!model || !clean) return 1;

    std::cout << o->model << ": parsed " << model->definitions.size() << " definitions, "
              << model->macros.size() << " macros\n";
    if (!graph) return 0;
    try {
      const ModelRegistry registry = load_registry(o->gnn);
      const AtomPartition partition = make_partition(*model, *graph, o->map);
      for (const auto& problem : check_partition(*model, *graph, partition)) {
        throw BuildError(problem);
      }
      LikelihoodGraph lg(*model, *graph, partition, model->default_params(), &registry);
      const double ll = lg.evaluate_full();
      std::cout << o->model << ": likelihood graph with " << lg.node_count() << " nodes, "
                << lg.atom_count() << " atom terms, " << lg.map_count() << " MAP and "
                << lg.unobserved_count() << " sampled atoms; log-likelihood " << format_double(ll)
                << '\n';
    } catch (const NumericError&) {
      throw;
    } catch (const Error& e) {
      std::cerr << o->model << ": build: " << e.what() << '\n';
      return 1;
    }
    return 0;
  }});
}

// --- train-gnn -----------------------------------------------------------------

namespace {

NodeSplit random_split(const AttributedGraph& graph, RelId target, std::vector<double> fractions,
                       std::uint64_t seed) {
  std::vector<NodeId> labeled;
  for (NodeId v = 0; v < graph.node_count(); ++v) {
    const NodeId arg[1] = {v};
    if (graph.in_domain(target, arg) && graph.has_value(graph.atom(target, arg))) labeled.push_back(v);
  }
  std::mt19937_64 rng(seed);
  std::shuffle(labeled.begin(), labeled.end(), rng);
  fractions.resize(3, 0.0);
  const double total = fractions[0] + fractions[1] + fractions[2];
  if (!(total > 0.0)) throw SchemaError("--split-fractions must have a positive sum");
  const auto m = static_cast<double>(labeled.size());
  const auto a = static_cast<std::size_t>(std::lround(m * fractions[0] / total));
  const auto b = static_cast<std::size_t>(std::lround(m * (fractions[0] + fractions[1]) / total));
  NodeSplit split;
  split.train.assign(labeled.begin(), labeled.begin() + a);
  split.val.assign(labeled.begin() + a, labeled.begin() + b);
  split.test.assign(labeled.begin() + b, labeled.end());
  return split;
}

}  // namespace

void add_train_gnn(CLI::App& root, std::vector<Command>& commands) {
  struct Opts {
    std::vector<std::string> graphs, features, edges;
    std::string target, split, out, loss, optimizer = "adam";
    std::vector<std::size_t> hidden{4};
    bool readout = false;
    std::size_t epochs = 300, decay_every = 100;
    double lr = 0.05, decay = 1.0;
    std::vector<double> fractions{0.6, 0.2, 0.2};
  };
  auto o = std::make_shared<Opts>();
  auto* app = root.add_subcommand("train-gnn", "Train a GNN node classifier with full-batch cross-entropy");
  app->add_option("--graph", o->graphs, "Labeled training graph(s)")
      ->required()->delimiter(',')->check(CLI::ExistingFile);
  app->add_option("--target", o->target, "Categorical or Boolean target relation")->required();
  app->add_option("--feature", o->features, "Unary input relation(s)")->required()->delimiter(',');
  app->add_option("--edge", o->edges, "Message-passing relation(s) as rel[:incoming|outgoing|both]")
      ->delimiter(',');
  app->add_option("--hidden", o->hidden, "Hidden layer widths")->delimiter(',');
  app->add_flag("--readout", o->readout, "Add a global readout term to every layer");
  app->add_option("--epochs", o->epochs, "Training epochs; 0 keeps the initial weights");
  app->add_option("--lr", o->lr, "Learning rate");
  app->add_option("--lr-decay", o->decay, "Learning-rate factor applied every --decay-every epochs");
  app->add_option("--decay-every", o->decay_every, "Epochs between learning-rate decays");
  app->add_option("--optimizer", o->optimizer, "adam or gd")->check(CLI::IsMember({"adam", "gd"}));
  app->add_option("--split", o->split, "JSON with train/val/test node names (e.g. ising-gen metadata)")
      ->check(CLI::ExistingFile);
  app->add_option("--split-fractions", o->fractions, "Random train,val,test fractions of labeled nodes")
      ->delimiter(',')->expected(3);
  app->add_option("--out", o->out, "Weights JSON")->required();
  app->add_option("--loss", o->loss, "Loss CSV (default: <out>.loss.csv)");

  commands.push_back({app, [o](const RunConfig& config) {
    std::vector<AttributedGraph> graphs;
    for (const auto& path : o->graphs) graphs.push_back(load_graph(path));
    const Signature& sig = graphs.front().signature();
    for (std::size_t i = 1; i < graphs.size(); ++i) {
      if (!(graphs[i].signature() == sig)) {
        throw SchemaError(o->graphs[i] + ": signature differs from " + o->graphs.front());
      }
    }
    const auto target = sig.find(o->target);
    if (!target) throw SchemaError("--target: unknown relation '" + o->target + "'");

    GnnArchitecture arch{o->target, o->features, {}, o->hidden, o->readout};
    for (const auto& e : o->edges) arch.edges.push_back(parse_edge(e));
    GnnModel model = init_gnn(arch, sig, config.seed);

    std::vector<NodeSplit> splits;
    std::vector<LabeledGraph> data;
    std::size_t train_count = 0;
    for (std::size_t i = 0; i < graphs.size(); ++i) {
      NodeSplit s = o->split.empty()
                        ? random_split(graphs[i], *target, o->fractions, mix_seed(config.seed, i))
                        : split_from_file(o->split, graphs[i]);
      for (const auto* part : {&s.train, &s.val, &s.test}) {
        for (NodeId v : *part) {
          const NodeId arg[1] = {v};
          if (!graphs[i].has_value(graphs[i].atom(*target, arg))) {
            throw SchemaError(o->graphs[i] + ": node " + graphs[i].node_name(v) + " has no " +
                              o->target + " value");
          }
        }
      }
      train_count += s.train.size();
      data.push_back({&graphs[i], s.train});
      splits.push_back(std::move(s));
    }
    if (train_count == 0) throw SchemaError("no labeled training nodes for " + o->target);

    TrainOptions training;
    training.epochs = o->epochs;
    training.learning_rate = o->lr;
    training.decay = o->decay;
    training.decay_every = o->decay_every;
    training.optimizer = o->optimizer == "gd" ? Optimizer::gradient_descent : Optimizer::adam;
    const TrainResult trained = train(model, data, training);

    auto weighted_accuracy = [&](std::vector<NodeId> NodeSplit::*part) -> json {
      double hits = 0.0;
      std::size_t total = 0;
      for (std::size_t i = 0; i < graphs.size(); ++i) {
        const auto& nodes = splits[i].*part;
        if (nodes.empty()) continue;
        hits += accuracy(model, graphs[i], nodes) * static_cast<double>(nodes.size());
        total += nodes.size();
      }
      return total ? json(hits / static_cast<double>(total)) : json(nullptr);
    };
    std::size_t val_count = 0, test_count = 0;
    for (const auto& s : splits) {
      val_count += s.val.size();
      test_count += s.test.size();
    }
    const double final_loss = trained.loss_trace.empty() ? cross_entropy(model, data) : trained.loss_trace.back();
    const json results{{"train_accuracy", weighted_accuracy(&NodeSplit::train)},
                       {"val_accuracy", weighted_accuracy(&NodeSplit::val)},
                       {"test_accuracy", weighted_accuracy(&NodeSplit::test)},
                       {"final_loss", to_json_or_null(final_loss)},
                       {"parameter_count", model.parameter_count()},
                       {"train_nodes", train_count},
                       {"val_nodes", val_count},
                       {"test_nodes", test_count}};

    ensure_parent_dir(o->out);
    save_gnn(model, o->out);
    write_meta(o->out, config, results);
    const std::string loss_path = o->loss.empty() ? o->out + ".loss.csv" : o->loss;
    CsvTable loss{{"epoch", "loss"}, {}};
    for (std::size_t e = 0; e < trained.loss_trace.size(); ++e) {
      loss.add_row({std::to_string(e), format_double(trained.loss_trace[e])});
    }
    ensure_parent_dir(loss_path);
    write_csv(loss_path, loss);
    write_meta(loss_path, config, results);

    std::cout << "weights: " << o->out << "\nloss: " << loss_path << '\n';
    for (const char* key : {"train_accuracy", "val_accuracy", "test_accuracy", "final_loss"}) {
      std::cout << key << ": " << results[key].dump() << '\n';
    }
    return 0;
  }});
}

// --- compile-gnn ---------------------------------------------------------------

namespace {

// Random graph over the model's feature and edge relations, for the
// equivalence check. Node types cycle through the signature's types.
AttributedGraph random_check_graph(const Signature& sig, const GnnModel& model, std::size_t n,
                                   std::uint64_t seed, double edge_probability) {
  AttributedGraph g(sig);
  const auto& types = sig.node_types();
  for (std::size_t i = 0; i < n; ++i) {
    g.add_node("n" + std::to_string(i), types.empty() ? std::string() : types[i % types.size()]);
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (const auto& f : model.features) {
    const RelId rel = sig.id_of(f);
    const ValueRange& range = sig.relation(rel).range;
    for (const auto& atom : enumerate_ground_atoms(g, rel)) {
      double value = 0.0;
      if (range.kind == RangeKind::numeric) {
        const double lo = std::max(range.lo, -1.0);
        const double hi = std::max(lo, std::min(range.hi, 1.0));
        value = lo + (hi - lo) * unit(rng);
      } else {
        std::uniform_int_distribution<std::size_t> pick(0, range.cardinality() - 1);
        value = static_cast<double>(pick(rng));
      }
      g.set_value(atom, value);
    }
  }
  for (const auto& e : model.edges) {
    const RelId rel = sig.id_of(e.relation);
    for (const auto& atom : enumerate_ground_atoms(g, rel)) {
      if (unit(rng) < edge_probability) g.set_value(atom, 1.0);
    }
  }
  return g;
}

}  // namespace

void add_compile_gnn(CLI::App& root, std::vector<Command>& commands) {
  struct Opts {
    std::string weights, signature, graph, prefix = "gnn", out;
    bool params = false;
    std::size_t nodes = 8;
    double edge_probability = 0.3;
  };
  auto o = std::make_shared<Opts>();
  auto* app = root.add_subcommand("compile-gnn", "Encode a trained GNN as probability formulas");
  app->add_option("weights", o->weights, "Weights JSON")->required()->check(CLI::ExistingFile);
  app->add_option("--signature", o->signature, "Signature source (any graph JSON)")->check(CLI::ExistingFile);
  app->add_option("--graph", o->graph, "Graph for the equivalence check (default: random)")
      ->check(CLI::ExistingFile);
  app->add_option("--prefix", o->prefix, "Macro name prefix");
  app->add_flag("--params", o->params, "Emit weights as $parameters instead of constants");
  app->add_option("--nodes", o->nodes, "Nodes of the random check graph")->check(CLI::PositiveNumber);
  app->add_option("--edge-probability", o->edge_probability, "Edge density of the random check graph");
  app->add_option("--out", o->out, "Model fragment (default: stdout)");

  commands.push_back({app, [o](const RunConfig& config) {
    const GnnModel gnn = load_gnn(o->weights);
    std::optional<AttributedGraph> graph;
    Signature sig;
    if (!o->graph.empty()) {
      graph = load_graph(o->graph);
      sig = graph->signature();
    } else if (!o->signature.empty()) {
      sig = load_signature(o->signature);
    } else {
      throw SchemaError("compile-gnn needs --signature or --graph");
    }
    gnn.check(sig);

    const CompiledGnn compiled = compile(gnn, sig, {o->prefix, o->params});
    RBNModel fragment;
    fragment.signature = sig;
    fragment.macros = compiled.macros;
    const Relation& target = sig.relation(sig.id_of(gnn.target));
    fragment.definitions.push_back(
        {gnn.target, {{"v", std::string(target.arg_type(0))}}, compiled.target_body, {}});
    for (const auto& [name, value] : compiled.params) fragment.params.push_back({name, value, {}, {}});
    const std::string text = format_model(fragment);

    ParseResult reparsed = parse_model(text, sig);
    if (!reparsed.ok()) {
      throw std::runtime_error("compiled text does not re-parse: " +
                               format_error("<compiled>", reparsed.errors.front()));
    }
    if (!graph) graph = random_check_graph(sig, gnn, o->nodes, config.seed, o->edge_probability);
    const ParameterStore params = reparsed.model.default_params();
    EvalContext ctx(*graph, params, &reparsed.model);
    const RelationDef* def = reparsed.model.find_definition(gnn.target);
    const std::vector<double> rows = forward(gnn, *graph);
    const std::size_t classes = gnn.classes();
    const RelId rel = sig.id_of(gnn.target);
    double max_delta = 0.0;
    std::size_t checked = 0;
    for (NodeId v = 0; v < graph->node_count(); ++v) {
      const NodeId arg[1] = {v};
      if (!graph->in_domain(rel, arg)) continue;
      const auto dist = atom_distribution(*def, graph->atom(rel, arg), ctx);
      for (std::size_t c = 0; c < classes; ++c) {
        max_delta = std::max(max_delta, std::abs(dist.at(c) - rows[v * classes + c]));
      }
      ++checked;
    }

    std::ostringstream line;
    line << "equivalence: max |delta| = " << format_double(max_delta) << " over " << checked
         << " nodes (" << (o->graph.empty() ? "random graph" : o->graph) << ")";
    if (o->out.empty()) {
      std::cout << text;
      std::cerr << line.str() << '\n';
    } else {
      ensure_parent_dir(o->out);
      write_text_file(o->out, text);
      write_meta(o->out, config,
                 {{"max_delta", max_delta}, {"checked_nodes", checked},
                  {"macros", fragment.macros.size()}, {"parameters", fragment.params.size()}});
      std::cout << line.str() << '\n';
    }
    if (max_delta > 1e-9) {
      std::cerr << "nesy: compiled formulas deviate from the native forward pass\n";
      return 2;
    }
    return 0;
  }});
}

// --- map -----------------------------------------------------------------------

void add_map(CLI::App& root, std::vector<Command>& commands) {
  struct Opts {
    std::string model, graph, out, trace, dot;
    std::vector<std::string> gnn, map;
    SolverFlags solver;
  };
  auto o = std::make_shared<Opts>();
  auto* app = root.add_subcommand("map", "MAP inference over value-less atoms of the given relations");
  app->add_option("model", o->model, "Model file (.rbn)")->required()->check(CLI::ExistingFile);
  app->add_option("--graph", o->graph, "Graph JSON with evidence")->required()->check(CLI::ExistingFile);
  app->add_option("--map", o->map, "Relations whose value-less atoms are MAP atoms")
      ->required()->delimiter(',');
  app->add_option("--gnn", o->gnn, "Classifier for COMPUTEWITHGNN as id=weights.json")->delimiter(',');
  o->solver.add_to(*app);
  app->add_option("--out", o->out, "Values CSV (atom, relation, value)")->required();
  app->add_option("--trace", o->trace, "Per-iteration log-likelihood CSV");
  app->add_option("--dump-lgraph", o->dot, "Graphviz file of the likelihood graph");

  commands.push_back({app, [o](const RunConfig& config) {
    const AttributedGraph graph = load_graph(o->graph);
    if (!report_violations(o->graph, graph)) return 1;
    const auto model = parse_reported(o->model, graph.signature());
    if (!model) return 1;
    const ModelRegistry registry = load_registry(o->gnn);
    const AtomPartition partition = make_partition(*model, graph, o->map);
    if (partition.map_atoms.empty()) {
      throw SchemaError("no MAP atoms: the --map relations have no value-less atoms in " + o->graph);
    }
    const ParameterStore params = model->default_params();
    LikelihoodGraphFactory factory = [&](std::size_t restart) {
      LGOptions lgo;
      lgo.samples = o->solver.samples;
      lgo.seed = mix_seed(config.seed, restart);
      return std::make_unique<LikelihoodGraph>(*model, graph, partition, params, &registry, lgo);
    };
    if (!o->dot.empty()) {
      ensure_parent_dir(o->dot);
      write_text_file(o->dot, factory(0)->to_dot());
    }
    const MAPResult result = map_with_restarts(factory, o->solver.params(config));

    const Signature& sig = graph.signature();
    CsvTable values{{"atom", "relation", "value"}, {}};
    for (std::size_t i = 0; i < partition.map_atoms.size(); ++i) {
      const GroundAtom& a = partition.map_atoms[i];
      const Relation& r = sig.relation(a.rel);
      values.add_row({graph.atom_to_string(a), r.name, value_name(r, result.values[i])});
    }
    const json results{{"log_likelihood", to_json_or_null(result.log_likelihood)},
                       {"best_restart", result.best_restart},
                       {"map_atoms", partition.map_atoms.size()},
                       {"unobserved_atoms", partition.unobserved.size()}};
    ensure_parent_dir(o->out);
    write_csv(o->out, values);
    write_meta(o->out, config, results);
    if (!o->trace.empty()) {
      CsvTable trace{{"restart", "iteration", "flips", "log_likelihood"}, {}};
      for (const auto& row : result.trace) {
        trace.add_row({std::to_string(row.restart), std::to_string(row.iteration),
                       std::to_string(row.flips), format_double(row.log_likelihood)});
      }
      ensure_parent_dir(o->trace);
      write_csv(o->trace, trace);
      write_meta(o->trace, config, results);
    }
    std::cout << "MAP over " << partition.map_atoms.size() << " atoms, log-likelihood "
              << format_double(result.log_likelihood) << " (restart " << result.best_restart << ")\n";
    return 0;
  }});
}

}  // namespace nesy::cli
