#include "nesy/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "nesy/error.hpp"
#include "nesy/numeric.hpp"

namespace nesy {

// --- model shape ---------------------------------------------------------------

std::vector<FeatureColumn> GnnModel::columns(const Signature& sig) const {
  std::vector<FeatureColumn> out;
  for (const auto& name : features) {
    auto rel = sig.find(name);
    if (!rel) throw SchemaError("GNN feature relation '" + name + "' is not in the signature");
    const Relation& r = sig.relation(*rel);
    if (r.arity != 1) throw SchemaError("GNN feature relation '" + name + "' is not unary");
    if (r.range.kind == RangeKind::categorical) {
      for (std::size_t c = 0; c < r.range.categories.size(); ++c) {
        out.push_back({*rel, static_cast<int>(c)});
      }
    } else {
      out.push_back({*rel, -1});
    }
  }
  return out;
}

std::size_t GnnModel::input_width(const Signature& sig) const { return columns(sig).size(); }

void GnnModel::check(const Signature& sig) const {
  if (layers.empty()) throw SchemaError("GNN has no layers");
  std::size_t width = input_width(sig);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const GnnLayer& L = layers[l];
    const std::string where = "layer " + std::to_string(l);
    if (L.in != width) {
      throw SchemaError(where + ": input width " + std::to_string(L.in) + ", expected " +
                        std::to_string(width));
    }
    const std::size_t cells = L.in * L.out;
    if (L.self.size() != cells) throw SchemaError(where + ": self matrix has the wrong size");
    if (L.agg.size() != edges.size()) {
      throw SchemaError(where + ": " + std::to_string(L.agg.size()) + " aggregation matrices for " +
                        std::to_string(edges.size()) + " edge types");
    }
    for (const auto& m : L.agg) {
      if (m.size() != cells) throw SchemaError(where + ": aggregation matrix has the wrong size");
    }
    if (L.readout ? L.read.size() != cells : !L.read.empty()) {
      throw SchemaError(where + ": readout matrix has the wrong size");
    }
    if (L.bias.size() != L.out) throw SchemaError(where + ": bias has the wrong size");
    auto finite = [](const std::vector<double>& xs) {
      return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
    };
    bool ok = finite(L.self) && finite(L.read) && finite(L.bias);
    for (const auto& m : L.agg) ok = ok && finite(m);
    if (!ok) throw SchemaError(where + ": non-finite weight");
    width = L.out;
  }
  for (const auto& e : edges) {
    auto rel = sig.find(e.relation);
    if (!rel) throw SchemaError("unknown edge type '" + e.relation + "'");
    const Relation& r = sig.relation(*rel);
    if (r.arity != 2 || r.range.kind != RangeKind::boolean) {
      throw SchemaError("edge type '" + e.relation + "' is not a binary Boolean relation");
    }
  }
  auto t = sig.find(target);
  if (!t) throw SchemaError("GNN target relation '" + target + "' is not in the signature");
  const Relation& tr = sig.relation(*t);
  if (tr.arity != 1) throw SchemaError("GNN target relation '" + target + "' is not unary");
  if (tr.range.cardinality() != classes()) {
    throw SchemaError("GNN has " + std::to_string(classes()) + " outputs, target '" + target +
                      "' has " + std::to_string(tr.range.cardinality()) + " values");
  }
}

std::size_t GnnModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& L : layers) {
    n += L.self.size() + L.read.size() + L.bias.size();
    for (const auto& m : L.agg) n += m.size();
  }
  return n;
}

GnnModel init_gnn(const GnnArchitecture& arch, const Signature& sig, std::uint64_t seed) {
  GnnModel model;
  model.target = arch.target;
  model.features = arch.features;
  model.edges = arch.edges;
  auto t = sig.find(arch.target);
  if (!t) throw SchemaError("GNN target relation '" + arch.target + "' is not in the signature");
  std::vector<std::size_t> widths{model.input_width(sig)};
  widths.insert(widths.end(), arch.hidden.begin(), arch.hidden.end());
  widths.push_back(sig.relation(*t).range.cardinality());
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    GnnLayer L;
    L.in = widths[l];
    L.out = widths[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(L.in, 1)));
    std::uniform_real_distribution<double> u(-bound, bound);
    auto fill = [&](std::vector<double>& m, std::size_t n) {
      m.resize(n);
      for (auto& x : m) x = u(rng);
    };
    fill(L.self, L.in * L.out);
    L.agg.resize(model.edges.size());
    for (auto& m : L.agg) fill(m, L.in * L.out);
    L.readout = arch.readout;
    if (L.readout) fill(L.read, L.in * L.out);
    fill(L.bias, L.out);
    model.layers.push_back(std::move(L));
  }
  model.check(sig);
  return model;
}

// --- forward ---------------------------------------------------------------------

std::vector<double> node_features(const GnnModel& model, const AttributedGraph& graph) {
  const auto cols = model.columns(graph.signature());
  const std::size_t n = graph.node_count();
  const std::size_t d = cols.size();
  std::vector<double> x(n * d, 0.0);
  for (NodeId v = 0; v < n; ++v) {
    const NodeId arg[1] = {v};
    for (std::size_t j = 0; j < d; ++j) {
      const FeatureColumn& c = cols[j];
      if (!graph.in_domain(c.rel, arg)) continue;
      const Relation& r = graph.signature().relation(c.rel);
      auto value = graph.value(graph.atom(c.rel, arg));
      if (!value) {
        if (r.range.kind == RangeKind::boolean) continue;
        throw EvalError("GNN input " + graph.atom_to_string(graph.atom(c.rel, arg)) +
                        " has no value");
      }
      x[v * d + j] = c.category < 0 ? *value : (*value == c.category ? 1.0 : 0.0);
    }
  }
  return x;
}

namespace {

using Adjacency = std::vector<std::vector<NodeId>>;

std::vector<Adjacency> edge_lists(const GnnModel& model, const AttributedGraph& graph) {
  std::vector<Adjacency> out;
  for (const auto& e : model.edges) {
    auto rel = graph.signature().find(e.relation);
    if (!rel) throw SchemaError("unknown edge type '" + e.relation + "'");
    Adjacency adj(graph.node_count());
    for (NodeId v = 0; v < graph.node_count(); ++v) adj[v] = neighbors(graph, *rel, v, e.direction);
    out.push_back(std::move(adj));
  }
  return out;
}

// Activations of one layer plus the pre-aggregated inputs backprop needs.
struct LayerTrace {
  std::vector<std::vector<double>> agg;  // per edge type, n x in
  std::vector<double> readout;          // in
  std::vector<double> out;              // n x out, after the sigmoid
};

// y[v] += W x[v] for W out x in, row-major.
void affine(const std::vector<double>& w, const double* x, double* y, std::size_t in,
            std::size_t out) {
  for (std::size_t i = 0; i < out; ++i) {
    double acc = 0.0;
    const double* row = w.data() + i * in;
    for (std::size_t j = 0; j < in; ++j) acc += row[j] * x[j];
    y[i] += acc;
  }
}

std::vector<LayerTrace> run_layers(const GnnModel& model, const std::vector<Adjacency>& adj,
                                   const std::vector<double>& features, std::size_t n) {
  std::vector<LayerTrace> traces;
  const std::vector<double>* h = &features;
  for (const GnnLayer& L : model.layers) {
    LayerTrace tr;
    tr.agg.resize(adj.size());
    for (std::size_t t = 0; t < adj.size(); ++t) {
      auto& s = tr.agg[t];
      s.assign(n * L.in, 0.0);
      for (NodeId v = 0; v < n; ++v) {
        for (NodeId u : adj[t][v]) {
          for (std::size_t j = 0; j < L.in; ++j) s[v * L.in + j] += (*h)[u * L.in + j];
        }
      }
    }
    if (L.readout) {
      tr.readout.assign(L.in, 0.0);
      for (std::size_t v = 0; v < n; ++v) {
        for (std::size_t j = 0; j < L.in; ++j) tr.readout[j] += (*h)[v * L.in + j];
      }
    }
    tr.out.assign(n * L.out, 0.0);
    std::vector<double> common(L.bias);
    if (L.readout) affine(L.read, tr.readout.data(), common.data(), L.in, L.out);
    for (std::size_t v = 0; v < n; ++v) {
      double* z = tr.out.data() + v * L.out;
      std::copy(common.begin(), common.end(), z);
      affine(L.self, h->data() + v * L.in, z, L.in, L.out);
      for (std::size_t t = 0; t < adj.size(); ++t) {
        affine(L.agg[t], tr.agg[t].data() + v * L.in, z, L.in, L.out);
      }
      for (std::size_t i = 0; i < L.out; ++i) z[i] = sigmoid(z[i]);
    }
    traces.push_back(std::move(tr));
    h = &traces.back().out;
  }
  return traces;
}

std::vector<double> softmax_rows(const std::vector<double>& h, std::size_t n, std::size_t k) {
  std::vector<double> p(h);
  for (std::size_t v = 0; v < n; ++v) {
    std::span<double> row(p.data() + v * k, k);
    const double z = log_sum_exp(row);
    for (auto& x : row) x = std::exp(x - z);
  }
  return p;
}

}  // namespace

std::vector<double> forward(const GnnModel& model, const AttributedGraph& graph,
                            const std::vector<double>& features) {
  const std::size_t n = graph.node_count();
  if (model.layers.empty()) throw SchemaError("GNN has no layers");
  if (features.size() != n * model.layers.front().in) {
    throw SchemaError("GNN feature matrix has the wrong size");
  }
  const auto traces = run_layers(model, edge_lists(model, graph), features, n);
  return softmax_rows(traces.back().out, n, model.classes());
}

std::vector<double> forward(const GnnModel& model, const AttributedGraph& graph) {
  model.check(graph.signature());
  return forward(model, graph, node_features(model, graph));
}

// --- parameters ------------------------------------------------------------------

std::vector<double> flatten(const GnnModel& model) {
  std::vector<double> out;
  out.reserve(model.parameter_count());
  for (const auto& L : model.layers) {
    out.insert(out.end(), L.self.begin(), L.self.end());
    for (const auto& m : L.agg) out.insert(out.end(), m.begin(), m.end());
    out.insert(out.end(), L.read.begin(), L.read.end());
    out.insert(out.end(), L.bias.begin(), L.bias.end());
  }
  return out;
}

void unflatten(GnnModel& model, const std::vector<double>& values) {
  if (values.size() != model.parameter_count()) {
    throw SchemaError("unflatten: " + std::to_string(values.size()) + " values for " +
                      std::to_string(model.parameter_count()) + " parameters");
  }
  auto it = values.begin();
  auto take = [&](std::vector<double>& m) {
    std::copy(it, it + static_cast<std::ptrdiff_t>(m.size()), m.begin());
    it += static_cast<std::ptrdiff_t>(m.size());
  };
  for (auto& L : model.layers) {
    take(L.self);
    for (auto& m : L.agg) take(m);
    take(L.read);
    take(L.bias);
  }
}

// --- training --------------------------------------------------------------------

double cross_entropy(const GnnModel& model, const std::vector<LabeledGraph>& data,
                     std::vector<double>* gradient) {
  std::size_t total = 0;
  for (const auto& d : data) total += d.train_nodes.size();
  if (total == 0) throw EvalError("cross_entropy: no training nodes");
  const double scale = 1.0 / static_cast<double>(total);

  // Per-layer gradient accumulators, same layout as the model.
  GnnModel grad = model;
  if (gradient) {
    std::vector<double> zeros(model.parameter_count(), 0.0);
    unflatten(grad, zeros);
  }
  double loss = 0.0;
  const std::size_t k = model.classes();
  for (const auto& d : data) {
    const AttributedGraph& g = *d.graph;
    model.check(g.signature());
    const std::size_t n = g.node_count();
    const RelId target = g.signature().id_of(model.target);
    const auto adj = edge_lists(model, g);
    const auto x = node_features(model, g);
    const auto traces = run_layers(model, adj, x, n);
    const auto p = softmax_rows(traces.back().out, n, k);

    // dL/dh for the last layer, through the softmax.
    std::vector<double> dh(n * k, 0.0);
    for (NodeId v : d.train_nodes) {
      const NodeId arg[1] = {v};
      auto label = g.value(g.atom(target, arg));
      if (!label) {
        throw EvalError("training node " + g.node_name(v) + " has no " + model.target + " label");
      }
      const auto y = static_cast<std::size_t>(*label);
      loss -= std::log(p[v * k + y]) * scale;
      for (std::size_t c = 0; c < k; ++c) {
        dh[v * k + c] += (p[v * k + c] - (c == y ? 1.0 : 0.0)) * scale;
      }
    }
    if (!gradient) continue;

    for (std::size_t l = model.layers.size(); l-- > 0;) {
      const GnnLayer& L = model.layers[l];
      GnnLayer& G = grad.layers[l];
      const LayerTrace& tr = traces[l];
      const std::vector<double>& h_in = l == 0 ? x : traces[l - 1].out;
      std::vector<double> dz(n * L.out);
      for (std::size_t i = 0; i < dz.size(); ++i) {
        const double s = tr.out[i];
        dz[i] = dh[i] * s * (1.0 - s);
      }
      std::vector<double> dz_sum(L.out, 0.0);
      for (std::size_t v = 0; v < n; ++v) {
        for (std::size_t i = 0; i < L.out; ++i) {
          const double g_vi = dz[v * L.out + i];
          if (g_vi == 0.0) continue;
          dz_sum[i] += g_vi;
          for (std::size_t j = 0; j < L.in; ++j) {
            G.self[i * L.in + j] += g_vi * h_in[v * L.in + j];
            for (std::size_t t = 0; t < adj.size(); ++t) {
              G.agg[t][i * L.in + j] += g_vi * tr.agg[t][v * L.in + j];
            }
          }
        }
      }
      for (std::size_t i = 0; i < L.out; ++i) {
        G.bias[i] += dz_sum[i];
        if (L.readout) {
          for (std::size_t j = 0; j < L.in; ++j) G.read[i * L.in + j] += dz_sum[i] * tr.readout[j];
        }
      }
      if (l == 0) break;
      // Gradient with respect to the previous layer's activations.
      std::vector<double> dprev(n * L.in, 0.0);
      std::vector<double> read_back(L.in, 0.0);
      if (L.readout) {
        for (std::size_t i = 0; i < L.out; ++i) {
          for (std::size_t j = 0; j < L.in; ++j) read_back[j] += dz_sum[i] * L.read[i * L.in + j];
        }
      }
      for (std::size_t v = 0; v < n; ++v) {
        double* dv = dprev.data() + v * L.in;
        for (std::size_t j = 0; j < L.in; ++j) dv[j] += read_back[j];
        for (std::size_t i = 0; i < L.out; ++i) {
          const double g_vi = dz[v * L.out + i];
          if (g_vi == 0.0) continue;
          for (std::size_t j = 0; j < L.in; ++j) dv[j] += g_vi * L.self[i * L.in + j];
          for (std::size_t t = 0; t < adj.size(); ++t) {
            // v aggregates from u, so u receives v's gradient.
            for (NodeId u : adj[t][v]) {
              double* du = dprev.data() + u * L.in;
              for (std::size_t j = 0; j < L.in; ++j) du[j] += g_vi * L.agg[t][i * L.in + j];
            }
          }
        }
      }
      dh = std::move(dprev);
    }
  }
  if (gradient) *gradient = flatten(grad);
  return loss;
}

TrainResult train(GnnModel& model, const std::vector<LabeledGraph>& data,
                  const TrainOptions& options) {
  TrainResult result;
  std::vector<double> w = flatten(model);
  std::vector<double> m(w.size(), 0.0);
  std::vector<double> v(w.size(), 0.0);
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-8;
  double lr = options.learning_rate;
  std::vector<double> grad;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    if (epoch > 0 && options.decay_every > 0 && epoch % options.decay_every == 0) {
      lr *= options.decay;
    }
    unflatten(model, w);
    const double loss = cross_entropy(model, data, &grad);
    if (!std::isfinite(loss)) {
      throw NumericError("training loss became " + format_double(loss) + " at epoch " +
                         std::to_string(epoch));
    }
    result.loss_trace.push_back(loss);
    if (options.optimizer == Optimizer::gradient_descent) {
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * grad[i];
      continue;
    }
    const double t = static_cast<double>(epoch + 1);
    const double c1 = 1.0 - std::pow(beta1, t);
    const double c2 = 1.0 - std::pow(beta2, t);
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
      w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
  }
  unflatten(model, w);
  const double final_loss = cross_entropy(model, data);
  if (!std::isfinite(final_loss)) throw NumericError("final training loss is not finite");
  result.loss_trace.push_back(final_loss);
  return result;
}

double accuracy(const GnnModel& model, const AttributedGraph& graph,
                const std::vector<NodeId>& nodes) {
  if (nodes.empty()) return 0.0;
  const auto p = forward(model, graph);
  const std::size_t k = model.classes();
  const RelId target = graph.signature().id_of(model.target);
  std::size_t hits = 0;
  for (NodeId v : nodes) {
    const NodeId arg[1] = {v};
    auto label = graph.value(graph.atom(target, arg));
    if (!label) continue;
    const auto row = p.begin() + static_cast<std::ptrdiff_t>(v * k);
    const auto best = static_cast<std::size_t>(std::max_element(row, row + static_cast<std::ptrdiff_t>(k)) - row);
    if (best == static_cast<std::size_t>(*label)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(nodes.size());
}

// --- registry ------------------------------------------------------------------------

void ModelRegistry::add(const std::string& id, GnnModel model) {
  if (models_.count(id)) throw BuildError("GNN id '" + id + "' is already registered");
  models_.emplace(id, std::make_shared<const GnnModel>(std::move(model)));
}

const GnnModel& ModelRegistry::resolve(const std::string& id) const {
  auto it = models_.find(id);
  if (it == models_.end()) throw BuildError("no GNN registered under id '" + id + "'");
  return *it->second;
}

void check_gnn_reference(const Formula& ref, const GnnModel& model) {
  if (ref.kind != FormulaKind::gnn) throw BuildError("not a COMPUTEWITHGNN reference");
  if (static_cast<std::size_t>(ref.num_values) != model.classes()) {
    throw BuildError("COMPUTEWITHGNN " + ref.name + " WithNumValues " +
                     std::to_string(ref.num_values) + ", the model has " +
                     std::to_string(model.classes()) + " outputs");
  }
  std::set<std::string> atoms;
  std::set<std::string> guards;
  for (const auto& clause : ref.clauses) {
    for (const auto& a : clause.atoms) atoms.insert(a->name);
    if (clause.where) {
      visit(*clause.where, [&](const Formula& fm) {
        if (fm.kind == FormulaKind::atom || fm.kind == FormulaKind::equals_value) {
          guards.insert(fm.name);
        }
      });
    }
  }
  const std::set<std::string> features(model.features.begin(), model.features.end());
  if (atoms != features) {
    std::string want;
    for (const auto& f : model.features) want += (want.empty() ? "" : ", ") + f;
    throw BuildError("COMPUTEWITHGNN " + ref.name + ": input atoms do not match the model's " +
                     "features (" + want + ")");
  }
  std::set<std::string> edges;
  for (const auto& e : model.edges) edges.insert(e.relation);
  for (const auto& g : guards) {
    if (!edges.count(g)) {
      throw BuildError("COMPUTEWITHGNN " + ref.name + ": guard relation '" + g +
                       "' is not an edge type of the model");
    }
  }
}

}  // namespace nesy
