#include "nesy/error.hpp"
#include "nesy/gnn.hpp"

namespace nesy {

std::vector<std::string> parameter_names(const GnnModel& model, const std::string& prefix) {
  std::vector<std::string> out;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const GnnLayer& L = model.layers[l];
    const std::string base = prefix + "_l" + std::to_string(l + 1) + "_";
    auto matrix = [&](const std::string& tag) {
      for (std::size_t i = 0; i < L.out; ++i) {
        for (std::size_t j = 0; j < L.in; ++j) {
          out.push_back(base + tag + "_" + std::to_string(i) + "_" + std::to_string(j));
        }
      }
    };
    matrix("self");
    for (std::size_t t = 0; t < L.agg.size(); ++t) matrix("agg" + std::to_string(t));
    if (L.readout) matrix("read");
    for (std::size_t i = 0; i < L.out; ++i) out.push_back(base + "bias_" + std::to_string(i));
  }
  return out;
}

namespace {

struct Compiler {
  const GnnModel& model;
  const Signature& sig;
  const CompileOptions& options;
  std::vector<std::string> names;
  std::size_t next = 0;  // index into the flattened weights
  CompiledGnn out;

  FormulaPtr weight(double w) {
    const std::size_t k = next++;
    if (!options.weights_as_params) return f::constant(w);
    out.params[names[k]] = w;
    return f::param(names[k]);
  }

  std::string unit_macro(std::size_t layer, std::size_t unit) const {
    return options.prefix + "_h" + std::to_string(layer) + "_" + std::to_string(unit);
  }

  // Input j of layer `layer` (1-based) at the node held by `var`.
  FormulaPtr input(std::size_t layer, std::size_t j, const std::vector<FeatureColumn>& cols,
                   const std::string& var) const {
    if (layer > 1) return f::macro(unit_macro(layer - 1, j), {Term::var(var)});
    const FeatureColumn& c = cols[j];
    const Relation& r = sig.relation(c.rel);
    if (c.category < 0) return f::atom(r.name, {Term::var(var)});
    return f::equals_value(r.name, {Term::var(var)},
                           r.range.categories[static_cast<std::size_t>(c.category)]);
  }

  FormulaPtr edge_guard(const EdgeSpec& e) const {
    const auto rel = sig.find(e.relation);
    const bool symmetric = rel && sig.relation(*rel).symmetric;
    auto uv = f::atom(e.relation, {Term::var("u"), Term::var("v")});
    auto vu = f::atom(e.relation, {Term::var("v"), Term::var("u")});
    if (symmetric || e.direction == Direction::incoming) return uv;
    if (e.direction == Direction::outgoing) return vu;
    return f::disj(uv, vu);
  }

  void run() {
    const auto cols = model.columns(sig);
    names = parameter_names(model, options.prefix);
    const std::vector<TypedVar> params{{"v", ""}};
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
      const GnnLayer& L = model.layers[l];
      const std::size_t layer = l + 1;
      // Terms are collected per unit in flatten order: self, agg..., read, bias.
      std::vector<std::vector<FormulaPtr>> terms(L.out);
      for (std::size_t i = 0; i < L.out; ++i) {
        for (std::size_t j = 0; j < L.in; ++j) {
          terms[i].push_back(f::mul(weight(L.self[i * L.in + j]), input(layer, j, cols, "v")));
        }
      }
      for (std::size_t t = 0; t < L.agg.size(); ++t) {
        const auto guard = edge_guard(model.edges[t]);
        for (std::size_t i = 0; i < L.out; ++i) {
          for (std::size_t j = 0; j < L.in; ++j) {
            auto w = weight(L.agg[t][i * L.in + j]);
            auto sum = f::combine({input(layer, j, cols, "u")}, Combiner::sum, {{"u", ""}}, guard);
            terms[i].push_back(f::mul(w, sum));
          }
        }
      }
      if (L.readout) {
        for (std::size_t i = 0; i < L.out; ++i) {
          for (std::size_t j = 0; j < L.in; ++j) {
            auto w = weight(L.read[i * L.in + j]);
            auto sum = f::combine({input(layer, j, cols, "w")}, Combiner::sum, {{"w", ""}});
            terms[i].push_back(f::mul(w, sum));
          }
        }
      }
      for (std::size_t i = 0; i < L.out; ++i) terms[i].push_back(weight(L.bias[i]));
      for (std::size_t i = 0; i < L.out; ++i) {
        out.macros.push_back(
            {unit_macro(layer, i), params, f::combine(std::move(terms[i]), Combiner::lreg), {}});
      }
    }
    std::vector<FormulaPtr> head;
    for (std::size_t i = 0; i < model.classes(); ++i) {
      head.push_back(f::macro(unit_macro(model.layers.size(), i), {Term::var("v")}));
    }
    out.target_body = f::softmax(std::move(head));
  }
};

}  // namespace

CompiledGnn compile(const GnnModel& model, const Signature& sig, const CompileOptions& options) {
  model.check(sig);
  Compiler c{model, sig, options, {}, 0, {}};
  c.run();
  return std::move(c.out);
}

}  // namespace nesy
