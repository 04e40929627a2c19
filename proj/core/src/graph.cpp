#include "nesy/graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "nesy/error.hpp"
#include "nesy/numeric.hpp"

namespace nesy {

ValueRange ValueRange::categorical(std::vector<std::string> names) {
  ValueRange r;
  r.kind = RangeKind::categorical;
  r.categories = std::move(names);
  return r;
}

ValueRange ValueRange::numeric(double lo, double hi) {
  ValueRange r;
  r.kind = RangeKind::numeric;
  r.lo = lo;
  r.hi = hi;
  return r;
}

std::size_t ValueRange::cardinality() const {
  switch (kind) {
    case RangeKind::boolean:
      return 2;
    case RangeKind::categorical:
      return categories.size();
    case RangeKind::numeric:
      return 0;
  }
  return 0;
}

std::optional<std::size_t> ValueRange::index_of(std::string_view name) const {
  if (kind == RangeKind::boolean) {
    if (name == "true") return 1;
    if (name == "false") return 0;
    return std::nullopt;
  }
  for (std::size_t i = 0; i < categories.size(); ++i) {
    if (categories[i] == name) return i;
  }
  return std::nullopt;
}

bool ValueRange::contains(double value) const {
  if (!std::isfinite(value)) return false;
  switch (kind) {
    case RangeKind::boolean:
      return value == 0.0 || value == 1.0;
    case RangeKind::categorical:
      return value >= 0 && value == std::floor(value) &&
             value < static_cast<double>(categories.size());
    case RangeKind::numeric:
      return value >= lo && value <= hi;
  }
  return false;
}

// --- Signature -------------------------------------------------------------

RelId Signature::add(Relation relation) {
  if (relation.name.empty()) throw SchemaError("relation with empty name");
  if (index_.count(relation.name)) {
    throw SchemaError("duplicate relation '" + relation.name + "'");
  }
  if (relation.arity < 0 || relation.arity > 2) {
    throw SchemaError("relation '" + relation.name + "': arity must be 0, 1 or 2");
  }
  if (relation.symmetric && relation.arity != 2) {
    throw SchemaError("relation '" + relation.name + "': only binary relations can be symmetric");
  }
  const RelId id = static_cast<RelId>(relations_.size());
  index_.emplace(relation.name, id);
  relations_.push_back(std::move(relation));
  return id;
}

void Signature::add_node_type(std::string type) {
  if (!has_node_type(type)) node_types_.push_back(std::move(type));
}

std::optional<RelId> Signature::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

RelId Signature::id_of(std::string_view name) const {
  if (auto id = find(name)) return *id;
  throw SchemaError("unknown relation '" + std::string(name) + "'");
}

bool Signature::has_node_type(std::string_view type) const {
  return std::find(node_types_.begin(), node_types_.end(), type) != node_types_.end();
}

std::vector<std::string> Signature::check() const {
  std::vector<std::string> issues;
  std::set<std::string> seen;
  for (const auto& r : relations_) {
    if (!seen.insert(r.name).second) issues.push_back("duplicate relation '" + r.name + "'");
    if (r.range.kind == RangeKind::categorical) {
      std::set<std::string> names(r.range.categories.begin(), r.range.categories.end());
      if (r.range.categories.size() < 2 || names.size() != r.range.categories.size()) {
        issues.push_back("relation '" + r.name + "' needs at least two distinct categories");
      }
    }
    if (r.range.kind == RangeKind::numeric && !(r.range.lo < r.range.hi)) {
      issues.push_back("relation '" + r.name + "' has an empty numeric interval");
    }
    for (const auto& t : r.arg_types) {
      if (!t.empty() && !node_types_.empty() && !has_node_type(t)) {
        issues.push_back("relation '" + r.name + "' references unknown node type '" + t + "'");
      }
    }
  }
  return issues;
}

// --- AttributedGraph -------------------------------------------------------

AttributedGraph::AttributedGraph(Signature signature)
    : signature_(std::move(signature)),
      values_(signature_.size()),
      adjacency_(signature_.size()) {}

NodeId AttributedGraph::add_node(std::string name, std::string type) {
  if (node_index_.count(name)) throw SchemaError("duplicate node id '" + name + "'");
  const NodeId id = static_cast<NodeId>(names_.size());
  node_index_.emplace(name, id);
  names_.push_back(std::move(name));
  types_.push_back(std::move(type));
  for (auto& adj : adjacency_) {
    adj.out.resize(names_.size());
    adj.in.resize(names_.size());
  }
  return id;
}

void AttributedGraph::link(RelId rel, NodeId a, NodeId b, bool present) {
  const Relation& r = signature_.relation(rel);
  if (r.arity != 2 || r.range.kind != RangeKind::boolean) return;
  if (a >= names_.size() || b >= names_.size()) return;
  auto& adj = adjacency_[rel];
  auto update = [present](std::vector<NodeId>& list, NodeId x) {
    auto it = std::lower_bound(list.begin(), list.end(), x);
    const bool found = it != list.end() && *it == x;
    if (present && !found) list.insert(it, x);
    if (!present && found) list.erase(it);
  };
  update(adj.out[a], b);
  update(adj.in[b], a);
  if (r.symmetric) {
    update(adj.out[b], a);
    update(adj.in[a], b);
  }
}

void AttributedGraph::set_value(const GroundAtom& raw, double value) {
  if (raw.rel >= signature_.size()) throw SchemaError("atom over unknown relation");
  if (values_.size() < signature_.size()) {
    values_.resize(signature_.size());
    adjacency_.resize(signature_.size());
    for (auto& adj : adjacency_) {
      adj.out.resize(names_.size());
      adj.in.resize(names_.size());
    }
  }
  GroundAtom atom = raw;
  const Relation& r = signature_.relation(atom.rel);
  atom.arity = static_cast<std::uint8_t>(r.arity);
  if (r.symmetric && atom.args[0] > atom.args[1]) std::swap(atom.args[0], atom.args[1]);
  values_[atom.rel][atom.key()] = value;
  if (r.arity == 2) link(atom.rel, atom.args[0], atom.args[1], value == 1.0);
}

void AttributedGraph::set_value(std::string_view relation, std::span<const NodeId> args,
                                double value) {
  set_value(atom(signature_.id_of(relation), args), value);
}

void AttributedGraph::erase_value(const GroundAtom& raw) {
  GroundAtom atom = raw;
  const Relation& r = signature_.relation(atom.rel);
  if (r.symmetric && atom.args[0] > atom.args[1]) std::swap(atom.args[0], atom.args[1]);
  values_[atom.rel].erase(atom.key());
  if (r.arity == 2) link(atom.rel, atom.args[0], atom.args[1], false);
}

std::optional<NodeId> AttributedGraph::find_node(std::string_view name) const {
  auto it = node_index_.find(std::string(name));
  if (it == node_index_.end()) return std::nullopt;
  return it->second;
}

bool AttributedGraph::node_matches(NodeId v, std::string_view type) const {
  if (type.empty()) return true;
  const std::string& t = types_[v];
  return t.empty() || t == type;
}

bool AttributedGraph::in_domain(RelId rel, std::span<const NodeId> args) const {
  const Relation& r = signature_.relation(rel);
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] >= names_.size()) return false;
    if (!node_matches(args[i], r.arg_type(i))) return false;
  }
  return true;
}

GroundAtom AttributedGraph::atom(RelId rel, std::span<const NodeId> args) const {
  const Relation& r = signature_.relation(rel);
  if (static_cast<int>(args.size()) != r.arity) {
    throw SchemaError("relation '" + r.name + "' expects " + std::to_string(r.arity) +
                      " arguments, got " + std::to_string(args.size()));
  }
  GroundAtom a;
  a.rel = rel;
  a.arity = static_cast<std::uint8_t>(r.arity);
  for (std::size_t i = 0; i < args.size(); ++i) a.args[i] = args[i];
  if (r.symmetric && a.args[0] > a.args[1]) std::swap(a.args[0], a.args[1]);
  return a;
}

GroundAtom AttributedGraph::atom(std::string_view relation,
                                 std::initializer_list<NodeId> args) const {
  return atom(signature_.id_of(relation), std::span<const NodeId>(args.begin(), args.size()));
}

std::optional<double> AttributedGraph::value(const GroundAtom& raw) const {
  if (raw.rel >= values_.size()) return std::nullopt;
  GroundAtom atom = raw;
  if (signature_.relation(atom.rel).symmetric && atom.args[0] > atom.args[1]) {
    std::swap(atom.args[0], atom.args[1]);
  }
  const auto& table = values_[atom.rel];
  auto it = table.find(atom.key());
  if (it == table.end()) return std::nullopt;
  return it->second;
}

std::vector<std::pair<GroundAtom, double>> AttributedGraph::atoms_of(RelId rel) const {
  std::vector<std::pair<GroundAtom, double>> out;
  if (rel >= values_.size()) return out;
  const auto arity = static_cast<std::uint8_t>(signature_.relation(rel).arity);
  out.reserve(values_[rel].size());
  for (const auto& [key, v] : values_[rel]) {
    GroundAtom a;
    a.rel = rel;
    a.arity = arity;
    if (arity == 2) {
      a.args[0] = static_cast<NodeId>(key >> 32);
      a.args[1] = static_cast<NodeId>(key & 0xffffffffULL);
    } else if (arity == 1) {
      a.args[0] = static_cast<NodeId>(key);
    }
    out.emplace_back(a, v);
  }
  std::sort(out.begin(), out.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });
  return out;
}

std::size_t AttributedGraph::atom_count() const {
  std::size_t n = 0;
  for (const auto& t : values_) n += t.size();
  return n;
}

std::span<const NodeId> AttributedGraph::out_edges(RelId rel, NodeId v) const {
  if (rel >= adjacency_.size() || v >= adjacency_[rel].out.size()) return {};
  return adjacency_[rel].out[v];
}

std::span<const NodeId> AttributedGraph::in_edges(RelId rel, NodeId v) const {
  if (rel >= adjacency_.size() || v >= adjacency_[rel].in.size()) return {};
  return adjacency_[rel].in[v];
}

std::string AttributedGraph::atom_to_string(const GroundAtom& atom) const {
  std::ostringstream os;
  os << (atom.rel < signature_.size() ? signature_.relation(atom.rel).name : "?") << '(';
  for (std::size_t i = 0; i < atom.arity; ++i) {
    if (i) os << ',';
    const NodeId v = atom.args[i];
    if (v < names_.size()) {
      os << names_[v];
    } else {
      os << '#' << v;
    }
  }
  os << ')';
  return os.str();
}

bool AttributedGraph::operator==(const AttributedGraph& other) const {
  if (!(signature_ == other.signature_) || names_ != other.names_ || types_ != other.types_) {
    return false;
  }
  for (RelId r = 0; r < signature_.size(); ++r) {
    if (atoms_of(r) != other.atoms_of(r)) return false;
  }
  return true;
}

// --- free functions ----------------------------------------------------------

std::vector<NodeId> neighbors(const AttributedGraph& graph, RelId edge_rel, NodeId v,
                              Direction direction) {
  const Relation& r = graph.signature().relation(edge_rel);
  if (r.arity != 2) {
    throw SchemaError("neighbors: relation '" + r.name + "' is not binary");
  }
  if (r.symmetric || direction == Direction::outgoing) {
    auto s = graph.out_edges(edge_rel, v);
    return {s.begin(), s.end()};
  }
  if (direction == Direction::incoming) {
    auto s = graph.in_edges(edge_rel, v);
    return {s.begin(), s.end()};
  }
  auto a = graph.out_edges(edge_rel, v);
  auto b = graph.in_edges(edge_rel, v);
  std::vector<NodeId> out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

std::vector<GroundAtom> enumerate_ground_atoms(const AttributedGraph& graph, RelId rel) {
  const Relation& r = graph.signature().relation(rel);
  std::vector<GroundAtom> out;
  const auto n = static_cast<NodeId>(graph.node_count());
  GroundAtom a;
  a.rel = rel;
  a.arity = static_cast<std::uint8_t>(r.arity);
  if (r.arity == 0) {
    out.push_back(a);
    return out;
  }
  for (NodeId x = 0; x < n; ++x) {
    if (!graph.node_matches(x, r.arg_type(0))) continue;
    if (r.arity == 1) {
      a.args[0] = x;
      out.push_back(a);
      continue;
    }
    for (NodeId y = r.symmetric ? x : 0; y < n; ++y) {
      if (!graph.node_matches(y, r.arg_type(1))) continue;
      a.args[0] = x;
      a.args[1] = y;
      out.push_back(a);
    }
  }
  return out;
}

std::vector<Violation> validate(const AttributedGraph& graph) {
  std::vector<Violation> report;
  const Signature& sig = graph.signature();
  for (const auto& issue : sig.check()) report.push_back({"<signature>", issue});
  for (NodeId v = 0; v < graph.node_count(); ++v) {
    const auto& t = graph.node_type(v);
    if (!t.empty() && !sig.node_types().empty() && !sig.has_node_type(t)) {
      report.push_back({graph.node_name(v), "unknown node type '" + t + "'"});
    }
  }
  for (RelId rel = 0; rel < sig.size(); ++rel) {
    const Relation& r = sig.relation(rel);
    for (const auto& [atom, value] : graph.atoms_of(rel)) {
      const std::string name = graph.atom_to_string(atom);
      bool known = true;
      for (NodeId v : atom.arguments()) {
        if (v >= graph.node_count()) {
          report.push_back({name, "argument refers to an unknown node"});
          known = false;
          break;
        }
      }
      if (!r.range.contains(value)) {
        report.push_back({name, "value " + format_double(value) + " outside the range of '" +
                                    r.name + "'"});
      }
      if (known && !graph.in_domain(rel, atom.arguments())) {
        report.push_back({name, "argument node type does not match relation '" + r.name + "'"});
      }
    }
  }
  return report;
}

bool atom_name_less(const Signature& sig, const GroundAtom& a, const GroundAtom& b) {
  if (a.rel != b.rel) {
    const auto& na = sig.relation(a.rel).name;
    const auto& nb = sig.relation(b.rel).name;
    if (na != nb) return na < nb;
  }
  return a.args < b.args;
}

}  // namespace nesy
