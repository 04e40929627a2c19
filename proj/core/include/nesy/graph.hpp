#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace nesy {

using NodeId = std::uint32_t;
using RelId = std::uint32_t;

enum class RangeKind : std::uint8_t { boolean, categorical, numeric };

/// Value range of a relation. Boolean values are stored as 0/1, categorical
/// values as 0-based indices into `categories`, numeric values as reals in
/// [lo, hi].
struct ValueRange {
  RangeKind kind = RangeKind::boolean;
  std::vector<std::string> categories;
  double lo = 0.0;
  double hi = 1.0;

  static ValueRange boolean() { return {}; }
  static ValueRange categorical(std::vector<std::string> names);
  static ValueRange numeric(double lo, double hi);

  /// Number of discrete values; 2 for Boolean, 0 for numeric.
  std::size_t cardinality() const;
  bool is_discrete() const { return kind != RangeKind::numeric; }
  std::optional<std::size_t> index_of(std::string_view name) const;
  bool contains(double value) const;

  bool operator==(const ValueRange&) const = default;
};

struct Relation {
  std::string name;
  int arity = 1;
  ValueRange range;
  /// Undirected binary relation: r(a,b) and r(b,a) denote the same atom.
  bool symmetric = false;
  /// Per-argument node type; empty string (or empty vector) means untyped.
  std::vector<std::string> arg_types;

  std::string_view arg_type(std::size_t i) const {
    return i < arg_types.size() ? std::string_view(arg_types[i]) : std::string_view();
  }
  bool operator==(const Relation&) const = default;
};

class Signature {
 public:
  Signature() = default;

  /// Appends a relation; throws SchemaError on a duplicate name or an
  /// invalid arity/range.
  RelId add(Relation relation);
  void add_node_type(std::string type);

  std::optional<RelId> find(std::string_view name) const;
  const Relation& relation(RelId id) const { return relations_[id]; }
  Relation& relation_mut(RelId id) { return relations_[id]; }
  RelId id_of(std::string_view name) const;  // throws on unknown names
  std::size_t size() const { return relations_.size(); }
  const std::vector<Relation>& relations() const { return relations_; }
  const std::vector<std::string>& node_types() const { return node_types_; }
  bool has_node_type(std::string_view type) const;

  /// Non-empty list of violated invariants (duplicate names, unknown node
  /// types, bad ranges).
  std::vector<std::string> check() const;

  bool operator==(const Signature& other) const {
    return relations_ == other.relations_ && node_types_ == other.node_types_;
  }

 private:
  std::vector<Relation> relations_;
  std::vector<std::string> node_types_;
  std::unordered_map<std::string, RelId> index_;
};

/// A relation applied to concrete nodes. Arguments beyond the arity are 0.
struct GroundAtom {
  RelId rel = 0;
  std::uint8_t arity = 0;
  std::array<NodeId, 2> args{0, 0};

  std::span<const NodeId> arguments() const { return {args.data(), arity}; }
  std::uint64_t key() const {
    return arity == 2 ? (std::uint64_t{args[0]} << 32) | args[1] : args[0];
  }
  auto operator<=>(const GroundAtom&) const = default;
};

struct GroundAtomHash {
  std::size_t operator()(const GroundAtom& a) const noexcept {
    return std::hash<std::uint64_t>{}(a.key() * 1315423911ULL + a.rel);
  }
};

enum class Direction : std::uint8_t { outgoing, incoming, both };

/// Graph over a signature: typed nodes plus values for ground atoms.
/// Populated through the mutating calls during construction and treated as
/// immutable afterwards; concurrent readers are safe once construction is
/// done.
class AttributedGraph {
 public:
  AttributedGraph() = default;
  explicit AttributedGraph(Signature signature);

  NodeId add_node(std::string name, std::string type = {});
  /// Stores a value; symmetric atoms are normalized. Values are not range
  /// checked here, `validate` reports violations.
  void set_value(const GroundAtom& atom, double value);
  void set_value(std::string_view relation, std::span<const NodeId> args, double value);
  void erase_value(const GroundAtom& atom);

  const Signature& signature() const { return signature_; }
  Signature& signature_mut() { return signature_; }
  std::size_t node_count() const { return names_.size(); }
  const std::string& node_name(NodeId v) const { return names_[v]; }
  const std::string& node_type(NodeId v) const { return types_[v]; }
  std::optional<NodeId> find_node(std::string_view name) const;
  /// Untyped nodes match every type; an empty type matches every node.
  bool node_matches(NodeId v, std::string_view type) const;
  /// True when `args` lies in the relation's typed domain.
  bool in_domain(RelId rel, std::span<const NodeId> args) const;

  /// Builds a (normalized) atom; throws on arity mismatch or unknown nodes.
  GroundAtom atom(RelId rel, std::span<const NodeId> args) const;
  GroundAtom atom(RelId rel, std::initializer_list<NodeId> args) const {
    return atom(rel, std::span<const NodeId>(args.begin(), args.size()));
  }
  GroundAtom atom(std::string_view relation, std::initializer_list<NodeId> args) const;
  std::optional<double> value(const GroundAtom& atom) const;
  bool has_value(const GroundAtom& atom) const { return value(atom).has_value(); }
  /// Stored atoms of one relation in (arg0, arg1) order.
  std::vector<std::pair<GroundAtom, double>> atoms_of(RelId rel) const;
  std::size_t atom_count() const;

  /// Sorted adjacency of a Boolean binary relation (true-valued atoms only).
  std::span<const NodeId> out_edges(RelId rel, NodeId v) const;
  std::span<const NodeId> in_edges(RelId rel, NodeId v) const;

  std::string atom_to_string(const GroundAtom& atom) const;

  bool operator==(const AttributedGraph& other) const;

 private:
  struct Adjacency {
    std::vector<std::vector<NodeId>> out;
    std::vector<std::vector<NodeId>> in;
  };
  void link(RelId rel, NodeId a, NodeId b, bool present);

  Signature signature_;
  std::vector<std::string> names_;
  std::vector<std::string> types_;
  std::unordered_map<std::string, NodeId> node_index_;
  std::vector<std::unordered_map<std::uint64_t, double>> values_;
  std::vector<Adjacency> adjacency_;
};

/// Sorted neighbors of `v` under a binary Boolean relation. Symmetric
/// relations ignore `direction`.
std::vector<NodeId> neighbors(const AttributedGraph& graph, RelId edge_rel, NodeId v,
                              Direction direction = Direction::outgoing);

/// All ground atoms of a relation over the graph's nodes (respecting the
/// relation's argument types). Symmetric binary relations yield each
/// unordered pair once.
std::vector<GroundAtom> enumerate_ground_atoms(const AttributedGraph& graph, RelId rel);

struct Violation {
  std::string atom;
  std::string message;
};

/// Checks signature invariants, value ranges and node references. Returns an
/// empty report iff the graph is well-formed.
std::vector<Violation> validate(const AttributedGraph& graph);

/// Observed / MAP / unobserved split of the probabilistic ground atoms.
struct AtomPartition {
  std::vector<std::pair<GroundAtom, double>> observed;
  std::vector<GroundAtom> map_atoms;
  std::vector<GroundAtom> unobserved;
};

/// Orders atoms by (relation name, argument tuple); the deterministic
/// tie-break used by the MAP solver.
bool atom_name_less(const Signature& sig, const GroundAtom& a, const GroundAtom& b);

}  // namespace nesy
