#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mps {

using NodeId = std::uint32_t;
using RelationId = std::uint32_t;
using TypeId = std::uint32_t;

// A meta-path is an ordered sequence of relation ids r_1 ... r_L. An
// occurrence starting at node v_0 is any walk v_0 -r_1-> v_1 ... -r_L-> v_L;
// occurrences are counted as walks, so shared sub-structure multiplies.
struct MetaPath {
  std::vector<RelationId> relations;

  std::size_t length() const { return relations.size(); }
  bool empty() const { return relations.empty(); }
  bool operator==(const MetaPath&) const = default;
};

struct Edge {
  NodeId src = 0;
  RelationId rel = 0;
  NodeId dst = 0;

  friend auto operator<=>(const Edge&, const Edge&) = default;
};

// Immutable directed heterogeneous graph over a unified feature space.
// Nodes carry a type tag and a D-dimensional feature vector; edges are
// (src, relation, dst) triples grouped per relation in CSR form with
// neighbor lists sorted ascending (fixed summation order keeps every
// aggregation in the toolkit deterministic and permutation-invariant).
class HeteroGraph {
 public:
  std::size_t num_nodes() const { return node_types_.size(); }
  std::size_t num_relations() const { return relation_names_.size(); }
  std::size_t num_types() const { return type_names_.size(); }
  std::size_t feature_dim() const { return feature_dim_; }
  std::size_t num_edges() const;

  TypeId node_type(NodeId v) const { return node_types_[v]; }
  const std::string& type_name(TypeId t) const { return type_names_[t]; }
  const std::string& relation_name(RelationId r) const { return relation_names_[r]; }
  std::optional<TypeId> find_type(std::string_view name) const;
  std::optional<RelationId> find_relation(std::string_view name) const;

  std::span<const double> features(NodeId v) const {
    return {features_.data() + static_cast<std::size_t>(v) * feature_dim_, feature_dim_};
  }

  // r-successors of v, sorted ascending, each neighbor exactly once.
  std::span<const NodeId> neighbors(NodeId v, RelationId r) const {
    const auto& off = offsets_[r];
    return {adjacency_[r].data() + off[v], off[v + 1] - off[v]};
  }

  std::size_t out_degree(NodeId v, RelationId r) const {
    return offsets_[r][v + 1] - offsets_[r][v];
  }

  bool has_edge(NodeId u, RelationId r, NodeId v) const;

  // Number of walks from v that follow mp's relations in order. The empty
  // meta-path has exactly one occurrence (the trivial walk). Computed by a
  // frontier-multiplicity sweep with saturating uint64 arithmetic; no walk
  // is ever materialized.
  std::uint64_t count_occurrences(NodeId v, const MetaPath& mp) const;

  std::vector<Edge> all_edges() const;

 private:
  friend class GraphBuilder;

  std::size_t feature_dim_ = 0;
  std::vector<std::string> type_names_;
  std::vector<std::string> relation_names_;
  std::vector<TypeId> node_types_;
  std::vector<double> features_;  // num_nodes x feature_dim, row-major
  // Per relation: offsets_[r] has num_nodes+1 entries into adjacency_[r].
  std::vector<std::vector<std::size_t>> offsets_;
  std::vector<std::vector<NodeId>> adjacency_;
};

// Incremental construction; build() freezes into the immutable CSR form.
// Duplicate (src, rel, dst) triples collapse to one edge.
class GraphBuilder {
 public:
  explicit GraphBuilder(std::size_t feature_dim) : feature_dim_(feature_dim) {}

  TypeId add_type(std::string name);
  RelationId add_relation(std::string name);
  NodeId add_node(TypeId type, std::vector<double> features);
  void add_edge(NodeId src, RelationId rel, NodeId dst);

  std::size_t num_nodes() const { return node_types_.size(); }

  HeteroGraph build() &&;

 private:
  std::size_t feature_dim_;
  std::vector<std::string> type_names_;
  std::vector<std::string> relation_names_;
  std::vector<TypeId> node_types_;
  std::vector<double> features_;
  std::vector<Edge> edges_;
};

// Node/edge sets of a meta-path explanation: the union over all given
// meta-paths of every node and edge participating in a complete occurrence
// that starts at one of the targets, plus the targets themselves. Both
// vectors are sorted and duplicate-free.
struct OccurrenceSubgraph {
  std::vector<NodeId> nodes;
  std::vector<Edge> edges;

  bool contains_edge(const Edge& e) const;
  bool operator==(const OccurrenceSubgraph&) const = default;
};

OccurrenceSubgraph induced_subgraph(const HeteroGraph& g,
                                    std::span<const NodeId> targets,
                                    std::span<const MetaPath> mps);

// Per-position reachability for one meta-path of length L:
//   forward[j]     - nodes reachable from a target via r_1..r_j (j = 0: targets)
//   completable[j] - nodes that can start the remaining suffix r_{j+1}..r_L
//                    (j = L: every node, trivially)
// A node sits at position j of some complete occurrence iff
// forward[j] && completable[j]; an edge (a, r_j, b) participates iff
// forward[j-1][a] && completable[j][b]. Both the explanation subgraph and
// the model's computational graph are defined through these masks.
struct MetaPathLayers {
  std::vector<std::vector<char>> forward;
  std::vector<std::vector<char>> completable;
};

MetaPathLayers metapath_layers(const HeteroGraph& g,
                               std::span<const NodeId> targets,
                               const MetaPath& mp);

// Structural edits (both return a rebuilt graph; node set, types, features
// and the relation table are preserved). remove_edges ignores edges that are
// absent; add_edges ignores edges already present.
HeteroGraph remove_edges(const HeteroGraph& g, std::span<const Edge> edges);
HeteroGraph add_edges(const HeteroGraph& g, std::span<const Edge> edges);

// "r1,r2,..." by relation name; inverse of parse_metapath.
std::string format_metapath(const HeteroGraph& g, const MetaPath& mp);
MetaPath parse_metapath(const HeteroGraph& g, std::string_view text);

}  // namespace mps
