#include "mps/graph.hpp"

#include <algorithm>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "mps/errors.hpp"

namespace mps {

namespace {

std::uint64_t sat_add(std::uint64_t a, std::uint64_t b) {
  const std::uint64_t s = a + b;
  return s < a ? std::numeric_limits<std::uint64_t>::max() : s;
}

}  // namespace

std::size_t HeteroGraph::num_edges() const {
  std::size_t total = 0;
  for (const auto& adj : adjacency_) total += adj.size();
  return total;
}

std::optional<TypeId> HeteroGraph::find_type(std::string_view name) const {
  for (TypeId t = 0; t < type_names_.size(); ++t) {
    if (type_names_[t] == name) return t;
  }
  return std::nullopt;
}

std::optional<RelationId> HeteroGraph::find_relation(std::string_view name) const {
  for (RelationId r = 0; r < relation_names_.size(); ++r) {
    if (relation_names_[r] == name) return r;
  }
  return std::nullopt;
}

bool HeteroGraph::has_edge(NodeId u, RelationId r, NodeId v) const {
  const auto nbrs = neighbors(u, r);
  return std::binary_search(nbrs.begin(), nbrs.end(), v);
}

std::uint64_t HeteroGraph::count_occurrences(NodeId v, const MetaPath& mp) const {
  // frontier: node -> number of distinct prefix walks ending there.
  std::vector<std::pair<NodeId, std::uint64_t>> frontier{{v, 1}};
  std::unordered_map<NodeId, std::uint64_t> next;
  for (const RelationId r : mp.relations) {
    if (r >= num_relations()) throw DataError("count_occurrences: unknown relation id");
    next.clear();
    for (const auto& [u, mult] : frontier) {
      for (const NodeId w : neighbors(u, r)) {
        auto& slot = next[w];
        slot = sat_add(slot, mult);
      }
    }
    if (next.empty()) return 0;
    frontier.assign(next.begin(), next.end());
    // Deterministic iteration is not needed for the total, but keep the
    // frontier sorted so the saturation point (if ever hit) is stable too.
    std::sort(frontier.begin(), frontier.end());
  }
  std::uint64_t total = 0;
  for (const auto& [u, mult] : frontier) total = sat_add(total, mult);
  return total;
}

std::vector<Edge> HeteroGraph::all_edges() const {
  std::vector<Edge> edges;
  edges.reserve(num_edges());
  for (RelationId r = 0; r < num_relations(); ++r) {
    for (NodeId u = 0; u < num_nodes(); ++u) {
      for (const NodeId v : neighbors(u, r)) edges.push_back({u, r, v});
    }
  }
  return edges;
}

TypeId GraphBuilder::add_type(std::string name) {
  for (TypeId t = 0; t < type_names_.size(); ++t) {
    if (type_names_[t] == name) throw DataError("duplicate node type: " + name);
  }
  type_names_.push_back(std::move(name));
  return static_cast<TypeId>(type_names_.size() - 1);
}

RelationId GraphBuilder::add_relation(std::string name) {
  for (RelationId r = 0; r < relation_names_.size(); ++r) {
    if (relation_names_[r] == name) throw DataError("duplicate relation: " + name);
  }
  relation_names_.push_back(std::move(name));
  return static_cast<RelationId>(relation_names_.size() - 1);
}

NodeId GraphBuilder::add_node(TypeId type, std::vector<double> features) {
  if (type >= type_names_.size()) throw DataError("add_node: unknown type id");
  if (features.size() != feature_dim_) {
    throw DataError("add_node: feature vector has dimension " +
                    std::to_string(features.size()) + ", graph expects " +
                    std::to_string(feature_dim_));
  }
  node_types_.push_back(type);
  features_.insert(features_.end(), features.begin(), features.end());
  return static_cast<NodeId>(node_types_.size() - 1);
}

void GraphBuilder::add_edge(NodeId src, RelationId rel, NodeId dst) {
  if (src >= node_types_.size() || dst >= node_types_.size()) {
    throw DataError("add_edge: node id out of range");
  }
  if (rel >= relation_names_.size()) throw DataError("add_edge: unknown relation id");
  edges_.push_back({src, rel, dst});
}

HeteroGraph GraphBuilder::build() && {
  HeteroGraph g;
  g.feature_dim_ = feature_dim_;
  g.type_names_ = std::move(type_names_);
  g.relation_names_ = std::move(relation_names_);
  g.node_types_ = std::move(node_types_);
  g.features_ = std::move(features_);

  const std::size_t n = g.node_types_.size();
  const std::size_t nrel = g.relation_names_.size();
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());

  g.offsets_.assign(nrel, std::vector<std::size_t>(n + 1, 0));
  g.adjacency_.assign(nrel, {});
  for (const Edge& e : edges_) ++g.offsets_[e.rel][e.src + 1];
  for (RelationId r = 0; r < nrel; ++r) {
    auto& off = g.offsets_[r];
    for (std::size_t v = 0; v < n; ++v) off[v + 1] += off[v];
    g.adjacency_[r].resize(off[n]);
  }
  std::vector<std::size_t> cursor(nrel, 0);
  // edges_ is sorted by (src, rel, dst); emit per relation in that order,
  // which leaves each neighbor list sorted ascending.
  std::vector<std::vector<std::size_t>> fill(nrel, std::vector<std::size_t>());
  for (RelationId r = 0; r < nrel; ++r) fill[r] = g.offsets_[r];
  for (const Edge& e : edges_) {
    g.adjacency_[e.rel][fill[e.rel][e.src]++] = e.dst;
  }
  return g;
}

bool OccurrenceSubgraph::contains_edge(const Edge& e) const {
  return std::binary_search(edges.begin(), edges.end(), e);
}

MetaPathLayers metapath_layers(const HeteroGraph& g,
                               std::span<const NodeId> targets,
                               const MetaPath& mp) {
  const std::size_t n = g.num_nodes();
  const std::size_t len = mp.length();
  MetaPathLayers layers;
  layers.forward.assign(len + 1, std::vector<char>(n, 0));
  layers.completable.assign(len + 1, std::vector<char>(n, 0));

  for (const NodeId t : targets) layers.forward[0][t] = 1;
  for (std::size_t j = 1; j <= len; ++j) {
    const RelationId r = mp.relations[j - 1];
    const auto& prev = layers.forward[j - 1];
    auto& cur = layers.forward[j];
    for (NodeId v = 0; v < n; ++v) {
      if (!prev[v]) continue;
      for (const NodeId u : g.neighbors(v, r)) cur[u] = 1;
    }
  }

  std::fill(layers.completable[len].begin(), layers.completable[len].end(), 1);
  for (std::size_t j = len; j-- > 0;) {
    const RelationId r = mp.relations[j];
    const auto& nextc = layers.completable[j + 1];
    auto& cur = layers.completable[j];
    for (NodeId v = 0; v < n; ++v) {
      for (const NodeId u : g.neighbors(v, r)) {
        if (nextc[u]) {
          cur[v] = 1;
          break;
        }
      }
    }
  }
  return layers;
}

OccurrenceSubgraph induced_subgraph(const HeteroGraph& g,
                                    std::span<const NodeId> targets,
                                    std::span<const MetaPath> mps) {
  OccurrenceSubgraph sub;
  std::vector<char> in_nodes(g.num_nodes(), 0);
  for (const NodeId t : targets) in_nodes[t] = 1;

  for (const MetaPath& mp : mps) {
    const MetaPathLayers layers = metapath_layers(g, targets, mp);
    for (std::size_t j = 1; j <= mp.length(); ++j) {
      const RelationId r = mp.relations[j - 1];
      const auto& fwd = layers.forward[j - 1];
      const auto& comp = layers.completable[j];
      for (NodeId a = 0; a < g.num_nodes(); ++a) {
        if (!fwd[a]) continue;
        for (const NodeId b : g.neighbors(a, r)) {
          if (!comp[b]) continue;
          sub.edges.push_back({a, r, b});
          in_nodes[a] = 1;
          in_nodes[b] = 1;
        }
      }
    }
  }

  std::sort(sub.edges.begin(), sub.edges.end());
  sub.edges.erase(std::unique(sub.edges.begin(), sub.edges.end()), sub.edges.end());
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    if (in_nodes[v]) sub.nodes.push_back(v);
  }
  return sub;
}

namespace {

HeteroGraph rebuild_with_edges(const HeteroGraph& g, std::vector<Edge> edges) {
  GraphBuilder b(g.feature_dim());
  for (TypeId t = 0; t < g.num_types(); ++t) b.add_type(g.type_name(t));
  for (RelationId r = 0; r < g.num_relations(); ++r) b.add_relation(g.relation_name(r));
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    const auto f = g.features(v);
    b.add_node(g.node_type(v), std::vector<double>(f.begin(), f.end()));
  }
  for (const Edge& e : edges) b.add_edge(e.src, e.rel, e.dst);
  return std::move(b).build();
}

}  // namespace

HeteroGraph remove_edges(const HeteroGraph& g, std::span<const Edge> edges) {
  std::vector<Edge> drop(edges.begin(), edges.end());
  std::sort(drop.begin(), drop.end());
  std::vector<Edge> kept;
  kept.reserve(g.num_edges());
  for (const Edge& e : g.all_edges()) {
    if (!std::binary_search(drop.begin(), drop.end(), e)) kept.push_back(e);
  }
  return rebuild_with_edges(g, std::move(kept));
}

HeteroGraph add_edges(const HeteroGraph& g, std::span<const Edge> edges) {
  std::vector<Edge> all = g.all_edges();
  all.insert(all.end(), edges.begin(), edges.end());
  return rebuild_with_edges(g, std::move(all));
}

std::string format_metapath(const HeteroGraph& g, const MetaPath& mp) {
  std::string out;
  for (std::size_t i = 0; i < mp.relations.size(); ++i) {
    if (i) out += ',';
    out += g.relation_name(mp.relations[i]);
  }
  return out;
}

MetaPath parse_metapath(const HeteroGraph& g, std::string_view text) {
  MetaPath mp;
  std::string token;
  std::istringstream in{std::string(text)};
  while (std::getline(in, token, ',')) {
    // trim surrounding whitespace
    const auto first = token.find_first_not_of(" \t");
    const auto last = token.find_last_not_of(" \t");
    if (first == std::string::npos) throw DataError("empty relation name in meta-path");
    token = token.substr(first, last - first + 1);
    const auto r = g.find_relation(token);
    if (!r) throw DataError("unknown relation in meta-path: " + token);
    mp.relations.push_back(*r);
  }
  if (mp.relations.empty() && !text.empty()) {
    throw DataError("could not parse meta-path: " + std::string(text));
  }
  return mp;
}

}  // namespace mps
