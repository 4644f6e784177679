#pragma once

// Deliberately naive reference implementations used to cross-check the
// optimized library code. Each oracle recomputes its quantity from the bare
// definition through a different algorithm and data layout than the library
// uses, so shared-bug overlap is minimal. Keep these slow and obvious.

#include <Eigen/Dense>
#include <algorithm>
#include <map>
#include <set>
#include <vector>

#include "mps/bags.hpp"
#include "mps/graph.hpp"
#include "mps/model.hpp"
#include "mps/scoring.hpp"

namespace mps::testing {

// Every walk v_0 -r_1-> ... -r_L-> v_L from start, fully materialized by
// depth-first enumeration (each walk is L+1 node ids, start included).
inline void collect_walks(const HeteroGraph& g, const MetaPath& mp,
                          std::size_t depth, std::vector<NodeId>& walk,
                          std::vector<std::vector<NodeId>>& out) {
  if (depth == mp.length()) {
    out.push_back(walk);
    return;
  }
  for (NodeId u : g.neighbors(walk.back(), mp.relations[depth])) {
    walk.push_back(u);
    collect_walks(g, mp, depth + 1, walk, out);
    walk.pop_back();
  }
}

inline std::vector<std::vector<NodeId>> oracle_walks(const HeteroGraph& g,
                                                     NodeId start,
                                                     const MetaPath& mp) {
  std::vector<std::vector<NodeId>> out;
  std::vector<NodeId> walk{start};
  collect_walks(g, mp, 0, walk, out);
  return out;
}

inline std::uint64_t oracle_count_occurrences(const HeteroGraph& g,
                                              NodeId start,
                                              const MetaPath& mp) {
  return oracle_walks(g, start, mp).size();
}

// Explanation subgraph assembled walk by walk from the DFS enumeration.
inline OccurrenceSubgraph oracle_induced_subgraph(
    const HeteroGraph& g, const std::vector<NodeId>& targets,
    const std::vector<MetaPath>& mps) {
  std::set<NodeId> nodes(targets.begin(), targets.end());
  std::set<Edge> edges;
  for (NodeId t : targets) {
    for (const MetaPath& mp : mps) {
      for (const auto& walk : oracle_walks(g, t, mp)) {
        for (std::size_t j = 0; j < walk.size(); ++j) {
          nodes.insert(walk[j]);
          if (j > 0) edges.insert({walk[j - 1], mp.relations[j - 1], walk[j]});
        }
      }
    }
  }
  OccurrenceSubgraph out;
  out.nodes.assign(nodes.begin(), nodes.end());
  out.edges.assign(edges.begin(), edges.end());
  return out;
}

// Bag propagation recomputed as a flat list of (successor, contribution)
// pairs that is sorted and run-length summed, instead of the library's map
// accumulator. Dead ends are reported by emptying the side.
inline std::vector<Bag> oracle_propagate_side(const HeteroGraph& g,
                                              const std::vector<Bag>& side,
                                              RelationId r,
                                              const std::vector<double>& theta) {
  std::vector<Bag> out;
  for (const Bag& bag : side) {
    std::vector<std::pair<NodeId, double>> contribs;
    for (std::size_t i = 0; i < bag.members.size(); ++i) {
      const NodeId v = bag.members[i];
      const auto x = g.features(v);
      double t = 0.0;
      for (std::size_t d = 0; d < theta.size(); ++d) t += theta[d] * x[d];
      for (NodeId u : g.neighbors(v, r)) {
        contribs.emplace_back(u, t * bag.weights[i]);
      }
    }
    if (contribs.empty()) continue;
    std::sort(contribs.begin(), contribs.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    Bag next;
    for (const auto& [u, c] : contribs) {
      if (!next.members.empty() && next.members.back() == u) {
        next.weights.back() += c;
      } else {
        next.members.push_back(u);
        next.weights.push_back(c);
      }
    }
    out.push_back(std::move(next));
  }
  return out;
}

// Pairwise loss recomputed from first principles with no shared helpers:
// node features, discriminants and the pair grid are all inlined.
inline double oracle_pairwise_loss(const HeteroGraph& g, const BagSets& bags,
                                   RelationId r, const ScoringParams& params,
                                   bool use_max = false) {
  std::map<NodeId, double> weight;
  for (std::size_t i = 0; i < params.frontier.size(); ++i) {
    const double z = params.w_logits[i];
    weight[params.frontier[i]] = 1.0 / (1.0 + std::exp(-z));
  }
  auto bag_value = [&](const Bag& bag) {
    double f = 0.0;
    for (std::size_t i = 0; i < bag.members.size(); ++i) {
      const NodeId v = bag.members[i];
      const auto x = g.features(v);
      double t = 0.0;
      for (std::size_t d = 0; d < params.theta.size(); ++d) {
        t += params.theta[d] * x[d];
      }
      const auto succ = g.neighbors(v, r);
      double agg = succ.empty() ? 1.0 : 0.0;
      for (NodeId u : succ) {
        agg = use_max ? std::max(agg, weight.at(u)) : agg + weight.at(u);
      }
      f += bag.weights[i] * t * agg;
    }
    return f;
  };
  double total = 0.0;
  for (const Bag& neg : bags.negatives) {
    for (const Bag& pos : bags.positives) {
      total += 1.0 / (1.0 + std::exp(bag_value(pos) - bag_value(neg)));
    }
  }
  return total / (static_cast<double>(bags.positives.size()) *
                  static_cast<double>(bags.negatives.size()));
}

// Reference forward pass of the meta-path classifier: plain per-node
// recursion over the layer definition, no computation plans, no batching.
// `level` counts applied layers; level 0 is the raw feature vector. The
// node v is interpreted at meta-path position L - level.
inline Eigen::VectorXd oracle_path_embedding(
    const HeteroGraph& g, const MetaPathLayers& layers, const MetaPath& mp,
    const MpsGnnModel::PathWeights& pw, bool use_skip, std::size_t level,
    NodeId v) {
  const auto x = g.features(v);
  const Eigen::Map<const Eigen::VectorXd> xv(x.data(), x.size());
  if (level == 0) return xv;

  const std::size_t l = level - 1;        // transition producing this level
  const std::size_t j = mp.length() - l;  // meta-path position consumed
  const Eigen::VectorXd self =
      oracle_path_embedding(g, layers, mp, pw, use_skip, level - 1, v);
  Eigen::VectorXd agg = Eigen::VectorXd::Zero(self.size());
  if (layers.forward[j - 1][v]) {
    for (NodeId u : g.neighbors(v, mp.relations[j - 1])) {
      if (layers.completable[j][u]) {
        agg += oracle_path_embedding(g, layers, mp, pw, use_skip, level - 1, u);
      }
    }
  }
  Eigen::VectorXd z = pw.w_self[l] * self + pw.w_neigh[l] * agg;
  if (use_skip) z += pw.w_skip[l] * xv;
  return z.unaryExpr([](double t) { return logistic(t); });
}

// Class-1 probability of one target, recomputed through the recursion above.
inline double oracle_probability(const MpsGnnModel& model, const HeteroGraph& g,
                                 const std::vector<NodeId>& mask_targets,
                                 NodeId v) {
  Eigen::VectorXd concat;
  if (model.paths().empty()) {
    const auto x = g.features(v);
    concat = Eigen::Map<const Eigen::VectorXd>(x.data(), x.size());
  } else {
    concat.resize(static_cast<Eigen::Index>(model.paths().size()) *
                  model.embedding_dim());
    for (std::size_t m = 0; m < model.paths().size(); ++m) {
      const MetaPath& mp = model.paths()[m];
      const MetaPathLayers layers = metapath_layers(g, mask_targets, mp);
      concat.segment(static_cast<Eigen::Index>(m) * model.embedding_dim(),
                     model.embedding_dim()) =
          oracle_path_embedding(g, layers, mp, model.path_weights()[m],
                                model.use_skip(), mp.length(), v);
    }
  }
  const Eigen::VectorXd z = model.readout() * concat + model.readout_bias();
  return 1.0 / (1.0 + std::exp(z(0) - z(1)));
}

}  // namespace mps::testing
