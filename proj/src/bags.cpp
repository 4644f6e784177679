#include "mps/bags.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "mps/errors.hpp"

namespace mps {

BagSets make_singleton_bags(std::span<const NodeId> targets,
                            std::span<const int> labels) {
  if (targets.size() != labels.size()) {
    throw DataError("make_singleton_bags: targets/labels size mismatch");
  }
  BagSets bags;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    Bag bag{{targets[i]}, {1.0}};
    if (labels[i]) {
      bags.positives.push_back(std::move(bag));
    } else {
      bags.negatives.push_back(std::move(bag));
    }
  }
  if (bags.positives.empty() || bags.negatives.empty()) {
    throw DataError("make_singleton_bags: need at least one target per class");
  }
  bags.iteration = 0;
  return bags;
}

namespace {

std::vector<Bag> propagate_side(const HeteroGraph& g, const std::vector<Bag>& side,
                                RelationId r, std::span<const double> theta) {
  std::vector<Bag> out;
  std::map<NodeId, double> acc;
  for (const Bag& bag : side) {
    acc.clear();
    for (std::size_t i = 0; i < bag.members.size(); ++i) {
      const NodeId v = bag.members[i];
      const auto x = g.features(v);
      double proj = 0.0;
      for (std::size_t d = 0; d < x.size(); ++d) proj += theta[d] * x[d];
      const double contribution = proj * bag.weights[i];
      for (const NodeId u : g.neighbors(v, r)) acc[u] += contribution;
    }
    if (acc.empty()) continue;  // every member was an r-dead-end
    Bag next;
    next.members.reserve(acc.size());
    next.weights.reserve(acc.size());
    for (const auto& [u, alpha] : acc) {
      next.members.push_back(u);
      next.weights.push_back(alpha);
    }
    out.push_back(std::move(next));
  }
  return out;
}

}  // namespace

BagSets propagate_bags(const HeteroGraph& g, const BagSets& bags, RelationId r,
                       std::span<const double> theta) {
  if (theta.size() != g.feature_dim()) {
    throw DataError("propagate_bags: theta dimension mismatch");
  }
  BagSets next;
  next.positives = propagate_side(g, bags.positives, r, theta);
  next.negatives = propagate_side(g, bags.negatives, r, theta);
  next.iteration = bags.iteration + 1;
  if (next.positives.empty() || next.negatives.empty()) {
    throw DataError("propagate_bags: relation '" + g.relation_name(r) +
                    "' is a dead end (a class lost all of its bags)");
  }
  return next;
}

}  // namespace mps
