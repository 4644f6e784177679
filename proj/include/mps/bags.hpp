#pragma once

#include <span>
#include <vector>

#include "mps/graph.hpp"

namespace mps {

// A weighted bag of nodes. Weights are the alpha values of the discriminant
// F(B) = sum_v alpha(v, B) * f(v); they start at 1 for singleton bags and are
// rewritten on every propagation step, so after the first hop they can take
// any real value (negative included).
struct Bag {
  std::vector<NodeId> members;   // sorted, unique
  std::vector<double> weights;   // parallel to members
};

// The positive/negative bag populations one scoring iteration works on.
// iteration counts how many propagation steps produced them (0 = the
// singleton bags over the labeled targets).
struct BagSets {
  std::vector<Bag> positives;
  std::vector<Bag> negatives;
  int iteration = 0;
};

// One singleton bag per labeled target with weight 1. labels holds 0/1
// parallel to targets. Throws DataError when either class is absent.
BagSets make_singleton_bags(std::span<const NodeId> targets,
                            std::span<const int> labels);

// Bag propagation along relation r:
//   B_new           = union of r-successors of B's members
//   alpha(u, B_new) = sum over members v of B with u in N_r(v) of
//                     (theta . x_v) * alpha(v, B)
// theta is the parameter vector optimized when r was scored. Bags whose
// members have no r-successors vanish; if either class loses all of its
// bags the relation is a dead end and a DataError is thrown.
BagSets propagate_bags(const HeteroGraph& g, const BagSets& bags, RelationId r,
                       std::span<const double> theta);

}  // namespace mps
