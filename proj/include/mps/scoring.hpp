#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "mps/bags.hpp"
#include "mps/graph.hpp"

namespace mps {

// Numerically stable logistic function.
inline double logistic(double z) {
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// How the per-neighbor weights of Eq-style node features combine:
//   Sum - weighted count of relevant successors (the method under study)
//   Max - existence of one relevant successor (comparison mode only; this is
//         what the max-aggregation baseline model uses)
enum class Aggregation { kSum, kMax };

// Trainable parameters of one relation-scoring run. theta lives in the
// graph's feature space; the frontier weights w_u = logistic(w_logits[i])
// are kept in [0,1] by construction and indexed by the sorted universe of
// r-successors of the current bag members.
struct ScoringParams {
  std::vector<double> theta;
  std::vector<NodeId> frontier;   // sorted, unique
  std::vector<double> w_logits;   // parallel to frontier

  double weight_of(NodeId u) const;             // logistic(logit), throws if absent
  std::size_t frontier_index(NodeId u) const;   // throws if absent
};

// Universe of r-successors of all bag members (both classes), sorted.
std::vector<NodeId> frontier_universe(const HeteroGraph& g, const BagSets& bags,
                                      RelationId r);

// Node feature under relation r:
//   f(v) = theta . x_v                         if v has no r-successors
//   f(v) = (theta . x_v) * agg_u w_u           otherwise
// where agg is the sum (default) or max over r-successors u of v.
double node_feature(const HeteroGraph& g, NodeId v, RelationId r,
                    const ScoringParams& params,
                    Aggregation agg = Aggregation::kSum);

// Bag discriminant F(B) = sum_v alpha(v, B) * f(v).
double discriminant(const HeteroGraph& g, const Bag& bag, RelationId r,
                    const ScoringParams& params,
                    Aggregation agg = Aggregation::kSum);

// Mean over all (positive, negative) bag pairs of logistic(F(neg) - F(pos)).
// Ranges over the exhaustive pair grid; the optimizer below works on sampled
// subsets internally.
double pairwise_loss(const HeteroGraph& g, const BagSets& bags, RelationId r,
                     const ScoringParams& params,
                     Aggregation agg = Aggregation::kSum);

// Exhaustive pairwise loss plus its analytic gradient, evaluated with the
// same forward/backward passes the optimizer runs. params.frontier must be
// frontier_universe(g, bags, r). Exposed so the gradients can be checked
// against finite differences.
struct LossGradient {
  double loss = 0.0;
  std::vector<double> d_theta;
  std::vector<double> d_logits;
};

LossGradient pairwise_loss_gradient(const HeteroGraph& g, const BagSets& bags,
                                    RelationId r, const ScoringParams& params,
                                    Aggregation agg = Aggregation::kSum);

struct ScoreOptions {
  int iterations = 300;
  double step = 0.05;           // Adam step size
  int restarts = 3;             // independent seeded restarts, best kept
  std::size_t max_pairs = 500;  // per-iteration pair sample cap
  int baseline_draws = 5;       // random draws defining the untrained baseline
  double theta_init_range = 0.1;
  std::uint64_t seed = 0;
  Aggregation aggregation = Aggregation::kSum;
};

// Result of optimizing Eq-style pairwise loss for one relation. loss is the
// best batch loss seen across restarts; baseline is the mean loss of
// baseline_draws random parameter draws (~0.5 on any non-degenerate data).
// A relation is worth extending with only when loss < eta * baseline.
struct ScoredRelation {
  RelationId relation = 0;
  double loss = 1.0;
  double baseline = 0.5;
  ScoringParams params;

  bool passes(double eta) const { return loss < eta * baseline; }
};

double baseline_loss(const HeteroGraph& g, const BagSets& bags, RelationId r,
                     const ScoreOptions& opts);

// min_{theta, w} pairwise loss for relation r over the given bags, by Adam
// with seeded restarts and per-iteration pair resampling. Deterministic for
// a fixed seed. Throws NumericalError if the loss ever goes non-finite.
ScoredRelation score_relation(const HeteroGraph& g, const BagSets& bags,
                              RelationId r, const ScoreOptions& opts);

}  // namespace mps
