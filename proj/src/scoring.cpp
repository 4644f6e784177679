#include "mps/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>

#include "mps/errors.hpp"
#include "mps/rng.hpp"

namespace mps {

namespace {

double dot_feature(const HeteroGraph& g, NodeId v,
                   const std::vector<double>& theta) {
  const auto x = g.features(v);
  double acc = 0.0;
  for (std::size_t d = 0; d < theta.size(); ++d) acc += theta[d] * x[d];
  return acc;
}

// Bags flattened into contiguous member/alpha arrays so the optimizer's inner
// passes touch memory linearly. half() splits the ranges back into the
// positive block [0, num_pos) and negative block [num_pos, num_bags).
struct FlatBags {
  struct Range {
    std::size_t begin = 0;
    std::size_t end = 0;
  };

  std::vector<Range> bags;  // positives first, then negatives
  std::size_t num_pos = 0;
  std::vector<NodeId> members;
  std::vector<double> alphas;

  std::size_t num_neg() const { return bags.size() - num_pos; }
};

FlatBags flatten(const BagSets& bags) {
  FlatBags flat;
  flat.num_pos = bags.positives.size();
  auto absorb = [&](const std::vector<Bag>& side) {
    for (const Bag& bag : side) {
      FlatBags::Range range;
      range.begin = flat.members.size();
      flat.members.insert(flat.members.end(), bag.members.begin(),
                          bag.members.end());
      flat.alphas.insert(flat.alphas.end(), bag.weights.begin(),
                         bag.weights.end());
      range.end = flat.members.size();
      flat.bags.push_back(range);
    }
  };
  absorb(bags.positives);
  absorb(bags.negatives);
  return flat;
}

// Everything one optimization restart reads or writes, preallocated once.
struct Workspace {
  std::vector<std::int32_t> frontier_of_node;  // node id -> frontier index, -1 if absent

  // Current parameters, flattened as [theta | w_logits].
  std::vector<double> params;
  // Adam moment estimates over params.
  std::vector<double> m;
  std::vector<double> v;
  std::vector<double> grad;

  // Per-frontier-entry weights and their logit derivatives, refreshed each
  // iteration from the current logits.
  std::vector<double> w;
  std::vector<double> dw;

  // Per-member caches from the forward pass: theta . x_v, the aggregated
  // successor weight, and (max mode only) the frontier index the max came
  // from (-1 when the member has no successors).
  std::vector<double> tv;
  std::vector<double> sv;
  std::vector<std::int32_t> amax;

  std::vector<double> bag_f;     // discriminants, positives then negatives
  std::vector<double> bag_c;     // d(batch loss)/dF per bag
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
};

// Computes w/dw, per-member caches and per-bag discriminants at the current
// parameters.
void forward_pass(const HeteroGraph& g, const FlatBags& flat, RelationId r,
                  std::size_t dim, Aggregation agg, Workspace& ws) {
  const std::size_t fsize = ws.w.size();
  for (std::size_t i = 0; i < fsize; ++i) {
    const double wi = logistic(ws.params[dim + i]);
    ws.w[i] = wi;
    ws.dw[i] = wi * (1.0 - wi);
  }
  for (std::size_t b = 0; b < flat.bags.size(); ++b) {
    const auto range = flat.bags[b];
    double f = 0.0;
    for (std::size_t mi = range.begin; mi < range.end; ++mi) {
      const NodeId v = flat.members[mi];
      const auto x = g.features(v);
      double t = 0.0;
      for (std::size_t d = 0; d < dim; ++d) t += ws.params[d] * x[d];
      ws.tv[mi] = t;

      const auto succ = g.neighbors(v, r);
      double term;
      if (succ.empty()) {
        ws.amax[mi] = -1;
        ws.sv[mi] = 0.0;
        term = t;
      } else if (agg == Aggregation::kSum) {
        double s = 0.0;
        for (NodeId u : succ) s += ws.w[ws.frontier_of_node[u]];
        ws.sv[mi] = s;
        ws.amax[mi] = 0;  // unused in sum mode; non-negative marks "has successors"
        term = t * s;
      } else {
        // Successors are sorted ascending, so scanning with a strict > keeps
        // the lowest node id on ties -- the deterministic subgradient choice.
        double best = -1.0;
        std::int32_t best_idx = -1;
        for (NodeId u : succ) {
          const std::int32_t idx = ws.frontier_of_node[u];
          if (ws.w[idx] > best) {
            best = ws.w[idx];
            best_idx = idx;
          }
        }
        ws.sv[mi] = best;
        ws.amax[mi] = best_idx;
        term = t * best;
      }
      f += flat.alphas[mi] * term;
    }
    ws.bag_f[b] = f;
  }
}

// Accumulates the batch loss and d(loss)/dF coefficients over either the
// exhaustive pair grid or the sampled pair list.
double pair_pass(const FlatBags& flat, bool exhaustive, Workspace& ws) {
  std::fill(ws.bag_c.begin(), ws.bag_c.end(), 0.0);
  const std::size_t npos = flat.num_pos;
  const std::size_t nneg = flat.num_neg();
  double loss = 0.0;
  if (exhaustive) {
    const double inv = 1.0 / (static_cast<double>(npos) * static_cast<double>(nneg));
    for (std::size_t j = 0; j < nneg; ++j) {
      const double fn = ws.bag_f[npos + j];
      for (std::size_t i = 0; i < npos; ++i) {
        const double s = logistic(fn - ws.bag_f[i]);
        loss += s * inv;
        const double delta = s * (1.0 - s) * inv;
        ws.bag_c[npos + j] += delta;
        ws.bag_c[i] -= delta;
      }
    }
  } else {
    const double inv = 1.0 / static_cast<double>(ws.pairs.size());
    for (const auto& [i, j] : ws.pairs) {
      const double s = logistic(ws.bag_f[npos + j] - ws.bag_f[i]);
      loss += s * inv;
      const double delta = s * (1.0 - s) * inv;
      ws.bag_c[npos + j] += delta;
      ws.bag_c[i] -= delta;
    }
  }
  return loss;
}

// Backpropagates the bag coefficients into theta and logit gradients using
// the forward-pass caches.
void gradient_pass(const HeteroGraph& g, const FlatBags& flat, RelationId r,
                   std::size_t dim, Aggregation agg, Workspace& ws) {
  std::fill(ws.grad.begin(), ws.grad.end(), 0.0);
  for (std::size_t b = 0; b < flat.bags.size(); ++b) {
    const double c = ws.bag_c[b];
    if (c == 0.0) continue;
    const auto range = flat.bags[b];
    for (std::size_t mi = range.begin; mi < range.end; ++mi) {
      const double cell = c * flat.alphas[mi];
      const NodeId v = flat.members[mi];
      const bool has_succ = ws.amax[mi] >= 0;
      const double factor = has_succ ? ws.sv[mi] : 1.0;
      const auto x = g.features(v);
      for (std::size_t d = 0; d < dim; ++d) ws.grad[d] += cell * factor * x[d];
      if (!has_succ) continue;
      const double ct = cell * ws.tv[mi];
      if (agg == Aggregation::kSum) {
        for (NodeId u : g.neighbors(v, r)) {
          const std::int32_t idx = ws.frontier_of_node[u];
          ws.grad[dim + idx] += ct * ws.dw[idx];
        }
      } else {
        const std::int32_t idx = ws.amax[mi];
        ws.grad[dim + idx] += ct * ws.dw[idx];
      }
    }
  }
}

}  // namespace

double ScoringParams::weight_of(NodeId u) const {
  return logistic(w_logits[frontier_index(u)]);
}

std::size_t ScoringParams::frontier_index(NodeId u) const {
  const auto it = std::lower_bound(frontier.begin(), frontier.end(), u);
  if (it == frontier.end() || *it != u) {
    throw DataError("node " + std::to_string(u) +
                    " is not on the scoring frontier");
  }
  return static_cast<std::size_t>(it - frontier.begin());
}

std::vector<NodeId> frontier_universe(const HeteroGraph& g, const BagSets& bags,
                                      RelationId r) {
  std::vector<NodeId> out;
  auto absorb = [&](const std::vector<Bag>& side) {
    for (const Bag& bag : side) {
      for (NodeId v : bag.members) {
        const auto succ = g.neighbors(v, r);
        out.insert(out.end(), succ.begin(), succ.end());
      }
    }
  };
  absorb(bags.positives);
  absorb(bags.negatives);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double node_feature(const HeteroGraph& g, NodeId v, RelationId r,
                    const ScoringParams& params, Aggregation agg) {
  const double t = dot_feature(g, v, params.theta);
  const auto succ = g.neighbors(v, r);
  if (succ.empty()) return t;
  if (agg == Aggregation::kSum) {
    double s = 0.0;
    for (NodeId u : succ) s += params.weight_of(u);
    return t * s;
  }
  double best = 0.0;  // weights are strictly positive, so 0 is a safe floor
  for (NodeId u : succ) best = std::max(best, params.weight_of(u));
  return t * best;
}

double discriminant(const HeteroGraph& g, const Bag& bag, RelationId r,
                    const ScoringParams& params, Aggregation agg) {
  double acc = 0.0;
  for (std::size_t i = 0; i < bag.members.size(); ++i) {
    acc += bag.weights[i] * node_feature(g, bag.members[i], r, params, agg);
  }
  return acc;
}

double pairwise_loss(const HeteroGraph& g, const BagSets& bags, RelationId r,
                     const ScoringParams& params, Aggregation agg) {
  if (bags.positives.empty() || bags.negatives.empty()) {
    throw DataError("pairwise loss needs at least one bag of each class");
  }
  std::vector<double> fp, fn;
  fp.reserve(bags.positives.size());
  fn.reserve(bags.negatives.size());
  for (const Bag& b : bags.positives)
    fp.push_back(discriminant(g, b, r, params, agg));
  for (const Bag& b : bags.negatives)
    fn.push_back(discriminant(g, b, r, params, agg));
  double acc = 0.0;
  for (double n : fn)
    for (double p : fp) acc += logistic(n - p);
  return acc / (static_cast<double>(fp.size()) * static_cast<double>(fn.size()));
}

LossGradient pairwise_loss_gradient(const HeteroGraph& g, const BagSets& bags,
                                    RelationId r, const ScoringParams& params,
                                    Aggregation agg) {
  if (bags.positives.empty() || bags.negatives.empty()) {
    throw DataError("pairwise loss needs at least one bag of each class");
  }
  const std::size_t dim = g.feature_dim();
  const FlatBags flat = flatten(bags);
  const std::size_t fsize = params.frontier.size();

  Workspace ws;
  ws.frontier_of_node.assign(g.num_nodes(), -1);
  for (std::size_t i = 0; i < fsize; ++i) {
    ws.frontier_of_node[params.frontier[i]] = static_cast<std::int32_t>(i);
  }
  ws.params.reserve(dim + fsize);
  ws.params.assign(params.theta.begin(), params.theta.end());
  ws.params.insert(ws.params.end(), params.w_logits.begin(),
                   params.w_logits.end());
  ws.grad.resize(dim + fsize);
  ws.w.resize(fsize);
  ws.dw.resize(fsize);
  ws.tv.resize(flat.members.size());
  ws.sv.resize(flat.members.size());
  ws.amax.resize(flat.members.size());
  ws.bag_f.resize(flat.bags.size());
  ws.bag_c.resize(flat.bags.size());

  forward_pass(g, flat, r, dim, agg, ws);
  LossGradient out;
  out.loss = pair_pass(flat, /*exhaustive=*/true, ws);
  gradient_pass(g, flat, r, dim, agg, ws);
  out.d_theta.assign(ws.grad.begin(),
                     ws.grad.begin() + static_cast<std::ptrdiff_t>(dim));
  out.d_logits.assign(ws.grad.begin() + static_cast<std::ptrdiff_t>(dim),
                      ws.grad.end());
  return out;
}

double baseline_loss(const HeteroGraph& g, const BagSets& bags, RelationId r,
                     const ScoreOptions& opts) {
  ScoringParams params;
  params.frontier = frontier_universe(g, bags, r);
  params.theta.resize(g.feature_dim());
  params.w_logits.resize(params.frontier.size());
  double acc = 0.0;
  for (int draw = 0; draw < opts.baseline_draws; ++draw) {
    Rng rng(derive_seed(opts.seed, hash_bytes("baseline"),
                        static_cast<std::uint64_t>(draw)));
    for (double& t : params.theta)
      t = rng.uniform(-opts.theta_init_range, opts.theta_init_range);
    for (double& l : params.w_logits) l = rng.uniform(-1.0, 1.0);
    acc += pairwise_loss(g, bags, r, params, opts.aggregation);
  }
  return acc / static_cast<double>(opts.baseline_draws);
}

ScoredRelation score_relation(const HeteroGraph& g, const BagSets& bags,
                              RelationId r, const ScoreOptions& opts) {
  if (bags.positives.empty() || bags.negatives.empty()) {
    throw DataError("relation scoring needs at least one bag of each class");
  }
  const std::size_t dim = g.feature_dim();
  const FlatBags flat = flatten(bags);
  const std::vector<NodeId> frontier = frontier_universe(g, bags, r);
  const std::size_t fsize = frontier.size();
  const std::size_t nparams = dim + fsize;

  Workspace ws;
  ws.frontier_of_node.assign(g.num_nodes(), -1);
  for (std::size_t i = 0; i < fsize; ++i) {
    ws.frontier_of_node[frontier[i]] = static_cast<std::int32_t>(i);
  }
  ws.params.resize(nparams);
  ws.m.resize(nparams);
  ws.v.resize(nparams);
  ws.grad.resize(nparams);
  ws.w.resize(fsize);
  ws.dw.resize(fsize);
  ws.tv.resize(flat.members.size());
  ws.sv.resize(flat.members.size());
  ws.amax.resize(flat.members.size());
  ws.bag_f.resize(flat.bags.size());
  ws.bag_c.resize(flat.bags.size());

  const std::size_t npos = flat.num_pos;
  const std::size_t nneg = flat.num_neg();
  const bool exhaustive = npos * nneg <= opts.max_pairs;

  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;

  double best_loss = std::numeric_limits<double>::infinity();
  std::vector<double> best_params;

  for (int restart = 0; restart < opts.restarts; ++restart) {
    Rng rng(derive_seed(opts.seed, hash_bytes("restart"),
                        static_cast<std::uint64_t>(restart)));
    for (std::size_t d = 0; d < dim; ++d) {
      ws.params[d] = rng.uniform(-opts.theta_init_range, opts.theta_init_range);
    }
    // Logits start at 0 so every frontier weight starts at 1/2.
    std::fill(ws.params.begin() + static_cast<std::ptrdiff_t>(dim),
              ws.params.end(), 0.0);
    std::fill(ws.m.begin(), ws.m.end(), 0.0);
    std::fill(ws.v.begin(), ws.v.end(), 0.0);

    auto draw_pairs = [&] {
      if (exhaustive) return;
      ws.pairs.resize(opts.max_pairs);
      for (auto& [i, j] : ws.pairs) {
        i = static_cast<std::uint32_t>(rng.below(npos));
        j = static_cast<std::uint32_t>(rng.below(nneg));
      }
    };

    auto consider_best = [&](double loss) {
      if (!std::isfinite(loss)) {
        throw NumericalError("pairwise loss diverged while scoring relation '" +
                             g.relation_name(r) + "'");
      }
      if (loss < best_loss) {
        best_loss = loss;
        best_params = ws.params;
      }
    };

    for (int iter = 0; iter < opts.iterations; ++iter) {
      draw_pairs();
      forward_pass(g, flat, r, dim, opts.aggregation, ws);
      consider_best(pair_pass(flat, exhaustive, ws));
      gradient_pass(g, flat, r, dim, opts.aggregation, ws);

      const double t = static_cast<double>(iter + 1);
      const double corr1 = 1.0 - std::pow(kBeta1, t);
      const double corr2 = 1.0 - std::pow(kBeta2, t);
      for (std::size_t p = 0; p < nparams; ++p) {
        ws.m[p] = kBeta1 * ws.m[p] + (1.0 - kBeta1) * ws.grad[p];
        ws.v[p] = kBeta2 * ws.v[p] + (1.0 - kBeta2) * ws.grad[p] * ws.grad[p];
        ws.params[p] -= opts.step * (ws.m[p] / corr1) /
                        (std::sqrt(ws.v[p] / corr2) + kEps);
      }
    }

    // The final update is otherwise unevaluated; give it one chance too.
    draw_pairs();
    forward_pass(g, flat, r, dim, opts.aggregation, ws);
    consider_best(pair_pass(flat, exhaustive, ws));
  }

  ScoredRelation result;
  result.relation = r;
  result.loss = best_loss;
  result.baseline = baseline_loss(g, bags, r, opts);
  result.params.theta.assign(best_params.begin(),
                             best_params.begin() + static_cast<std::ptrdiff_t>(dim));
  result.params.frontier = frontier;
  result.params.w_logits.assign(best_params.begin() + static_cast<std::ptrdiff_t>(dim),
                                best_params.end());
  return result;
}

}  // namespace mps
