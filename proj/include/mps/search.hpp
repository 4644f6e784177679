#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mps/graph.hpp"
#include "mps/model.hpp"
#include "mps/scoring.hpp"

namespace mps {

// Reduced training budget used to rank candidate prefixes during the search.
// The full default budget is reserved for the final model trained on the
// returned meta-paths.
TrainConfig search_eval_config();

struct SearchConfig {
  int max_length = 4;   // longest meta-path the search may build
  int beam_width = 3;   // live prefixes kept per iteration
  double eta = 0.7;     // a relation must beat eta * its untrained baseline
  int threads = 1;      // parallel relation scoring within one iteration
  std::uint64_t seed = 0;

  // Pass-through for the relation-scoring optimizer. Its seed field is
  // ignored: every candidate gets a seed derived from (seed, prefix,
  // relation), so results never depend on scheduling order.
  ScoreOptions scoring{};

  // Budget for the per-prefix ranking models; seeded per prefix the same way.
  TrainConfig evaluation = search_eval_config();
};

// One relation scored against one live prefix.
struct CandidateScore {
  RelationId relation = 0;
  double loss = 0.0;
  double baseline = 0.0;
  bool passed = false;  // loss < eta * baseline

  bool operator==(const CandidateScore&) const = default;
};

// Everything that happened to one live prefix during one iteration.
struct PrefixExpansion {
  MetaPath prefix;
  std::vector<CandidateScore> candidates;  // one per relation, ascending id
  bool stopped = false;                    // no candidate passed the guard

  bool operator==(const PrefixExpansion&) const = default;
};

// A prefix that won a beam slot: its scoring loss, the validation F1 of a
// reduced-budget model trained on it alone, and whether its bags could be
// carried forward (a class with no successors ends the prefix's growth).
struct SurvivorRecord {
  MetaPath path;
  double loss = 0.0;
  double val_f1 = 0.0;
  bool dead_end = false;

  bool operator==(const SurvivorRecord&) const = default;
};

struct SearchIteration {
  std::vector<PrefixExpansion> expansions;
  std::vector<SurvivorRecord> beam;  // new beam, best scoring loss first
  double best_f1 = 0.0;              // running best across the whole search

  bool operator==(const SearchIteration&) const = default;
};

struct SearchTrace {
  std::vector<SearchIteration> iterations;
  std::vector<SurvivorRecord> evaluated;  // every survivor, evaluation order
  std::size_t score_invocations = 0;      // <= beam_width * |R| * max_length
  MetaPath best_path;                     // empty when nothing ever passed
  double best_f1 = 0.0;

  bool operator==(const SearchTrace&) const = default;
};

struct SearchResult {
  // Up to beam_width meta-paths ranked by validation F1 (ties keep earlier
  // evaluation order, so paths[0] is always trace.best_path when non-empty).
  std::vector<MetaPath> paths;
  SearchTrace trace;
};

// Beam-searched construction of informative meta-paths. Starting from
// singleton bags over the labeled targets, each iteration scores every
// relation against every live prefix, drops prefixes where no relation
// beats eta times its untrained baseline, pools the passing extensions,
// and keeps the beam_width best by scoring loss. Each survivor is ranked
// by the validation F1 of a reduced-budget model trained on it, and its
// bags are pushed one hop along the chosen relation for the next round.
// Scoring-loss ties prefer the earlier prefix, then the lower relation id.
//
// The relation scorer looks at where the bags could still go, not at what a
// model earns today, so one cheap pass per relation replaces training a
// model per candidate; total scoring calls stay within
// beam_width * |R| * max_length.
//
// Returns an empty path list (with the trace) when no relation passes the
// guard on the first iteration. Throws UsageError on a malformed config and
// DataError when labels are missing a class.
SearchResult learn_metapaths(const HeteroGraph& g,
                             std::span<const NodeId> targets,
                             std::span<const int> labels,
                             const SearchConfig& cfg);

// The naive alternative the search is measured against: extend the path
// with whichever relation's one-step extension trains to the best
// validation F1 right now. Shares the running-best bookkeeping and the
// per-path evaluation seeds with learn_metapaths, so the two strategies
// differ only in how they pick the next relation.
struct GreedyCandidate {
  RelationId relation = 0;
  double val_f1 = 0.0;

  bool operator==(const GreedyCandidate&) const = default;
};

struct GreedyStep {
  MetaPath prefix;
  std::vector<GreedyCandidate> candidates;  // one per relation, ascending id
  RelationId chosen = 0;

  bool operator==(const GreedyStep&) const = default;
};

struct GreedyTrace {
  std::vector<GreedyStep> steps;
  MetaPath best_path;
  double best_f1 = 0.0;

  bool operator==(const GreedyTrace&) const = default;
};

struct GreedyResult {
  MetaPath path;  // running-best prefix by validation F1
  GreedyTrace trace;
};

GreedyResult greedy_by_f1_baseline(const HeteroGraph& g,
                                   std::span<const NodeId> targets,
                                   std::span<const int> labels,
                                   const SearchConfig& cfg);

// Report renderings (relation ids resolved to names through the graph).
std::string trace_json(const SearchTrace& trace, const HeteroGraph& g);
std::string trace_table(const SearchTrace& trace, const HeteroGraph& g);
std::string greedy_trace_json(const GreedyTrace& trace, const HeteroGraph& g);
std::string greedy_trace_table(const GreedyTrace& trace, const HeteroGraph& g);

}  // namespace mps
