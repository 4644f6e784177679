#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mps/graph.hpp"

namespace mps {

// Parameters for a count-based synthetic node-classification scenario.
//
// The generator plants a ground-truth meta-path r1 -> ... -> rl and labels a
// target node positive iff it is the starting point of at least `threshold`
// complete occurrences of that path.  Negatives receive threshold-1 complete
// occurrences plus truncated decoy chains, so existence of an occurrence never
// separates the classes; only the count does.  Chain bundles are drawn from
// shared pools, and every target additionally receives a fixed allotment of
// chains dying at each intermediate depth, so reaching any proper prefix of
// the true path proves nothing — the signal appears only at the full length.
struct ScenarioSpec {
  std::uint32_t num_relations = 5;  // total relations, true path included
  std::uint32_t threshold = 2;      // c: positive iff count >= c
  std::uint32_t path_length = 2;    // l: length of the planted meta-path
  std::uint32_t num_targets = 2000;
  double positive_fraction = 0.3;
  // Mean number of edges per target per distractor relation (0 disables
  // distractor wiring; the relations still exist, unused).
  std::uint32_t distractor_degree = 2;
  // When set, occurrence validity depends on node features, not just
  // topology: a walk counts only if both its start target and its terminal
  // carry a validity attribute above the cutoff. The attribute is the first
  // "noise" column, uniform on every other node, so the rule cannot be read
  // off a dedicated indicator. Every target receives `threshold` extra
  // complete-looking chains into below-cutoff terminals, and half the
  // negatives are below-cutoff targets wired exactly like positives, so
  // neither raw walk counts nor target features alone separate the classes.
  bool feature_constrained = false;
  std::uint64_t seed = 0;
};

// Canonical presets s1..s8: (|R|, c, l) =
//   s1(5,2,2)  s2(5,2,3)  s3(5,3,3)  s4(5,4,2)
//   s5(10,2,2) s6(10,2,3) s7(10,3,3) s8(10,4,2)
// all at 2000 targets, 30% positive.  Unknown names raise UsageError.
ScenarioSpec scenario_preset(std::string_view name);
std::vector<std::string> scenario_preset_names();

// Ground-truth explanation for one positive target: the edges of all complete
// occurrences of the true meta-path rooted at it (sorted, deduplicated).
struct TargetExplanation {
  NodeId target = 0;
  std::vector<Edge> edges;

  bool operator==(const TargetExplanation&) const = default;
};

struct ScenarioGroundTruth {
  MetaPath path;                 // the planted meta-path (relation ids)
  std::uint32_t threshold = 0;   // labeling count threshold c
  // Feature column holding the occurrence-validity attribute (valid iff
  // value > 0.5), or -1 when the scenario is not feature-constrained.
  int feature_marker = -1;
  // Label-relevant count per target: walks following `path` from a licensed
  // start to a licensed terminal (all walks when unconstrained); 0 for
  // targets whose validity attribute sits below the cutoff.
  std::vector<std::uint64_t> counts;
  std::vector<TargetExplanation> explanations;  // positives, ascending id
};

struct ScenarioData {
  ScenarioSpec spec;
  HeteroGraph graph;
  std::vector<NodeId> targets;
  std::vector<int> labels;  // 0/1, aligned with targets
  ScenarioGroundTruth truth;
};

// Builds a scenario.  Deterministic for a fixed spec (including seed).
// Invalid specs (threshold 0, path longer than the relation budget, a class
// left empty by the positive fraction, ...) raise UsageError.  The generator
// re-counts occurrences after all wiring and raises DataError if any label
// disagrees with its count (structurally unreachable; kept as a hard audit).
ScenarioData generate_scenario(const ScenarioSpec& spec);

// Hand-built miniature: grey targets linked by relation "r" to orange nodes,
// each orange linked by "s" to green nodes; threshold c=3.  Walks multiply
// through shared orange nodes, and exactly the grey nodes with at least three
// r->s walks are positive (counts 3,1,3,2 over the four targets).
ScenarioData miniature_scenario();

// Fixture with one planted two-step path [r1, r2] (threshold 2) plus direct
// target-level r2 edges whose degree is only imperfectly correlated with the
// label.  A one-hop model scores best on [r2], but [r2] cannot be extended,
// while the relation scoring ranks r1 first and reaches the far stronger
// [r1, r2].  Exercises the lookahead property of bag-based scoring.
ScenarioData lookahead_scenario(std::uint64_t seed);

// Recounts occurrences (honouring the validity marker when present) and
// checks count-vs-label consistency plus manifest alignment; throws DataError
// on any mismatch.
void audit_scenario(const ScenarioData& data);

// JSON text with the true meta-path (relation names), threshold, per-target
// labels and counts, and per-positive explanation edge lists.
std::string ground_truth_manifest(const ScenarioData& data);

}  // namespace mps
