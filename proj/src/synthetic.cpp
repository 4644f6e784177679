#include "mps/synthetic.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mps/errors.hpp"
#include "mps/rng.hpp"

namespace mps {
namespace {

constexpr std::size_t kNoiseAttrs = 4;
constexpr std::uint64_t kNoisePoolSize = 60;
// Feature-constrained mode hides the validity signal in the first noise
// attribute instead of a dedicated indicator column: on targets and
// terminals that attribute is drawn above or below this cutoff (with a
// margin), on every other node it is plain uniform noise. A model therefore
// has to learn a threshold on an attribute that is indistinguishable from
// noise almost everywhere, rather than picking up a clean one-hot.
constexpr double kValidityCutoff = 0.5;
constexpr double kValidityMargin = 0.05;
// Mean number of targets sharing one planted chain (head in-degree). Heavy
// sharing is load-bearing: with lightly shared pools most positives own a
// complete head no negative touches (and negatives, forced by degree
// matching to carry more decoys, own untouched decoy heads), so a
// max-aggregation scorer can separate the classes by pushing exactly those
// per-node weights high — an existence-style witness cover that never counts
// anything. At ~24 targets per chain, class-free heads are vanishingly rare
// in both directions, while the count signal (complete chains per target)
// is untouched because draws stay distinct per target.
constexpr std::uint64_t kChainShare = 24;

// A pool of planted chains sharing one length. Chain i occupies the node
// block first_node + i*length .. + length-1; consecutive positions p, p+1
// (1-based) are wired by the relation of true-path hop p+1.
struct ChainPool {
  std::uint64_t num_chains = 0;
  std::uint32_t length = 0;
  NodeId first_node = 0;

  NodeId node_at(std::uint64_t chain, std::uint32_t position) const {
    return static_cast<NodeId>(first_node + chain * length + position - 1);
  }
  NodeId head(std::uint64_t chain) const { return node_at(chain, 1); }
};

std::uint64_t positive_quota(const ScenarioSpec& spec) {
  return static_cast<std::uint64_t>(
      std::llround(spec.positive_fraction * static_cast<double>(spec.num_targets)));
}

void validate_spec(const ScenarioSpec& spec) {
  if (spec.threshold == 0) {
    throw UsageError("scenario threshold must be at least 1; c=0 would label every node positive");
  }
  if (spec.path_length == 0) {
    throw UsageError("scenario path length must be at least 1");
  }
  if (spec.num_relations < spec.path_length) {
    throw UsageError("scenario needs at least as many relations as the planted path is long");
  }
  if (!(spec.positive_fraction > 0.0 && spec.positive_fraction < 1.0)) {
    throw UsageError("positive fraction must lie strictly between 0 and 1");
  }
  if (spec.num_targets < 2) {
    throw UsageError("scenario needs at least two targets");
  }
  const std::uint64_t pos = positive_quota(spec);
  if (pos == 0 || pos >= spec.num_targets) {
    throw UsageError("positive fraction leaves one class empty at this target count");
  }
}

std::uint64_t pool_chain_count(std::uint64_t demand, std::uint32_t threshold,
                               std::uint64_t share) {
  // Big enough for distinct per-target draws (at most threshold+3 of them)
  // and sized so a chain head is shared by `share` targets on average.
  return std::max<std::uint64_t>(threshold + 3, (demand + share - 1) / share);
}

// Draws `count` distinct values in [0, pool). count is tiny, so a linear
// duplicate scan beats any set machinery.
std::vector<std::uint64_t> sample_distinct(Rng& rng, std::uint64_t pool,
                                           std::uint64_t count) {
  std::vector<std::uint64_t> picked;
  picked.reserve(count);
  while (picked.size() < count) {
    const std::uint64_t i = rng.below(pool);
    if (std::find(picked.begin(), picked.end(), i) == picked.end()) {
      picked.push_back(i);
    }
  }
  return picked;
}

// Final-hop edges whose destination is a terminal-typed node whose validity
// attribute sits below the cutoff; removing them leaves exactly the walks
// with a licensed ending. (A walk additionally needs its *start* node above
// the cutoff to count; that side is handled by zeroing the count of
// unlicensed targets, not by edge removal.)
std::vector<Edge> invalid_final_edges(const HeteroGraph& g, const MetaPath& path,
                                      int marker) {
  const auto terminal = g.find_type("terminal");
  std::vector<Edge> bad;
  if (!terminal.has_value() || marker < 0) return bad;
  const RelationId last = path.relations.back();
  for (const Edge& e : g.all_edges()) {
    if (e.rel != last) continue;
    if (g.node_type(e.dst) != *terminal) continue;
    if (g.features(e.dst)[static_cast<std::size_t>(marker)] < kValidityCutoff) {
      bad.push_back(e);
    }
  }
  return bad;
}

// Shared core for the pool-based scenarios. When `lookahead_hints` is set
// (requires l == 2 and exactly one distractor relation), distractor relations
// are named as continuations of the true path (r3, ...) and every target
// additionally receives direct edges of relation r2 to the noise pool whose
// degree correlates imperfectly with its label.
ScenarioData build_scenario(const ScenarioSpec& spec, bool lookahead_hints) {
  validate_spec(spec);
  const std::uint32_t l = spec.path_length;
  const std::uint32_t c = spec.threshold;
  const std::uint32_t n = spec.num_targets;
  const std::uint32_t num_distractors = spec.num_relations - l;

  // ---- labels and per-target chain-bundle quotas --------------------------
  Rng label_rng(derive_seed(spec.seed, hash_bytes("scenario-labels")));
  std::vector<int> labels(n, 0);
  std::fill(labels.begin(), labels.begin() + positive_quota(spec), 1);
  label_rng.shuffle(labels);

  // In feature-constrained mode an occurrence only counts when the target
  // itself carries the start marker, and half the negatives are targets
  // without it wired exactly like positives. Neither the raw chain structure
  // nor the target features alone separate the classes then; a classifier
  // has to combine both.
  std::vector<int> start_marker(n, 1);
  if (spec.feature_constrained) {
    std::vector<std::uint32_t> negatives;
    for (std::uint32_t v = 0; v < n; ++v) {
      if (labels[v] == 0) negatives.push_back(v);
    }
    label_rng.shuffle(negatives);
    for (std::size_t i = 0; i < negatives.size() / 2; ++i) {
      start_marker[negatives[i]] = 0;
    }
  }

  // Only the number of full-length valid chains carries the label: c..c+2 for
  // positives, exactly c-1 for marked negatives. Unmarked negatives draw from
  // the positive range, since their missing start marker already voids every
  // walk. Truncated chains stop at each intermediate depth so that merely
  // reaching depth j proves nothing about a target.
  Rng quota_rng(derive_seed(spec.seed, hash_bytes("scenario-quotas")));
  std::vector<std::uint32_t> full_count(n);
  for (std::uint32_t v = 0; v < n; ++v) {
    full_count[v] = labels[v] == 1 || start_marker[v] == 0
                        ? c + static_cast<std::uint32_t>(quota_rng.below(3))
                        : c - 1;
  }
  // die_count[v][j-1] for j = 1..l-1: chains stopping at depth j. The quota is
  // a per-target constant, never a top-up balancing total chain counts across
  // classes. Nodes whose frontier under the next relation is empty fall back
  // to a bare feature read during bag propagation, so chains dying at the last
  // intermediate depth contribute to a relation score with no instance weight
  // gating them; these nodes share the live step type, so a quota
  // anti-correlated with full_count would feed that bare term exactly the
  // negated label signal and cancel the count separation the final hop is
  // supposed to carry.
  const auto die_count = [&](std::uint32_t, std::uint32_t j) -> std::uint32_t {
    return j + 1 < l ? 1u : 2u;
  };
  // Class balance comes instead from chains that follow the true relations for
  // l-1 hops and then land in the shared noise pool rather than a terminal.
  // One such bundle per target tops every proper-prefix occurrence count up to
  // a class-independent constant (each chain feeds all prefixes below its
  // death), so no truncation of the true path separates the classes and
  // first-hop degree stays flat. The landing type is what makes the
  // anti-correlated quota safe here: a relation score meeting these walks at
  // the last intermediate depth can gate their bare reads out through the type
  // one-hot, which same-typed truncation would never allow.
  const auto noise_die_count = [&](std::uint32_t v) -> std::uint32_t {
    return c + 3 - full_count[v];
  };

  std::uint64_t demand_complete = 0;
  for (std::uint32_t v = 0; v < n; ++v) demand_complete += full_count[v];
  std::vector<std::uint64_t> demand_die(l >= 1 ? l - 1 : 0, 0);
  for (std::uint32_t j = 1; j < l; ++j) {
    for (std::uint32_t v = 0; v < n; ++v) demand_die[j - 1] += die_count(v, j);
  }
  std::uint64_t demand_noise_die = 0;
  for (std::uint32_t v = 0; v < n; ++v) demand_noise_die += noise_die_count(v);
  const std::uint64_t wrong_per_target = spec.feature_constrained ? c : 0;
  const std::uint64_t demand_wrong = wrong_per_target * n;

  // ---- node layout ---------------------------------------------------------
  const std::size_t num_types = l + 2;  // target, step1..step{l-1}, terminal, noise
  // The validity attribute is the first of the noise attributes, which sit
  // right after the type one-hots.
  const int marker = spec.feature_constrained ? static_cast<int>(num_types) : -1;
  const std::size_t dim = num_types + kNoiseAttrs;

  GraphBuilder builder(dim);
  builder.add_type("target");
  for (std::uint32_t j = 1; j < l; ++j) builder.add_type("step" + std::to_string(j));
  const TypeId terminal_type = builder.add_type("terminal");
  const TypeId noise_type = builder.add_type("noise");
  // Relation ids are interleaved at random between planted hops and
  // distractors. With ids assigned in planting order, a scorer whose
  // candidate losses tie (as existence-style aggregation does here) would
  // inherit the true path from nothing but enumeration order.
  std::vector<std::uint32_t> slot_at_id(spec.num_relations);
  std::iota(slot_at_id.begin(), slot_at_id.end(), 0u);
  Rng order_rng(derive_seed(spec.seed, hash_bytes("scenario-relation-order")));
  order_rng.shuffle(slot_at_id);
  std::vector<RelationId> id_of_slot(spec.num_relations);
  for (std::uint32_t id = 0; id < spec.num_relations; ++id) {
    const std::uint32_t slot = slot_at_id[id];
    const std::string name =
        slot < l ? "r" + std::to_string(slot + 1)
                 : (lookahead_hints ? "r" + std::to_string(slot + 1)
                                    : "d" + std::to_string(slot - l + 1));
    id_of_slot[slot] = builder.add_relation(name);
  }
  const auto hop_relation = [&](std::uint32_t p) { return id_of_slot[p - 1]; };

  enum class Validity { kFree, kLicensed, kUnlicensed };
  Rng feat_rng(derive_seed(spec.seed, hash_bytes("scenario-features")));
  const auto make_features = [&](TypeId type, Validity validity) {
    std::vector<double> f(dim, 0.0);
    f[type] = 1.0;
    for (std::size_t a = 0; a < kNoiseAttrs; ++a) {
      f[num_types + a] = feat_rng.uniform();
    }
    if (marker >= 0 && validity != Validity::kFree) {
      f[static_cast<std::size_t>(marker)] =
          validity == Validity::kLicensed
              ? feat_rng.uniform(kValidityCutoff + kValidityMargin, 1.0)
              : feat_rng.uniform(0.0, kValidityCutoff - kValidityMargin);
    }
    return f;
  };
  const auto position_type = [&](std::uint32_t p) -> TypeId {
    return p == l ? terminal_type : static_cast<TypeId>(p);
  };

  for (std::uint32_t v = 0; v < n; ++v) {
    builder.add_node(0, make_features(0, start_marker[v] == 1
                                             ? Validity::kLicensed
                                             : Validity::kUnlicensed));
  }

  std::vector<NodeId> chain_interiors;  // non-terminal chain nodes, for wiring
  const auto add_pool = [&](std::uint64_t chains, std::uint32_t length,
                            bool valid_terminal) {
    ChainPool pool{chains, length, static_cast<NodeId>(builder.num_nodes())};
    for (std::uint64_t i = 0; i < chains; ++i) {
      for (std::uint32_t p = 1; p <= length; ++p) {
        const TypeId t = position_type(p);
        const Validity validity = t == terminal_type
                                      ? (valid_terminal ? Validity::kLicensed
                                                        : Validity::kUnlicensed)
                                      : Validity::kFree;
        const NodeId node = builder.add_node(t, make_features(t, validity));
        if (t != terminal_type) chain_interiors.push_back(node);
        if (p > 1) builder.add_edge(node - 1, hop_relation(p), node);
      }
    }
    return pool;
  };

  const ChainPool complete_pool =
      add_pool(pool_chain_count(demand_complete, c, kChainShare), l, true);
  std::vector<ChainPool> die_pools;
  for (std::uint32_t j = 1; j < l; ++j) {
    die_pools.push_back(
        add_pool(pool_chain_count(demand_die[j - 1], c, kChainShare), j, false));
  }
  ChainPool wrong_pool;
  if (spec.feature_constrained) {
    wrong_pool = add_pool(pool_chain_count(demand_wrong, c, kChainShare), l, false);
  }
  const NodeId noise_first = static_cast<NodeId>(builder.num_nodes());
  for (std::uint64_t i = 0; i < kNoisePoolSize; ++i) {
    builder.add_node(noise_type, make_features(noise_type, Validity::kFree));
  }
  // Noise-dying chains: step-typed for depths 1..l-2, then one hop into the
  // noise pool. For l == 2 the bundle degenerates to plain target->noise
  // edges, so no fresh nodes are needed.
  ChainPool noise_die_pool;
  if (l >= 3) {
    Rng landing_rng(derive_seed(spec.seed, hash_bytes("scenario-noise-die")));
    noise_die_pool =
        ChainPool{pool_chain_count(demand_noise_die, c, kChainShare), l - 2,
                  static_cast<NodeId>(builder.num_nodes())};
    for (std::uint64_t i = 0; i < noise_die_pool.num_chains; ++i) {
      for (std::uint32_t p = 1; p + 1 < l; ++p) {
        const TypeId t = position_type(p);
        const NodeId node = builder.add_node(t, make_features(t, Validity::kFree));
        chain_interiors.push_back(node);
        if (p > 1) builder.add_edge(node - 1, hop_relation(p), node);
      }
      builder.add_edge(
          noise_die_pool.node_at(i, l - 2), hop_relation(l - 1),
          noise_first + static_cast<NodeId>(landing_rng.below(kNoisePoolSize)));
    }
  }

  // ---- link targets to their chain bundles --------------------------------
  Rng link_rng(derive_seed(spec.seed, hash_bytes("scenario-links")));
  std::vector<std::vector<std::uint64_t>> linked_complete(n);
  for (std::uint32_t v = 0; v < n; ++v) {
    linked_complete[v] =
        sample_distinct(link_rng, complete_pool.num_chains, full_count[v]);
    for (const std::uint64_t i : linked_complete[v]) {
      builder.add_edge(v, hop_relation(1), complete_pool.head(i));
    }
    for (std::uint32_t j = 1; j < l; ++j) {
      for (const std::uint64_t i : sample_distinct(
               link_rng, die_pools[j - 1].num_chains, die_count(v, j))) {
        builder.add_edge(v, hop_relation(1), die_pools[j - 1].head(i));
      }
    }
    if (l >= 3) {
      for (const std::uint64_t i : sample_distinct(
               link_rng, noise_die_pool.num_chains, noise_die_count(v))) {
        builder.add_edge(v, hop_relation(1), noise_die_pool.head(i));
      }
    } else {
      for (const std::uint64_t i :
           sample_distinct(link_rng, kNoisePoolSize, noise_die_count(v))) {
        builder.add_edge(v, hop_relation(1),
                         noise_first + static_cast<NodeId>(i));
      }
    }
    if (wrong_per_target > 0) {
      // Wrong-marker chains are complete walks too; raw counts stay matched
      // because both classes receive the same number of them.
      for (const std::uint64_t i :
           sample_distinct(link_rng, wrong_pool.num_chains, wrong_per_target)) {
        builder.add_edge(v, hop_relation(1), wrong_pool.head(i));
      }
    }
  }

  // ---- lookahead hints: direct r2 edges with an imperfect degree signal ---
  if (lookahead_hints) {
    Rng hint_rng(derive_seed(spec.seed, hash_bytes("scenario-hints")));
    constexpr double kReliability = 0.8;
    for (std::uint32_t v = 0; v < n; ++v) {
      const bool informative = hint_rng.bernoulli(kReliability);
      const std::uint64_t deg = ((labels[v] == 1) == informative) ? 3 : 1;
      for (const std::uint64_t i :
           sample_distinct(hint_rng, kNoisePoolSize, deg)) {
        builder.add_edge(v, hop_relation(2), noise_first + static_cast<NodeId>(i));
      }
    }
  }

  // ---- distractor wiring (label-independent) -------------------------------
  Rng wire_rng(derive_seed(spec.seed, hash_bytes("scenario-distractors")));
  for (std::uint32_t d = 0; d < num_distractors; ++d) {
    const RelationId rel = id_of_slot[l + d];
    if (spec.distractor_degree > 0) {
      for (std::uint32_t v = 0; v < n; ++v) {
        const std::uint64_t deg =
            1 + wire_rng.below(2 * static_cast<std::uint64_t>(spec.distractor_degree) - 1);
        for (std::uint64_t e = 0; e < deg; ++e) {
          builder.add_edge(
              v, rel, noise_first + static_cast<NodeId>(wire_rng.below(kNoisePoolSize)));
        }
      }
    }
    for (const NodeId node : chain_interiors) {
      if (wire_rng.bernoulli(0.5)) {
        builder.add_edge(
            node, rel, noise_first + static_cast<NodeId>(wire_rng.below(kNoisePoolSize)));
      }
    }
  }

  // ---- freeze, recount, assemble ground truth ------------------------------
  ScenarioData data;
  data.spec = spec;
  data.graph = std::move(builder).build();
  data.targets.resize(n);
  std::iota(data.targets.begin(), data.targets.end(), NodeId{0});
  data.labels = std::move(labels);
  data.truth.path.relations.resize(l);
  for (std::uint32_t p = 1; p <= l; ++p) {
    data.truth.path.relations[p - 1] = hop_relation(p);
  }
  data.truth.threshold = c;
  data.truth.feature_marker = marker;

  const HeteroGraph* counting_graph = &data.graph;
  std::optional<HeteroGraph> filtered;
  if (marker >= 0) {
    filtered = remove_edges(
        data.graph, invalid_final_edges(data.graph, data.truth.path, marker));
    counting_graph = &*filtered;
  }
  data.truth.counts.resize(n);
  for (std::uint32_t v = 0; v < n; ++v) {
    const std::uint64_t walks = counting_graph->count_occurrences(v, data.truth.path);
    if (walks != full_count[v]) {
      throw DataError("scenario generator planted " + std::to_string(full_count[v]) +
                      " walks at target " + std::to_string(v) + " but recounted " +
                      std::to_string(walks));
    }
    data.truth.counts[v] = start_marker[v] == 1 ? walks : 0;
  }

  for (std::uint32_t v = 0; v < n; ++v) {
    if (data.labels[v] != 1) continue;
    TargetExplanation ex;
    ex.target = v;
    for (const std::uint64_t i : linked_complete[v]) {
      ex.edges.push_back({v, hop_relation(1), complete_pool.head(i)});
      for (std::uint32_t p = 1; p < l; ++p) {
        ex.edges.push_back({complete_pool.node_at(i, p), hop_relation(p + 1),
                            complete_pool.node_at(i, p + 1)});
      }
    }
    std::sort(ex.edges.begin(), ex.edges.end());
    ex.edges.erase(std::unique(ex.edges.begin(), ex.edges.end()), ex.edges.end());
    data.truth.explanations.push_back(std::move(ex));
  }

  audit_scenario(data);
  return data;
}

}  // namespace

ScenarioSpec scenario_preset(std::string_view name) {
  std::string key(name);
  std::transform(key.begin(), key.end(), key.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  struct Preset {
    const char* name;
    std::uint32_t relations, threshold, length;
  };
  static constexpr Preset kPresets[] = {
      {"s1", 5, 2, 2},  {"s2", 5, 2, 3},  {"s3", 5, 3, 3},  {"s4", 5, 4, 2},
      {"s5", 10, 2, 2}, {"s6", 10, 2, 3}, {"s7", 10, 3, 3}, {"s8", 10, 4, 2},
  };
  for (const Preset& p : kPresets) {
    if (key == p.name) {
      ScenarioSpec spec;
      spec.num_relations = p.relations;
      spec.threshold = p.threshold;
      spec.path_length = p.length;
      // Presets constrain features: residual model error should come from
      // walks with the right relation sequence but the wrong node features,
      // so plain walk counting is not enough to solve them.
      spec.feature_constrained = true;
      return spec;
    }
  }
  throw UsageError("unknown scenario preset '" + std::string(name) +
                   "' (expected one of s1..s8)");
}

std::vector<std::string> scenario_preset_names() {
  return {"s1", "s2", "s3", "s4", "s5", "s6", "s7", "s8"};
}

ScenarioData generate_scenario(const ScenarioSpec& spec) {
  return build_scenario(spec, /*lookahead_hints=*/false);
}

ScenarioData miniature_scenario() {
  GraphBuilder builder(3);
  const TypeId grey = builder.add_type("grey");
  const TypeId orange = builder.add_type("orange");
  const TypeId green = builder.add_type("green");
  const RelationId r = builder.add_relation("r");
  const RelationId s = builder.add_relation("s");

  const auto one_hot = [](TypeId t) {
    std::vector<double> f(3, 0.0);
    f[t] = 1.0;
    return f;
  };
  for (int i = 0; i < 4; ++i) builder.add_node(grey, one_hot(grey));    // 0..3
  for (int i = 0; i < 5; ++i) builder.add_node(orange, one_hot(orange));  // 4..8
  for (int i = 0; i < 4; ++i) builder.add_node(green, one_hot(green));  // 9..12

  // Walks multiply through shared orange nodes: node 4 completes twice.
  const Edge planted[] = {
      {0, r, 4}, {0, r, 5},            // target 0: 2 + 1 walks -> positive
      {1, r, 6}, {1, r, 7},            // target 1: 1 + 0 walks -> negative
      {2, r, 4}, {2, r, 8},            // target 2: 2 + 1 walks -> positive
      {3, r, 5}, {3, r, 8},            // target 3: 1 + 1 walks -> negative
      {4, s, 9}, {4, s, 10}, {5, s, 11}, {6, s, 12}, {8, s, 9},
  };
  for (const Edge& e : planted) builder.add_edge(e.src, e.rel, e.dst);

  ScenarioData data;
  data.spec.num_relations = 2;
  data.spec.threshold = 3;
  data.spec.path_length = 2;
  data.spec.num_targets = 4;
  data.spec.positive_fraction = 0.5;
  data.spec.distractor_degree = 0;
  data.spec.seed = 0;
  data.graph = std::move(builder).build();
  data.targets = {0, 1, 2, 3};
  data.labels = {1, 0, 1, 0};
  data.truth.path.relations = {r, s};
  data.truth.threshold = 3;
  data.truth.counts = {3, 1, 3, 2};
  data.truth.explanations = {
      {0, {{0, r, 4}, {0, r, 5}, {4, s, 9}, {4, s, 10}, {5, s, 11}}},
      {2, {{2, r, 4}, {2, r, 8}, {4, s, 9}, {4, s, 10}, {8, s, 9}}},
  };
  audit_scenario(data);
  return data;
}

ScenarioData lookahead_scenario(std::uint64_t seed) {
  ScenarioSpec spec;
  spec.num_relations = 3;
  spec.threshold = 2;
  spec.path_length = 2;
  spec.num_targets = 200;
  spec.positive_fraction = 0.3;
  spec.distractor_degree = 2;
  spec.seed = seed;
  return build_scenario(spec, /*lookahead_hints=*/true);
}

void audit_scenario(const ScenarioData& data) {
  const std::size_t n = data.targets.size();
  if (data.labels.size() != n || data.truth.counts.size() != n) {
    throw DataError("scenario audit: targets, labels and counts are misaligned");
  }
  const HeteroGraph* counting_graph = &data.graph;
  std::optional<HeteroGraph> filtered;
  if (data.truth.feature_marker >= 0) {
    filtered = remove_edges(
        data.graph,
        invalid_final_edges(data.graph, data.truth.path, data.truth.feature_marker));
    counting_graph = &*filtered;
  }
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t count =
        counting_graph->count_occurrences(data.targets[i], data.truth.path);
    if (data.truth.feature_marker >= 0 &&
        data.graph.features(data.targets[i])[static_cast<std::size_t>(
            data.truth.feature_marker)] < kValidityCutoff) {
      count = 0;  // walks from an unlicensed start never count
    }
    if (count != data.truth.counts[i]) {
      throw DataError("scenario audit: recounted " + std::to_string(count) +
                      " walks at target " + std::to_string(data.targets[i]) +
                      " but the manifest records " + std::to_string(data.truth.counts[i]));
    }
    const bool positive = count >= data.truth.threshold;
    if (positive != (data.labels[i] == 1)) {
      throw DataError("scenario audit: label of target " +
                      std::to_string(data.targets[i]) +
                      " contradicts its occurrence count");
    }
    positives += positive ? 1 : 0;
  }
  if (data.truth.explanations.size() != positives) {
    throw DataError("scenario audit: expected one explanation per positive target");
  }
  NodeId previous = 0;
  bool first = true;
  for (const TargetExplanation& ex : data.truth.explanations) {
    if (!first && ex.target <= previous) {
      throw DataError("scenario audit: explanations must be sorted by target id");
    }
    first = false;
    previous = ex.target;
    for (const Edge& e : ex.edges) {
      if (!data.graph.has_edge(e.src, e.rel, e.dst)) {
        throw DataError("scenario audit: explanation edge missing from the graph");
      }
    }
  }
}

std::string ground_truth_manifest(const ScenarioData& data) {
  nlohmann::json j;
  j["format"] = "mps-scenario-truth";
  j["version"] = 1;
  nlohmann::json path = nlohmann::json::array();
  for (const RelationId r : data.truth.path.relations) {
    path.push_back(data.graph.relation_name(r));
  }
  j["meta_path"] = std::move(path);
  j["threshold"] = data.truth.threshold;
  j["feature_marker"] = data.truth.feature_marker;
  if (data.truth.feature_marker >= 0) {
    j["feature_cutoff"] = kValidityCutoff;  // valid iff attribute > cutoff
  }
  j["targets"] = data.targets;
  j["labels"] = data.labels;
  j["counts"] = data.truth.counts;
  nlohmann::json explanations = nlohmann::json::array();
  for (const TargetExplanation& ex : data.truth.explanations) {
    nlohmann::json edges = nlohmann::json::array();
    for (const Edge& e : ex.edges) {
      edges.push_back({e.src, e.rel, e.dst});
    }
    explanations.push_back({{"target", ex.target}, {"edges", std::move(edges)}});
  }
  j["explanations"] = std::move(explanations);
  return j.dump(1);
}

}  // namespace mps
