#include "mps/search.hpp"

#include <algorithm>
#include <atomic>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "mps/bags.hpp"
#include "mps/errors.hpp"
#include "mps/rng.hpp"

namespace mps {

namespace {

using nlohmann::json;

std::string path_key(const MetaPath& mp) {
  std::string key;
  for (std::size_t i = 0; i < mp.relations.size(); ++i) {
    if (i != 0) key += ',';
    key += std::to_string(mp.relations[i]);
  }
  return key;
}

// Candidate seeds hang off (master seed, prefix, relation) so that neither
// beam scheduling nor thread interleaving can change any result, and so that
// the same path is evaluated identically by both search strategies.
std::uint64_t scoring_seed(const SearchConfig& cfg, const MetaPath& prefix,
                           RelationId r) {
  return derive_seed(cfg.seed, hash_bytes("score:" + path_key(prefix)), r);
}

std::uint64_t eval_seed(const SearchConfig& cfg, const MetaPath& path) {
  return derive_seed(cfg.seed, hash_bytes("eval:" + path_key(path)));
}

double evaluate_prefix(const HeteroGraph& g, std::span<const NodeId> targets,
                       std::span<const int> labels, const MetaPath& path,
                       const SearchConfig& cfg) {
  TrainConfig tc = cfg.evaluation;
  tc.seed = eval_seed(cfg, path);
  double val_f1 = train_model(g, targets, labels, {path}, tc).report.val_f1;
  // A prefix evaluation that cannot beat the always-positive classifier says
  // nothing about the prefix — reduced-budget runs occasionally stall on that
  // plateau even for clearly informative paths, and a stalled number here
  // would let an uninformative competitor win the final ranking. One fresh
  // draw resolves the stall; genuinely uninformative prefixes stay at the
  // plateau either way.
  const double positives =
      static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  const double trivial_f1 =
      2.0 * positives / (static_cast<double>(labels.size()) + positives);
  if (val_f1 <= trivial_f1 + 1e-9) {
    tc.seed = derive_seed(tc.seed, hash_bytes("stalled-eval"));
    val_f1 = std::max(
        val_f1, train_model(g, targets, labels, {path}, tc).report.val_f1);
  }
  return val_f1;
}

void validate_config(const SearchConfig& cfg) {
  if (cfg.max_length < 1) throw UsageError("max meta-path length must be >= 1");
  if (cfg.beam_width < 1) throw UsageError("beam width must be >= 1");
  if (!(cfg.eta > 0.0) || cfg.eta > 1.0) {
    throw UsageError("eta must lie in (0, 1]");
  }
  if (cfg.threads < 1) throw UsageError("thread count must be >= 1");
}

struct ScoreTask {
  std::size_t entry = 0;
  RelationId relation = 0;
};

// Runs one scoring call per task, optionally across threads. Results land in
// a slot per task, so the outcome is identical for any thread count.
std::vector<ScoredRelation> run_scoring(
    const HeteroGraph& g, const std::vector<MetaPath>& prefixes,
    const std::vector<BagSets>& bags, const std::vector<ScoreTask>& tasks,
    const SearchConfig& cfg) {
  std::vector<ScoredRelation> scored(tasks.size());
  auto run_one = [&](std::size_t idx) {
    const ScoreTask& task = tasks[idx];
    ScoreOptions opts = cfg.scoring;
    opts.seed = scoring_seed(cfg, prefixes[task.entry], task.relation);
    scored[idx] = score_relation(g, bags[task.entry], task.relation, opts);
  };

  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(cfg.threads), tasks.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) run_one(i);
    return scored;
  }

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto drain = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      try {
        run_one(i);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(drain);
  for (std::thread& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return scored;
}

json survivor_json(const SurvivorRecord& rec, const HeteroGraph& g) {
  return json{{"path", format_metapath(g, rec.path)},
              {"loss", rec.loss},
              {"val_f1", rec.val_f1},
              {"dead_end", rec.dead_end}};
}

}  // namespace

TrainConfig search_eval_config() {
  TrainConfig tc;
  tc.embedding_dim = 16;
  // A prefix's worth only shows once the model escapes the feature-only
  // plateau, which takes a few hundred epochs at the default rate; a hotter
  // rate reaches the same ranking in roughly half the budget.
  tc.learning_rate = 0.03;
  tc.max_epochs = 350;
  tc.patience = 50;
  return tc;
}

SearchResult learn_metapaths(const HeteroGraph& g,
                             std::span<const NodeId> targets,
                             std::span<const int> labels,
                             const SearchConfig& cfg) {
  validate_config(cfg);

  SearchResult out;
  SearchTrace& trace = out.trace;

  // Live beam, kept as parallel arrays so scoring tasks can reference
  // entries by index.
  std::vector<MetaPath> prefixes{MetaPath{}};
  std::vector<BagSets> bags{make_singleton_bags(targets, labels)};

  const std::size_t num_relations = g.num_relations();

  for (int iter = 1; iter <= cfg.max_length && !prefixes.empty(); ++iter) {
    std::vector<ScoreTask> tasks;
    tasks.reserve(prefixes.size() * num_relations);
    for (std::size_t e = 0; e < prefixes.size(); ++e) {
      for (RelationId r = 0; r < num_relations; ++r) {
        tasks.push_back(ScoreTask{e, r});
      }
    }
    const std::vector<ScoredRelation> scored =
        run_scoring(g, prefixes, bags, tasks, cfg);
    trace.score_invocations += tasks.size();

    SearchIteration record;

    // Pool of guard-passing extensions across the whole beam.
    struct PoolItem {
      std::size_t task = 0;
      std::size_t entry = 0;
      RelationId relation = 0;
      double loss = 0.0;
    };
    std::vector<PoolItem> pool;
    for (std::size_t e = 0; e < prefixes.size(); ++e) {
      PrefixExpansion expansion;
      expansion.prefix = prefixes[e];
      bool any_passed = false;
      for (RelationId r = 0; r < num_relations; ++r) {
        const std::size_t t = e * num_relations + r;
        const ScoredRelation& s = scored[t];
        const bool passed = s.passes(cfg.eta);
        expansion.candidates.push_back(
            CandidateScore{r, s.loss, s.baseline, passed});
        if (passed) pool.push_back(PoolItem{t, e, r, s.loss});
        any_passed = any_passed || passed;
      }
      expansion.stopped = !any_passed;
      record.expansions.push_back(std::move(expansion));
    }

    // Global top-K by scoring loss; ties keep earlier prefixes, then lower
    // relation ids, so the ordering is deterministic.
    std::sort(pool.begin(), pool.end(),
              [](const PoolItem& a, const PoolItem& b) {
                if (a.loss != b.loss) return a.loss < b.loss;
                if (a.entry != b.entry) return a.entry < b.entry;
                return a.relation < b.relation;
              });
    if (pool.size() > static_cast<std::size_t>(cfg.beam_width)) {
      pool.resize(static_cast<std::size_t>(cfg.beam_width));
    }

    std::vector<MetaPath> next_prefixes;
    std::vector<BagSets> next_bags;
    for (const PoolItem& item : pool) {
      MetaPath child = prefixes[item.entry];
      child.relations.push_back(item.relation);

      SurvivorRecord rec;
      rec.path = child;
      rec.loss = item.loss;
      rec.val_f1 = evaluate_prefix(g, targets, labels, child, cfg);
      if (rec.val_f1 > trace.best_f1) {
        trace.best_f1 = rec.val_f1;
        trace.best_path = child;
      }

      // Carry the bags forward only while the path may still grow. A class
      // whose members all lack successors cannot be propagated; that ends
      // this prefix but not the search.
      if (static_cast<int>(child.length()) < cfg.max_length) {
        try {
          BagSets propagated = propagate_bags(g, bags[item.entry],
                                              item.relation,
                                              scored[item.task].params.theta);
          next_prefixes.push_back(child);
          next_bags.push_back(std::move(propagated));
        } catch (const DataError&) {
          rec.dead_end = true;
        }
      }

      record.beam.push_back(rec);
      trace.evaluated.push_back(rec);
    }

    record.best_f1 = trace.best_f1;
    trace.iterations.push_back(std::move(record));
    prefixes = std::move(next_prefixes);
    bags = std::move(next_bags);
  }

  // Rank everything that earned an evaluation; ties keep evaluation order,
  // which makes paths[0] agree with the running best.
  std::vector<std::size_t> order(trace.evaluated.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return trace.evaluated[a].val_f1 >
                            trace.evaluated[b].val_f1;
                   });
  for (std::size_t i = 0;
       i < order.size() && i < static_cast<std::size_t>(cfg.beam_width); ++i) {
    out.paths.push_back(trace.evaluated[order[i]].path);
  }
  return out;
}

GreedyResult greedy_by_f1_baseline(const HeteroGraph& g,
                                   std::span<const NodeId> targets,
                                   std::span<const int> labels,
                                   const SearchConfig& cfg) {
  validate_config(cfg);
  if (g.num_relations() == 0) throw DataError("graph has no relations");
  make_singleton_bags(targets, labels);  // validates the label mix

  GreedyResult out;
  MetaPath path;
  for (int step = 1; step <= cfg.max_length; ++step) {
    GreedyStep record;
    record.prefix = path;
    RelationId chosen = 0;
    double chosen_f1 = -1.0;
    for (RelationId r = 0; r < g.num_relations(); ++r) {
      MetaPath candidate = path;
      candidate.relations.push_back(r);
      const double f1 = evaluate_prefix(g, targets, labels, candidate, cfg);
      record.candidates.push_back(GreedyCandidate{r, f1});
      if (f1 > chosen_f1) {  // strict: ties keep the lowest relation id
        chosen_f1 = f1;
        chosen = r;
      }
    }
    record.chosen = chosen;
    out.trace.steps.push_back(std::move(record));

    path.relations.push_back(chosen);
    if (chosen_f1 > out.trace.best_f1) {
      out.trace.best_f1 = chosen_f1;
      out.trace.best_path = path;
    }
  }
  out.path = out.trace.best_path;
  return out;
}

std::string trace_json(const SearchTrace& trace, const HeteroGraph& g) {
  json j;
  j["score_invocations"] = trace.score_invocations;
  j["best"] = {{"path", format_metapath(g, trace.best_path)},
               {"val_f1", trace.best_f1}};
  j["iterations"] = json::array();
  for (const SearchIteration& it : trace.iterations) {
    json ji;
    ji["expansions"] = json::array();
    for (const PrefixExpansion& exp : it.expansions) {
      json je;
      je["prefix"] = format_metapath(g, exp.prefix);
      je["stopped"] = exp.stopped;
      je["candidates"] = json::array();
      for (const CandidateScore& c : exp.candidates) {
        je["candidates"].push_back(json{{"relation", g.relation_name(c.relation)},
                                        {"loss", c.loss},
                                        {"baseline", c.baseline},
                                        {"passed", c.passed}});
      }
      ji["expansions"].push_back(std::move(je));
    }
    ji["beam"] = json::array();
    for (const SurvivorRecord& rec : it.beam) {
      ji["beam"].push_back(survivor_json(rec, g));
    }
    ji["best_f1"] = it.best_f1;
    j["iterations"].push_back(std::move(ji));
  }
  j["evaluated"] = json::array();
  for (const SurvivorRecord& rec : trace.evaluated) {
    j["evaluated"].push_back(survivor_json(rec, g));
  }
  return j.dump(1);
}

std::string trace_table(const SearchTrace& trace, const HeteroGraph& g) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  for (std::size_t i = 0; i < trace.iterations.size(); ++i) {
    const SearchIteration& it = trace.iterations[i];
    out << "iteration " << (i + 1) << "\n";
    for (const PrefixExpansion& exp : it.expansions) {
      const std::string prefix = format_metapath(g, exp.prefix);
      out << "  prefix [" << (prefix.empty() ? "-" : prefix) << "]"
          << (exp.stopped ? "  (stopped: nothing passed the guard)" : "")
          << "\n";
      out << "    " << std::left << std::setw(24) << "relation" << std::right
          << std::setw(12) << "loss" << std::setw(12) << "baseline"
          << std::setw(9) << "passed" << "\n";
      for (const CandidateScore& c : exp.candidates) {
        out << "    " << std::left << std::setw(24)
            << g.relation_name(c.relation) << std::right << std::setw(12)
            << c.loss << std::setw(12) << c.baseline << std::setw(9)
            << (c.passed ? "yes" : "no") << "\n";
      }
    }
    if (!it.beam.empty()) {
      out << "  beam:\n";
      for (const SurvivorRecord& rec : it.beam) {
        out << "    [" << format_metapath(g, rec.path) << "]  loss "
            << rec.loss << "  val F1 " << rec.val_f1
            << (rec.dead_end ? "  (dead end)" : "") << "\n";
      }
    }
    out << "  best F1 so far: " << it.best_f1 << "\n";
  }
  out << "score invocations: " << trace.score_invocations << "\n";
  out << "best meta-path: [" << format_metapath(g, trace.best_path)
      << "]  val F1 " << trace.best_f1 << "\n";
  return out.str();
}

std::string greedy_trace_json(const GreedyTrace& trace, const HeteroGraph& g) {
  json j;
  j["best"] = {{"path", format_metapath(g, trace.best_path)},
               {"val_f1", trace.best_f1}};
  j["steps"] = json::array();
  for (const GreedyStep& step : trace.steps) {
    json js;
    js["prefix"] = format_metapath(g, step.prefix);
    js["chosen"] = g.relation_name(step.chosen);
    js["candidates"] = json::array();
    for (const GreedyCandidate& c : step.candidates) {
      js["candidates"].push_back(json{{"relation", g.relation_name(c.relation)},
                                      {"val_f1", c.val_f1}});
    }
    j["steps"].push_back(std::move(js));
  }
  return j.dump(1);
}

std::string greedy_trace_table(const GreedyTrace& trace,
                               const HeteroGraph& g) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    const GreedyStep& step = trace.steps[i];
    const std::string prefix = format_metapath(g, step.prefix);
    out << "step " << (i + 1) << "  prefix ["
        << (prefix.empty() ? "-" : prefix) << "]\n";
    for (const GreedyCandidate& c : step.candidates) {
      out << "    " << std::left << std::setw(24)
          << g.relation_name(c.relation) << std::right << "val F1 "
          << c.val_f1 << (c.relation == step.chosen ? "  <- chosen" : "")
          << "\n";
    }
  }
  out << "best meta-path: [" << format_metapath(g, trace.best_path)
      << "]  val F1 " << trace.best_f1 << "\n";
  return out.str();
}

}  // namespace mps
