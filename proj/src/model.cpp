#include "mps/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mps/errors.hpp"
#include "mps/rng.hpp"
#include "mps/scoring.hpp"  // logistic

namespace mps {

namespace {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Computation plans. A plan pins down, once per (graph, targets, meta-path),
// exactly which nodes each layer touches and which h-columns every update
// reads, so the per-epoch work is pure gathers and GEMMs.
//
// levels[l] holds the nodes whose h^l is needed (levels[L] is the target list
// in caller order; deeper levels are sorted and unique). transitions[l] maps
// each node of levels[l+1] to its own column in levels[l] (the self term) and
// to the columns of its mask-allowed successors (the aggregation term).
// ---------------------------------------------------------------------------

struct Transition {
  std::vector<std::size_t> self_index;
  std::vector<std::size_t> nbr_offsets;  // levels[l+1].size() + 1
  std::vector<std::size_t> nbr_index;
};

struct PathPlan {
  std::vector<std::vector<NodeId>> levels;
  std::vector<Transition> transitions;
};

PathPlan build_plan(const HeteroGraph& g, std::span<const NodeId> targets,
                    const MetaPath& mp) {
  const std::size_t L = mp.length();
  PathPlan plan;
  plan.levels.resize(L + 1);
  plan.transitions.resize(L);
  plan.levels[L].assign(targets.begin(), targets.end());
  if (L == 0) return plan;

  const MetaPathLayers layers = metapath_layers(g, targets, mp);

  // Layer l consumes the relation at meta-path position j = L - l, walking
  // the path back to front; an edge (v, r_j, u) participates only when v is
  // forward-reachable at position j-1 and u can finish the remaining suffix.
  for (std::size_t l = L; l-- > 0;) {
    const std::size_t j = L - l;
    const RelationId r = mp.relations[j - 1];
    std::vector<NodeId> needed(plan.levels[l + 1].begin(),
                               plan.levels[l + 1].end());
    for (NodeId v : plan.levels[l + 1]) {
      if (!layers.forward[j - 1][v]) continue;
      for (NodeId u : g.neighbors(v, r)) {
        if (layers.completable[j][u]) needed.push_back(u);
      }
    }
    std::sort(needed.begin(), needed.end());
    needed.erase(std::unique(needed.begin(), needed.end()), needed.end());
    plan.levels[l] = std::move(needed);
  }

  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t j = L - l;
    const RelationId r = mp.relations[j - 1];
    const auto& from = plan.levels[l];
    const auto& to = plan.levels[l + 1];
    auto index_of = [&](NodeId v) {
      return static_cast<std::size_t>(
          std::lower_bound(from.begin(), from.end(), v) - from.begin());
    };
    Transition& tr = plan.transitions[l];
    tr.self_index.resize(to.size());
    tr.nbr_offsets.assign(to.size() + 1, 0);
    for (std::size_t i = 0; i < to.size(); ++i) {
      const NodeId v = to[i];
      tr.self_index[i] = index_of(v);
      if (layers.forward[j - 1][v]) {
        for (NodeId u : g.neighbors(v, r)) {
          if (layers.completable[j][u]) tr.nbr_index.push_back(index_of(u));
        }
      }
      tr.nbr_offsets[i + 1] = tr.nbr_index.size();
    }
  }
  return plan;
}

Eigen::MatrixXd gather_features(const HeteroGraph& g,
                                std::span<const NodeId> nodes) {
  const std::size_t dim = g.feature_dim();
  Eigen::MatrixXd out(dim, nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto x = g.features(nodes[i]);
    out.col(i) = Eigen::Map<const Eigen::VectorXd>(x.data(), dim);
  }
  return out;
}

// Forward activations of one path, cached for the backward pass.
struct PathActivations {
  std::vector<Eigen::MatrixXd> h;    // h[l]: level-l values, h[0] = features
  std::vector<Eigen::MatrixXd> agg;  // agg[l]: summed neighbor h at level l
  std::vector<Eigen::MatrixXd> xin;  // xin[l]: raw features of levels[l+1]
};

void forward_path(const HeteroGraph& g, const MpsGnnModel::PathWeights& pw,
                  const PathPlan& plan, bool use_skip, PathActivations& act) {
  const std::size_t L = plan.transitions.size();
  act.h.resize(L + 1);
  act.agg.resize(L);
  act.xin.resize(L);
  act.h[0] = gather_features(g, plan.levels[0]);
  for (std::size_t l = 0; l < L; ++l) {
    const Transition& tr = plan.transitions[l];
    const auto& prev = act.h[l];
    const std::size_t n = plan.levels[l + 1].size();
    const Eigen::Index dim_in = prev.rows();

    Eigen::MatrixXd agg = Eigen::MatrixXd::Zero(dim_in, n);
    Eigen::MatrixXd self(dim_in, n);
    for (std::size_t i = 0; i < n; ++i) {
      self.col(i) = prev.col(tr.self_index[i]);
      for (std::size_t k = tr.nbr_offsets[i]; k < tr.nbr_offsets[i + 1]; ++k) {
        agg.col(i) += prev.col(tr.nbr_index[k]);
      }
    }
    act.xin[l] = gather_features(g, plan.levels[l + 1]);

    Eigen::MatrixXd z = pw.w_self[l] * self + pw.w_neigh[l] * agg;
    if (use_skip) z += pw.w_skip[l] * act.xin[l];
    act.agg[l] = std::move(agg);
    act.h[l + 1] = z.unaryExpr([](double v) { return logistic(v); });
  }
}

// Backpropagates d(loss)/d(target embeddings) through one path, adding
// weight gradients into `grad` (a zeroed weight mirror).
void backward_path(const MpsGnnModel::PathWeights& pw, const PathPlan& plan,
                   bool use_skip, const PathActivations& act,
                   Eigen::MatrixXd d_out, MpsGnnModel::PathWeights& grad) {
  const std::size_t L = plan.transitions.size();
  Eigen::MatrixXd dh = std::move(d_out);
  for (std::size_t l = L; l-- > 0;) {
    const Transition& tr = plan.transitions[l];
    const auto& hout = act.h[l + 1];
    // logistic'(z) = h (1 - h)
    const Eigen::MatrixXd dz =
        dh.array() * hout.array() * (1.0 - hout.array());

    const auto& prev = act.h[l];
    const std::size_t n = static_cast<std::size_t>(dz.cols());
    Eigen::MatrixXd self(prev.rows(), n);
    for (std::size_t i = 0; i < n; ++i) self.col(i) = prev.col(tr.self_index[i]);

    grad.w_self[l] += dz * self.transpose();
    grad.w_neigh[l] += dz * act.agg[l].transpose();
    if (use_skip) grad.w_skip[l] += dz * act.xin[l].transpose();

    const Eigen::MatrixXd d_self = pw.w_self[l].transpose() * dz;
    const Eigen::MatrixXd d_agg = pw.w_neigh[l].transpose() * dz;
    Eigen::MatrixXd d_prev = Eigen::MatrixXd::Zero(prev.rows(), prev.cols());
    for (std::size_t i = 0; i < n; ++i) {
      d_prev.col(tr.self_index[i]) += d_self.col(i);
      for (std::size_t k = tr.nbr_offsets[i]; k < tr.nbr_offsets[i + 1]; ++k) {
        d_prev.col(tr.nbr_index[k]) += d_agg.col(i);
      }
    }
    dh = std::move(d_prev);
  }
}

// Concatenated per-path target embeddings (raw features when K = 0).
Eigen::MatrixXd readout_input(const HeteroGraph& g,
                              std::span<const NodeId> targets,
                              const std::vector<PathActivations>& acts,
                              int embedding_dim) {
  if (acts.empty()) return gather_features(g, targets);
  Eigen::MatrixXd c(static_cast<Eigen::Index>(acts.size()) * embedding_dim,
                    targets.size());
  for (std::size_t m = 0; m < acts.size(); ++m) {
    c.middleRows(static_cast<Eigen::Index>(m) * embedding_dim, embedding_dim) =
        acts[m].h.back();
  }
  return c;
}

// Column-wise softmax over 2-row logits.
Eigen::MatrixXd softmax2(const Eigen::MatrixXd& z) {
  Eigen::MatrixXd p(2, z.cols());
  for (Eigen::Index i = 0; i < z.cols(); ++i) {
    const double m = std::max(z(0, i), z(1, i));
    const double e0 = std::exp(z(0, i) - m);
    const double e1 = std::exp(z(1, i) - m);
    p(0, i) = e0 / (e0 + e1);
    p(1, i) = e1 / (e0 + e1);
  }
  return p;
}

// Flat views over every trainable coefficient, in a fixed order shared by
// parameters and gradients so Adam can walk them uniformly.
struct ParamView {
  double* data;
  std::ptrdiff_t size;
};

std::vector<ParamView> collect_views(std::vector<MpsGnnModel::PathWeights>& pws,
                                     Eigen::MatrixXd& readout,
                                     Eigen::VectorXd& bias, bool use_skip) {
  std::vector<ParamView> views;
  for (auto& pw : pws) {
    for (auto& w : pw.w_self) views.push_back({w.data(), w.size()});
    for (auto& w : pw.w_neigh) views.push_back({w.data(), w.size()});
    if (use_skip) {
      for (auto& w : pw.w_skip) views.push_back({w.data(), w.size()});
    }
  }
  views.push_back({readout.data(), readout.size()});
  views.push_back({bias.data(), bias.size()});
  return views;
}

std::ptrdiff_t total_size(const std::vector<ParamView>& views) {
  std::ptrdiff_t n = 0;
  for (const auto& v : views) n += v.size;
  return n;
}

void snapshot(const std::vector<ParamView>& views, std::vector<double>& out) {
  out.clear();
  for (const auto& v : views) out.insert(out.end(), v.data, v.data + v.size);
}

void restore(const std::vector<ParamView>& views,
             const std::vector<double>& saved) {
  std::size_t at = 0;
  for (const auto& v : views) {
    std::copy(saved.begin() + at, saved.begin() + at + v.size, v.data);
    at += static_cast<std::size_t>(v.size);
  }
}

// Zero-initialized gradient holders mirroring a model's parameter layout.
struct GradientSet {
  std::vector<MpsGnnModel::PathWeights> paths;
  Eigen::MatrixXd readout;
  Eigen::VectorXd bias;
};

GradientSet zero_gradients(const MpsGnnModel& model) {
  GradientSet gs;
  for (const auto& pw : model.path_weights()) {
    MpsGnnModel::PathWeights gw;
    for (const auto& w : pw.w_self) {
      gw.w_self.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    }
    for (const auto& w : pw.w_neigh) {
      gw.w_neigh.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    }
    for (const auto& w : pw.w_skip) {
      gw.w_skip.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    }
    gs.paths.push_back(std::move(gw));
  }
  gs.readout = Eigen::MatrixXd::Zero(model.readout().rows(), model.readout().cols());
  gs.bias = Eigen::VectorXd::Zero(model.readout_bias().size());
  return gs;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw DataError("malformed matrix in checkpoint");
  const std::size_t rows = j.size();
  const std::size_t cols = j[0].size();
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (j[r].size() != cols) throw DataError("ragged matrix in checkpoint");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

}  // namespace

Split stratified_split(std::span<const int> labels, double train_fraction,
                       double val_fraction, std::uint64_t seed) {
  Split split;
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) {
      throw DataError("labels must be 0 or 1");
    }
    by_class[labels[i]].push_back(i);
  }
  for (int cls = 0; cls < 2; ++cls) {
    Rng rng(derive_seed(seed, hash_bytes("split"), static_cast<std::uint64_t>(cls)));
    rng.shuffle(by_class[cls]);
    const std::size_t n = by_class[cls].size();
    const auto n_train = static_cast<std::size_t>(
        std::floor(static_cast<double>(n) * train_fraction));
    const auto n_val = static_cast<std::size_t>(
        std::floor(static_cast<double>(n) * val_fraction));
    for (std::size_t i = 0; i < n; ++i) {
      auto& part = i < n_train          ? split.train
                   : i < n_train + n_val ? split.val
                                         : split.test;
      part.push_back(by_class[cls][i]);
    }
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());

  auto single_class = [&](const std::vector<std::size_t>& part) {
    bool seen[2] = {false, false};
    for (std::size_t i : part) seen[labels[i]] = true;
    return !(seen[0] && seen[1]);
  };
  if (split.train.empty() || split.val.empty() || split.test.empty() ||
      single_class(split.train) || single_class(split.val)) {
    split.degenerate = true;
    split.train.resize(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) split.train[i] = i;
    split.val = split.train;
    split.test = split.train;
  }
  return split;
}

double f1_score(std::span<const int> predicted, std::span<const int> actual) {
  if (predicted.size() != actual.size()) {
    throw DataError("prediction/label size mismatch");
  }
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] == 1 && actual[i] == 1) ++tp;
    if (predicted[i] == 1 && actual[i] == 0) ++fp;
    if (predicted[i] == 0 && actual[i] == 1) ++fn;
  }
  if (tp == 0) return 0.0;
  const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return 2.0 * precision * recall / (precision + recall);
}

MpsGnnModel MpsGnnModel::init(std::size_t feature_dim,
                              std::vector<MetaPath> paths,
                              const TrainConfig& config) {
  for (const MetaPath& mp : paths) {
    if (mp.empty()) throw DataError("meta-paths in a model must be non-empty");
  }
  MpsGnnModel model;
  model.feature_dim_ = feature_dim;
  model.embedding_dim_ = config.embedding_dim;
  model.use_skip_ = config.use_skip;
  model.paths_ = std::move(paths);

  Rng rng(derive_seed(config.seed, hash_bytes("init")));
  auto glorot = [&rng](Eigen::Index rows, Eigen::Index cols) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        m(r, c) = rng.uniform(-limit, limit);
      }
    }
    return m;
  };

  const auto e = static_cast<Eigen::Index>(config.embedding_dim);
  const auto d = static_cast<Eigen::Index>(feature_dim);
  for (const MetaPath& mp : model.paths_) {
    PathWeights pw;
    for (std::size_t l = 0; l < mp.length(); ++l) {
      const Eigen::Index in = l == 0 ? d : e;
      pw.w_self.push_back(glorot(e, in));
      pw.w_neigh.push_back(glorot(e, in));
      pw.w_skip.push_back(config.use_skip ? glorot(e, d)
                                          : Eigen::MatrixXd::Zero(e, d));
    }
    model.path_weights_.push_back(std::move(pw));
  }
  const Eigen::Index concat =
      model.paths_.empty() ? d : static_cast<Eigen::Index>(model.paths_.size()) * e;
  model.readout_ = glorot(2, concat);
  model.readout_bias_ = Eigen::VectorXd::Zero(2);
  return model;
}

std::vector<double> MpsGnnModel::probabilities(
    const HeteroGraph& g, std::span<const NodeId> targets) const {
  if (g.feature_dim() != feature_dim_) {
    throw DataError("graph feature dimension does not match the model");
  }
  std::vector<PathActivations> acts(paths_.size());
  for (std::size_t m = 0; m < paths_.size(); ++m) {
    const PathPlan plan = build_plan(g, targets, paths_[m]);
    forward_path(g, path_weights_[m], plan, use_skip_, acts[m]);
  }
  const Eigen::MatrixXd c = readout_input(g, targets, acts, embedding_dim_);
  const Eigen::MatrixXd z = (readout_ * c).colwise() + readout_bias_;
  const Eigen::MatrixXd p = softmax2(z);
  std::vector<double> out(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    out[i] = p(1, static_cast<Eigen::Index>(i));
  }
  return out;
}

std::vector<int> MpsGnnModel::predict(const HeteroGraph& g,
                                      std::span<const NodeId> targets) const {
  const std::vector<double> probs = probabilities(g, targets);
  std::vector<int> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) out[i] = probs[i] > 0.5 ? 1 : 0;
  return out;
}

void MpsGnnModel::save(const std::string& path, const HeteroGraph& g) const {
  json j;
  j["format"] = "mps-gnn-model";
  j["version"] = 1;
  j["feature_dim"] = feature_dim_;
  j["embedding_dim"] = embedding_dim_;
  j["use_skip"] = use_skip_;
  json jpaths = json::array();
  for (const MetaPath& mp : paths_) {
    json names = json::array();
    for (RelationId r : mp.relations) names.push_back(g.relation_name(r));
    jpaths.push_back(std::move(names));
  }
  j["paths"] = std::move(jpaths);
  json jweights = json::array();
  for (const PathWeights& pw : path_weights_) {
    json w;
    w["self"] = json::array();
    w["neigh"] = json::array();
    w["skip"] = json::array();
    for (const auto& m : pw.w_self) w["self"].push_back(matrix_to_json(m));
    for (const auto& m : pw.w_neigh) w["neigh"].push_back(matrix_to_json(m));
    for (const auto& m : pw.w_skip) w["skip"].push_back(matrix_to_json(m));
    jweights.push_back(std::move(w));
  }
  j["weights"] = std::move(jweights);
  j["readout"] = matrix_to_json(readout_);
  json bias = json::array();
  for (Eigen::Index i = 0; i < readout_bias_.size(); ++i) {
    bias.push_back(readout_bias_(i));
  }
  j["readout_bias"] = std::move(bias);

  std::ofstream out(path);
  if (!out) throw DataError("cannot write model checkpoint to '" + path + "'");
  out << j.dump(1) << "\n";
  if (!out.good()) throw DataError("failed writing checkpoint '" + path + "'");
}

MpsGnnModel MpsGnnModel::load(const std::string& path, const HeteroGraph& g) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model checkpoint '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("malformed model checkpoint '" + path + "': " + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "mps-gnn-model") {
      throw DataError("'" + path + "' is not a model checkpoint");
    }
    MpsGnnModel model;
    model.feature_dim_ = j.at("feature_dim").get<std::size_t>();
    model.embedding_dim_ = j.at("embedding_dim").get<int>();
    model.use_skip_ = j.at("use_skip").get<bool>();
    if (model.feature_dim_ != g.feature_dim()) {
      throw DataError("checkpoint feature dimension does not match the graph");
    }
    for (const json& names : j.at("paths")) {
      MetaPath mp;
      for (const json& name : names) {
        const auto r = g.find_relation(name.get<std::string>());
        if (!r) {
          throw DataError("checkpoint uses relation '" +
                          name.get<std::string>() +
                          "' which the graph does not define");
        }
        mp.relations.push_back(*r);
      }
      model.paths_.push_back(std::move(mp));
    }
    for (const json& w : j.at("weights")) {
      PathWeights pw;
      for (const json& m : w.at("self")) pw.w_self.push_back(matrix_from_json(m));
      for (const json& m : w.at("neigh")) pw.w_neigh.push_back(matrix_from_json(m));
      for (const json& m : w.at("skip")) pw.w_skip.push_back(matrix_from_json(m));
      model.path_weights_.push_back(std::move(pw));
    }
    model.readout_ = matrix_from_json(j.at("readout"));
    const json& bias = j.at("readout_bias");
    model.readout_bias_.resize(static_cast<Eigen::Index>(bias.size()));
    for (std::size_t i = 0; i < bias.size(); ++i) {
      model.readout_bias_(static_cast<Eigen::Index>(i)) = bias[i].get<double>();
    }
    if (model.paths_.size() != model.path_weights_.size()) {
      throw DataError("checkpoint path/weight count mismatch");
    }
    return model;
  } catch (const json::exception& e) {
    throw DataError("malformed model checkpoint '" + path + "': " + e.what());
  }
}

TrainedModel train_model(const HeteroGraph& g, std::span<const NodeId> targets,
                         std::span<const int> labels,
                         const std::vector<MetaPath>& paths,
                         const TrainConfig& config) {
  if (targets.size() != labels.size()) {
    throw DataError("target/label count mismatch");
  }
  if (targets.empty()) throw DataError("cannot train on an empty target set");

  const Split split = stratified_split(labels, config.train_fraction,
                                       config.val_fraction, config.seed);
  auto subset = [&](const std::vector<std::size_t>& idx) {
    std::pair<std::vector<NodeId>, std::vector<int>> out;
    out.first.reserve(idx.size());
    out.second.reserve(idx.size());
    for (std::size_t i : idx) {
      out.first.push_back(targets[i]);
      out.second.push_back(labels[i]);
    }
    return out;
  };
  const auto [train_nodes, train_labels] = subset(split.train);
  const auto [val_nodes, val_labels] = subset(split.val);
  const auto [test_nodes, test_labels] = subset(split.test);

  TrainedModel result;
  result.model = MpsGnnModel::init(g.feature_dim(), paths, config);
  result.report.degenerate_split = split.degenerate;
  MpsGnnModel& model = result.model;

  const std::size_t k = model.paths().size();
  std::vector<PathPlan> train_plans(k), val_plans(k), test_plans(k);
  for (std::size_t m = 0; m < k; ++m) {
    train_plans[m] = build_plan(g, train_nodes, model.paths()[m]);
    val_plans[m] = build_plan(g, val_nodes, model.paths()[m]);
    test_plans[m] = build_plan(g, test_nodes, model.paths()[m]);
  }

  // Gradients mirror the parameter layout so one flat Adam walk covers both.
  GradientSet grad_set = zero_gradients(model);
  auto& grads = grad_set.paths;
  auto& readout_grad = grad_set.readout;
  auto& bias_grad = grad_set.bias;

  std::vector<ParamView> param_views = collect_views(
      model.path_weights(), model.readout(), model.readout_bias(), model.use_skip());
  const std::vector<ParamView> grad_views =
      collect_views(grads, readout_grad, bias_grad, model.use_skip());
  const std::ptrdiff_t n_params = total_size(param_views);
  std::vector<double> adam_m(n_params, 0.0), adam_v(n_params, 0.0);
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  // With sum aggregation and logistic layers the initial embeddings are nearly
  // constant across nodes, so some inits sit on a saddle where no positive is
  // ever predicted and validation F1 stays at exactly zero until patience
  // expires. A fresh draw almost always escapes; reinitializing is cheaper and
  // more robust than waiting out a dead basin. Partial fits (any nonzero
  // validation F1) are never restarted, so the rule only rescues dead starts.
  constexpr int kMaxSaddleRestarts = 2;
  int saddle_restarts = 0;

  auto eval_f1 = [&](const std::vector<PathPlan>& plans,
                     const std::vector<NodeId>& nodes,
                     const std::vector<int>& truth) {
    std::vector<PathActivations> acts(k);
    for (std::size_t m = 0; m < k; ++m) {
      forward_path(g, model.path_weights()[m], plans[m], model.use_skip(), acts[m]);
    }
    const Eigen::MatrixXd c = readout_input(g, nodes, acts, model.embedding_dim());
    const Eigen::MatrixXd p =
        softmax2((model.readout() * c).colwise() + model.readout_bias());
    std::vector<int> preds(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      preds[i] = p(1, static_cast<Eigen::Index>(i)) > 0.5 ? 1 : 0;
    }
    return f1_score(preds, truth);
  };

  double best_val = -1.0;
  std::vector<double> best_weights;
  snapshot(param_views, best_weights);
  int since_improvement = 0;
  int epoch = 0;
  int adam_step = 0;
  double last_loss = 0.0;

  const auto n_train = static_cast<double>(train_nodes.size());
  for (epoch = 1; epoch <= config.max_epochs; ++epoch) {
    // Forward over the training plan.
    std::vector<PathActivations> acts(k);
    for (std::size_t m = 0; m < k; ++m) {
      forward_path(g, model.path_weights()[m], train_plans[m], model.use_skip(), acts[m]);
    }
    const Eigen::MatrixXd c =
        readout_input(g, train_nodes, acts, model.embedding_dim());
    const Eigen::MatrixXd z = (model.readout() * c).colwise() + model.readout_bias();
    const Eigen::MatrixXd p = softmax2(z);

    double loss = 0.0;
    Eigen::MatrixXd dz(2, z.cols());
    for (Eigen::Index i = 0; i < z.cols(); ++i) {
      const int y = train_labels[static_cast<std::size_t>(i)];
      const double m = std::max(z(0, i), z(1, i));
      const double lse =
          m + std::log(std::exp(z(0, i) - m) + std::exp(z(1, i) - m));
      loss += (lse - z(y, i)) / n_train;
      dz(0, i) = (p(0, i) - (y == 0 ? 1.0 : 0.0)) / n_train;
      dz(1, i) = (p(1, i) - (y == 1 ? 1.0 : 0.0)) / n_train;
    }
    if (!std::isfinite(loss)) {
      throw NumericalError("training loss diverged at epoch " +
                           std::to_string(epoch));
    }
    last_loss = loss;

    // Backward.
    for (const ParamView& v : grad_views) std::fill(v.data, v.data + v.size, 0.0);
    readout_grad += dz * c.transpose();
    bias_grad += dz.rowwise().sum();
    const Eigen::MatrixXd dc = model.readout().transpose() * dz;
    for (std::size_t m = 0; m < k; ++m) {
      backward_path(model.path_weights()[m], train_plans[m], model.use_skip(),
                    acts[m],
                    dc.middleRows(static_cast<Eigen::Index>(m) * model.embedding_dim(),
                                  model.embedding_dim()),
                    grads[m]);
    }

    // Coupled weight decay and Adam.
    ++adam_step;
    const double corr1 = 1.0 - std::pow(kBeta1, adam_step);
    const double corr2 = 1.0 - std::pow(kBeta2, adam_step);
    std::ptrdiff_t at = 0;
    for (std::size_t vi = 0; vi < param_views.size(); ++vi) {
      double* w = param_views[vi].data;
      double* dw = grad_views[vi].data;
      for (std::ptrdiff_t i = 0; i < param_views[vi].size; ++i, ++at) {
        const double grad = dw[i] + config.weight_decay * w[i];
        adam_m[at] = kBeta1 * adam_m[at] + (1.0 - kBeta1) * grad;
        adam_v[at] = kBeta2 * adam_v[at] + (1.0 - kBeta2) * grad * grad;
        w[i] -= config.learning_rate * (adam_m[at] / corr1) /
                (std::sqrt(adam_v[at] / corr2) + kEps);
      }
    }

    const double val_f1 = eval_f1(val_plans, val_nodes, val_labels);
    if (val_f1 > best_val) {
      best_val = val_f1;
      snapshot(param_views, best_weights);
      result.report.best_epoch = epoch;
      since_improvement = 0;
    } else if (++since_improvement >= config.patience) {
      if (best_val <= 0.0 && saddle_restarts < kMaxSaddleRestarts) {
        ++saddle_restarts;
        TrainConfig restarted = config;
        restarted.seed =
            derive_seed(config.seed, 0x5add1e00u + saddle_restarts);
        result.model = MpsGnnModel::init(g.feature_dim(), paths, restarted);
        param_views = collect_views(model.path_weights(), model.readout(),
                                    model.readout_bias(), model.use_skip());
        std::fill(adam_m.begin(), adam_m.end(), 0.0);
        std::fill(adam_v.begin(), adam_v.end(), 0.0);
        adam_step = 0;
        since_improvement = 0;
        snapshot(param_views, best_weights);
        continue;
      }
      break;
    }
  }
  restore(param_views, best_weights);

  result.report.epochs_run = std::min(epoch, config.max_epochs);
  result.report.final_train_loss = last_loss;
  result.report.train_f1 = eval_f1(train_plans, train_nodes, train_labels);
  result.report.val_f1 = eval_f1(val_plans, val_nodes, val_labels);
  result.report.test_f1 = eval_f1(test_plans, test_nodes, test_labels);
  return result;
}

double evaluate_f1(const MpsGnnModel& model, const HeteroGraph& g,
                   std::span<const NodeId> targets,
                   std::span<const int> labels) {
  const std::vector<int> preds = model.predict(g, targets);
  return f1_score(preds, labels);
}

std::vector<double> flatten_parameters(const MpsGnnModel& model) {
  std::vector<double> out;
  auto append = [&out](const Eigen::MatrixXd& m) {
    out.insert(out.end(), m.data(), m.data() + m.size());
  };
  for (const auto& pw : model.path_weights()) {
    for (const auto& w : pw.w_self) append(w);
    for (const auto& w : pw.w_neigh) append(w);
    if (model.use_skip()) {
      for (const auto& w : pw.w_skip) append(w);
    }
  }
  append(model.readout());
  const auto& bias = model.readout_bias();
  out.insert(out.end(), bias.data(), bias.data() + bias.size());
  return out;
}

void set_parameters(MpsGnnModel& model, const std::vector<double>& flat) {
  const std::vector<ParamView> views = collect_views(
      model.path_weights(), model.readout(), model.readout_bias(), model.use_skip());
  if (static_cast<std::ptrdiff_t>(flat.size()) != total_size(views)) {
    throw DataError("parameter vector size does not match the model");
  }
  restore(views, flat);
}

ModelGradient model_loss_gradient(const MpsGnnModel& model,
                                  const HeteroGraph& g,
                                  std::span<const NodeId> targets,
                                  std::span<const int> labels) {
  if (targets.size() != labels.size()) {
    throw DataError("target/label count mismatch");
  }
  if (targets.empty()) throw DataError("need at least one labeled target");

  const std::size_t k = model.paths().size();
  std::vector<PathActivations> acts(k);
  std::vector<PathPlan> plans(k);
  for (std::size_t m = 0; m < k; ++m) {
    plans[m] = build_plan(g, targets, model.paths()[m]);
    forward_path(g, model.path_weights()[m], plans[m], model.use_skip(), acts[m]);
  }
  const Eigen::MatrixXd c = readout_input(g, targets, acts, model.embedding_dim());
  const Eigen::MatrixXd z = (model.readout() * c).colwise() + model.readout_bias();
  const Eigen::MatrixXd p = softmax2(z);

  const auto n = static_cast<double>(targets.size());
  ModelGradient out;
  Eigen::MatrixXd dz(2, z.cols());
  for (Eigen::Index i = 0; i < z.cols(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y != 0 && y != 1) throw DataError("labels must be 0 or 1");
    const double m = std::max(z(0, i), z(1, i));
    const double lse = m + std::log(std::exp(z(0, i) - m) + std::exp(z(1, i) - m));
    out.loss += (lse - z(y, i)) / n;
    dz(0, i) = (p(0, i) - (y == 0 ? 1.0 : 0.0)) / n;
    dz(1, i) = (p(1, i) - (y == 1 ? 1.0 : 0.0)) / n;
  }

  GradientSet gs = zero_gradients(model);
  gs.readout += dz * c.transpose();
  gs.bias += dz.rowwise().sum();
  const Eigen::MatrixXd dc = model.readout().transpose() * dz;
  for (std::size_t m = 0; m < k; ++m) {
    backward_path(model.path_weights()[m], plans[m], model.use_skip(), acts[m],
                  dc.middleRows(static_cast<Eigen::Index>(m) * model.embedding_dim(),
                                model.embedding_dim()),
                  gs.paths[m]);
  }
  const std::vector<ParamView> views =
      collect_views(gs.paths, gs.readout, gs.bias, model.use_skip());
  snapshot(views, out.grad);
  return out;
}

}  // namespace mps
