#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mps/graph.hpp"

namespace mps {

struct TrainConfig {
  int embedding_dim = 32;
  int max_epochs = 500;
  int patience = 50;          // epochs without validation-F1 improvement
  double learning_rate = 0.01;
  double weight_decay = 5e-4;  // coupled: added to the gradient
  bool use_skip = true;        // per-layer skip from the raw input features
  double train_fraction = 0.7;
  double val_fraction = 0.2;   // test gets the remainder
  std::uint64_t seed = 0;
};

// Index-based split of a labeled target list. When the population is too
// small to stratify (an empty part, or a training/validation part that lost
// one of the classes), the split degenerates to train-on-all/eval-on-train
// and is flagged as such.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
  bool degenerate = false;
};

Split stratified_split(std::span<const int> labels, double train_fraction,
                       double val_fraction, std::uint64_t seed);

// Binary F1 of the positive class; 0 when precision + recall is 0.
double f1_score(std::span<const int> predicted, std::span<const int> actual);

// Node classifier structured by a set of meta-paths. Each meta-path gets its
// own stack of layers, one per relation, consumed back to front: layer l
// aggregates over relation r_{L-l}, so the receptive field of a target is
// exactly its occurrence tree. Per layer,
//
//   h^{l+1}(v) = sigma(W_self h^l(v) + W_neigh sum_u h^l(u) + W_skip x(v))
//
// with logistic sigma, h^0 = x, and u ranging over the r_{L-l}-successors of
// v that lie on a complete occurrence rooted at one of the evaluated targets
// (strictly: edges (v, r_j, u) with v forward-reachable from the target set
// at position j-1 and u able to finish the suffix). Outputs are therefore a
// function of the graph and the evaluated target set as a whole; they are
// per-target only when no target lies inside another target's tree, which is
// automatic when nothing links back into the target node type. The
// target embeddings of all meta-paths are concatenated into a linear softmax
// readout. With no meta-paths at all the readout runs on the raw features.
//
// Because aggregation never reads an edge outside the occurrence subgraph,
// deleting all such edges leaves every prediction bit-identical, which is
// what makes the learned meta-paths faithful explanations by construction.
class MpsGnnModel {
 public:
  struct PathWeights {
    std::vector<Eigen::MatrixXd> w_self;   // layer 0: E x D, later: E x E
    std::vector<Eigen::MatrixXd> w_neigh;  // shapes mirror w_self
    std::vector<Eigen::MatrixXd> w_skip;   // E x D (zero when skip disabled)
  };

  // Fresh Glorot-initialized model; deterministic in config.seed.
  static MpsGnnModel init(std::size_t feature_dim, std::vector<MetaPath> paths,
                          const TrainConfig& config);

  const std::vector<MetaPath>& paths() const { return paths_; }
  std::size_t feature_dim() const { return feature_dim_; }
  int embedding_dim() const { return embedding_dim_; }
  bool use_skip() const { return use_skip_; }

  // Class-1 probabilities / hard labels, one per target.
  std::vector<double> probabilities(const HeteroGraph& g,
                                    std::span<const NodeId> targets) const;
  std::vector<int> predict(const HeteroGraph& g,
                           std::span<const NodeId> targets) const;

  // Checkpoint round-trip. Relations are stored by name and re-resolved
  // against the graph on load; a mismatch raises DataError.
  void save(const std::string& path, const HeteroGraph& g) const;
  static MpsGnnModel load(const std::string& path, const HeteroGraph& g);

  std::vector<PathWeights>& path_weights() { return path_weights_; }
  Eigen::MatrixXd& readout() { return readout_; }
  Eigen::VectorXd& readout_bias() { return readout_bias_; }
  const std::vector<PathWeights>& path_weights() const { return path_weights_; }
  const Eigen::MatrixXd& readout() const { return readout_; }
  const Eigen::VectorXd& readout_bias() const { return readout_bias_; }

 private:
  std::size_t feature_dim_ = 0;
  int embedding_dim_ = 0;
  bool use_skip_ = true;
  std::vector<MetaPath> paths_;
  std::vector<PathWeights> path_weights_;
  Eigen::MatrixXd readout_;       // 2 x (K * E), or 2 x D when K == 0
  Eigen::VectorXd readout_bias_;  // 2
};

struct TrainReport {
  double train_f1 = 0.0;
  double val_f1 = 0.0;
  double test_f1 = 0.0;
  double final_train_loss = 0.0;
  int best_epoch = 0;
  int epochs_run = 0;
  bool degenerate_split = false;
};

struct TrainedModel {
  MpsGnnModel model;
  TrainReport report;
};

// Full-batch Adam training of a fresh model on a stratified split of the
// given targets, with early stopping on validation F1 (best weights are
// restored). An init whose validation F1 is still exactly zero when patience
// expires is treated as a dead start and reinitialized from a derived seed
// (at most twice) rather than returned. Deterministic in config.seed.
TrainedModel train_model(const HeteroGraph& g, std::span<const NodeId> targets,
                         std::span<const int> labels,
                         const std::vector<MetaPath>& paths,
                         const TrainConfig& config);

// F1 of model predictions against the given labels.
double evaluate_f1(const MpsGnnModel& model, const HeteroGraph& g,
                   std::span<const NodeId> targets,
                   std::span<const int> labels);

// All trainable coefficients in a fixed flat order (skip weights are part of
// the order only when the model trains them). set_parameters inverts
// flatten_parameters; sizes must match exactly.
std::vector<double> flatten_parameters(const MpsGnnModel& model);
void set_parameters(MpsGnnModel& model, const std::vector<double>& flat);

// Mean softmax negative log-likelihood on (targets, labels) plus its
// gradient in flatten_parameters order, computed with the same passes the
// trainer runs (no weight decay). Exposed so the backward pass can be
// finite-difference checked.
struct ModelGradient {
  double loss = 0.0;
  std::vector<double> grad;
};

ModelGradient model_loss_gradient(const MpsGnnModel& model,
                                  const HeteroGraph& g,
                                  std::span<const NodeId> targets,
                                  std::span<const int> labels);

}  // namespace mps
