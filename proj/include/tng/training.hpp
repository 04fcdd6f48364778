#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tng/model.hpp"

namespace tng {

struct SplitIndices {
  std::vector<int> train;
  std::vector<int> validation;
  std::vector<int> test;
};

// Disjoint covering split. Validation and test take floor(ratio * n) cells,
// the remainder goes to train. Deterministic in `seed`.
SplitIndices split_dataset(const ExpressionDataset& dataset, double train_ratio,
                           double val_ratio, double test_ratio, std::uint64_t seed);

struct Metrics {
  long tp = 0, fp = 0, tn = 0, fn = 0;
  double accuracy = 0.0;
  double recall = 0.0;
  double precision = 0.0;
  double specificity = 0.0;
  double f1 = 0.0;
  std::optional<double> auc;  // absent for single-class splits
  std::string auc_note;
};

struct PredictionRecord {
  std::string cell_id;
  int label = 0;
  double prob_positive = 0.0;
  int predicted = 0;
};

Metrics metrics_from_predictions(const std::vector<PredictionRecord>& predictions);

// Rank-based area under the ROC curve with midrank tie handling; absent (with
// a reason) when only one class is present.
std::optional<double> rank_auc(const std::vector<PredictionRecord>& predictions,
                               std::string* note);

struct EvalResult {
  Metrics metrics;
  std::vector<PredictionRecord> predictions;
};

// Threshold 0.5 on the positive-class probability. Pure: repeated calls
// agree bitwise.
EvalResult evaluate(const ParamStore& params, const TrainConfig& config,
                    const ModelInputs& inputs, const ExpressionDataset& dataset,
                    const std::vector<int>& cell_indices);

// Adaptive-moment optimizer with bias correction.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                         double eps = 1e-8);
  void step(ParamStore& params, const std::map<std::string, Matrix>& grads);

 private:
  double learning_rate_, beta1_, beta2_, eps_;
  int t_ = 0;
  std::map<std::string, Matrix> first_moment_, second_moment_;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  std::optional<double> val_auc;
};

struct TrainResult {
  ParamStore params;  // best validation accuracy (initial params if 0 epochs)
  std::vector<EpochStats> history;
  SplitIndices split;
  int best_epoch = 0;
};

// Minimizes mean cross-entropy with Adam; splits internally from
// config.split_* and config.seed; fully deterministic in the seed.
TrainResult train(const TrainConfig& config, const GeneGraph& graph, const PathList& paths,
                  const ExpressionDataset& dataset, const EmbeddingStore& store);

struct Checkpoint {
  TrainConfig config;
  ParamStore params;
  std::uint64_t graph_fingerprint = 0;
  std::uint64_t path_fingerprint = 0;
};

void save_checkpoint(const ParamStore& params, const TrainConfig& config,
                     const GeneGraph& graph, const PathList& paths, const std::string& file);
Checkpoint load_checkpoint(const std::string& file);
// Load refusing checkpoints built against a different graph or path list.
Checkpoint load_checkpoint(const std::string& file, const GeneGraph& graph,
                           const PathList& paths);

void save_history(const std::vector<EpochStats>& history, const std::string& file);

}  // namespace tng
