#pragma once

#include <string>
#include <vector>

#include "viref/adam.hpp"
#include "viref/dataset.hpp"
#include "viref/model.hpp"

namespace viref {

struct TrainConfig {
  double lr = 1e-4;
  int batch_size = 10;
  int max_epochs = 200;
  int patience = 5;          // epochs without val improvement
  uint64_t seed = 0;
  int max_len = 25;          // referring expressions at or past this drop
  bool dropout_enabled = true;
  long max_steps = 0;        // optional hard cap on optimizer steps (0 = off)

  void validate() const {
    if (batch_size < 1) fail(ErrorKind::config, "train: batch size >= 1");
    if (patience < 1) fail(ErrorKind::config, "train: patience >= 1");
    if (max_epochs < 1) fail(ErrorKind::config, "train: max_epochs >= 1");
    if (lr < 0.0) fail(ErrorKind::config, "train: negative learning rate");
  }
};

// One training example: a record and one of its referring expressions.
struct TrainItem {
  int record = 0;
  int refexp = 0;
};

// Items of one split, filtered at max_len; refexp_limit > 0 keeps only the
// first expressions of each record.
std::vector<TrainItem> split_items(const Dataset& ds, const Vocabulary& vocab,
                                   Split split, int max_len,
                                   int refexp_limit = 0);

struct TrainResult {
  std::vector<double> train_loss;  // per-token CE per epoch (train pass)
  std::vector<double> val_loss;    // per-token CE per epoch (eval mode)
  int best_epoch = -1;             // epoch of the returned parameters
  long steps = 0;                  // optimizer steps taken
};

// Teacher-forced masked cross-entropy with Adam and early stopping on the
// validation loss. The model keeps the best-validation parameters on
// return.
TrainResult train(ModelVariant<float>& model, const Dataset& ds,
                  FeatureCache& cache, const Vocabulary& vocab,
                  const std::vector<TrainItem>& train_items,
                  const std::vector<TrainItem>& val_items,
                  const TrainConfig& cfg);

// Per-token cross entropy of a set of items, eval mode.
double items_cross_entropy(ModelVariant<float>& model, const Dataset& ds,
                           FeatureCache& cache, const Vocabulary& vocab,
                           const std::vector<TrainItem>& items);

void save_loss_history(const std::vector<double>& values,
                       const std::string& path);

}  // namespace viref
