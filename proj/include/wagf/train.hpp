#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "json.hpp"
#include "wagf/dataset.hpp"
#include "wagf/fusion.hpp"
#include "wagf/metrics.hpp"
#include "wagf/model.hpp"
#include "wagf/optim.hpp"

WAGF_BEGIN_NAMESPACE

struct TrainOptions {
  std::size_t epochs = 25;
  std::size_t batch_size = 32;
  Real learning_rate = Real(0.01);
  std::uint64_t seed = 0;
  /// Worker threads for per-sample forward/backward. Gradients are reduced
  /// in sample order, so results do not depend on this value.
  std::size_t threads = 1;
  bool checked = false;
  /// Reload the best-validation parameters and fusion state after training.
  bool restore_best = true;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0;
  double train_accuracy = 0;
  double val_loss = 0;
  double val_accuracy = 0;
  double val_macro_f1 = 0;

  nlohmann::ordered_json to_json() const;
};

struct Evaluation {
  std::vector<int> predictions;
  std::vector<Tensor> probabilities;  // [K] per sample
  double mean_loss = 0;
  MetricsReport metrics;
};

/// Forward-only pass over a dataset.
Evaluation evaluate(const Model& model, const FusionState& fusion, const LabeledDataset& ds,
                    std::size_t threads = 1);

/// Single optimisation step over `batch` (indices into ds): per-sample
/// forward/backward, ordered gradient reduction, Adam, fusion-state update.
class Trainer {
 public:
  Trainer(Model& model, FusionState& fusion, const TrainOptions& options);

  struct StepResult {
    double mean_loss = 0;
    std::vector<int> predictions;
  };
  StepResult step(const LabeledDataset& ds, std::span<const std::size_t> batch);

  std::uint64_t steps() const { return steps_; }

 private:
  Model& model_;
  FusionState& fusion_;
  TrainOptions options_;
  std::vector<Parameter*> params_;
  std::vector<AdamState> adam_;
  std::uint64_t steps_ = 0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_f1 = -1;
};

/// Called after every epoch; `improved` is true when validation macro F1
/// beat every earlier epoch (the first epoch always counts).
using EpochCallback = std::function<void(const EpochRecord&, bool improved)>;

TrainResult train(Model& model, FusionState& fusion, const LabeledDataset& train_set,
                  const LabeledDataset& val_set, const TrainOptions& options, const EpochCallback& on_epoch = {});

/// Runs fn(i) for i in [0,n) on up to `threads` workers.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

WAGF_END_NAMESPACE
