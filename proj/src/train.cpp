#include "wagf/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>
#include <unordered_map>

#include "wagf/errors.hpp"
#include "wagf/init.hpp"
#include "wagf/ops.hpp"

WAGF_BEGIN_NAMESPACE

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min(std::max<std::size_t>(threads, 1), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

nlohmann::ordered_json EpochRecord::to_json() const {
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["train_loss"] = train_loss;
  j["train_accuracy"] = train_accuracy;
  j["val_loss"] = val_loss;
  j["val_accuracy"] = val_accuracy;
  j["val_macro_f1"] = val_macro_f1;
  return j;
}

namespace {

void require_classes(const Model& model, const LabeledDataset& ds, const char* what) {
  if (ds.num_classes() != model.config().num_classes) {
    throw DataError(std::string(what) + ": dataset has " + std::to_string(ds.num_classes()) +
                    " classes, model expects " + std::to_string(model.config().num_classes));
  }
}

int argmax(const Tensor& t) {
  return static_cast<int>(std::max_element(t.data().begin(), t.data().end()) - t.data().begin());
}

}  // namespace

Evaluation evaluate(const Model& model, const FusionState& fusion, const LabeledDataset& ds, std::size_t threads) {
  require_classes(model, ds, "evaluate");
  Evaluation ev;
  const std::size_t n = ds.size();
  ev.predictions.assign(n, 0);
  ev.probabilities.assign(n, Tensor());
  std::vector<double> losses(n, 0.0);
  parallel_for(n, threads, [&](std::size_t i) {
    const Tensor logits = model.logits(ds.images[i], fusion);
    ev.probabilities[i] = probabilities(logits);
    ev.predictions[i] = argmax(logits);
    losses[i] = -std::log(std::max(static_cast<double>(ev.probabilities[i][static_cast<std::size_t>(ds.labels[i])]), 1e-300));
  });
  ev.mean_loss = n == 0 ? 0.0 : std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(n);
  ev.metrics = compute_metrics(ds.labels, ev.predictions, model.config().num_classes);
  return ev;
}

Trainer::Trainer(Model& model, FusionState& fusion, const TrainOptions& options)
    : model_(model), fusion_(fusion), options_(options), params_(model.parameters()) {
  AdamOptions adam;
  adam.learning_rate = options.learning_rate;
  for (const auto* p : params_) adam_.emplace_back(p->value.shape(), adam);
}

Trainer::StepResult Trainer::step(const LabeledDataset& ds, std::span<const std::size_t> batch) {
  const std::size_t B = batch.size();
  if (B == 0) throw std::invalid_argument("Trainer::step: empty batch");
  std::unordered_map<const Parameter*, std::size_t> slot;
  for (std::size_t i = 0; i < params_.size(); ++i) slot[params_[i]] = i;
  const bool fusion_on = model_.config().fusion_enabled;

  struct SampleGrad {
    std::vector<Tensor> grads;
    Tensor g_wav, g_sa;
    double loss = 0;
    int prediction = 0;
  };
  std::vector<SampleGrad> results(B);
  const Real seed = Real(1) / static_cast<Real>(B);
  parallel_for(B, options_.threads, [&](std::size_t s) {
    const std::size_t idx = batch[s];
    Tape tape;
    tape.set_checked(options_.checked);
    const auto pass = model_.forward(tape, ds.images.at(idx), fusion_);
    const int label = ds.labels.at(idx);
    Var loss = cross_entropy(pass.logits, std::span<const int>(&label, 1));
    tape.backward(loss, seed);
    auto& r = results[s];
    r.loss = static_cast<double>(tape.value(loss)[0]);
    r.prediction = argmax(tape.value(pass.logits));
    r.grads.resize(params_.size());
    for (const auto& pg : tape.parameter_grads()) {
      if (pg.grad) r.grads[slot.at(pg.param)] = *pg.grad;
    }
    if (fusion_on) {
      r.g_wav = tape.grad(pass.f_wav);
      r.g_sa = tape.grad(pass.f_sa);
    }
  });

  StepResult out;
  for (const auto& r : results) {
    if (!std::isfinite(r.loss)) throw NumericError("non-finite training loss at step " + std::to_string(steps_));
  }
  for (auto* p : params_) p->zero_grad();
  Tensor mag_wav, mag_sa;
  if (fusion_on) {
    mag_wav = Tensor::zeros(fusion_.g_w_ema.shape());
    mag_sa = Tensor::zeros(fusion_.g_sa_ema.shape());
  }
  double loss_sum = 0;
  for (const auto& r : results) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (r.grads[i].empty()) continue;
      auto& g = params_[i]->grad;
      for (std::size_t e = 0; e < g.size(); ++e) g[e] += r.grads[i][e];
    }
    if (fusion_on) {
      for (std::size_t e = 0; e < mag_wav.size(); ++e) {
        mag_wav[e] += std::abs(r.g_wav[e]);
        mag_sa[e] += std::abs(r.g_sa[e]);
      }
    }
    loss_sum += r.loss;
    out.predictions.push_back(r.prediction);
  }
  for (std::size_t i = 0; i < params_.size(); ++i) adam_step(*params_[i], adam_[i]);
  if (fusion_on) update_fusion_state(fusion_, mag_wav, mag_sa);
  ++steps_;
  out.mean_loss = loss_sum / static_cast<double>(B);
  return out;
}

TrainResult train(Model& model, FusionState& fusion, const LabeledDataset& train_set, const LabeledDataset& val_set,
                  const TrainOptions& options, const EpochCallback& on_epoch) {
  if (options.batch_size == 0) throw ConfigError("train: batch_size must be positive");
  if (train_set.size() == 0) throw DataError("train: empty training set");
  require_classes(model, train_set, "train");
  require_classes(model, val_set, "train");
  Trainer trainer(model, fusion, options);
  TrainResult result;
  std::vector<Tensor> best_params;
  FusionState best_fusion = fusion;
  std::vector<std::size_t> order(train_set.size());

  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(options.seed, "epoch/" + std::to_string(epoch)));
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      std::span<const std::size_t> batch(order.data() + start, end - start);
      const auto step = trainer.step(train_set, batch);
      loss_sum += step.mean_loss * static_cast<double>(batch.size());
      for (std::size_t s = 0; s < batch.size(); ++s)
        if (step.predictions[s] == train_set.labels[batch[s]]) ++correct;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
    if (val_set.size() > 0) {
      const auto ev = evaluate(model, fusion, val_set, options.threads);
      rec.val_loss = ev.mean_loss;
      rec.val_accuracy = ev.metrics.accuracy;
      rec.val_macro_f1 = ev.metrics.macro_f1;
    }
    const bool improved = rec.val_macro_f1 > result.best_val_f1;
    if (improved) {
      result.best_val_f1 = rec.val_macro_f1;
      result.best_epoch = epoch;
      best_params.clear();
      for (const auto* p : model.parameters()) best_params.push_back(p->value);
      best_fusion = fusion;
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec, improved);
  }
  if (options.restore_best && !best_params.empty()) {
    auto params = model.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best_params[i];
    fusion = best_fusion;
  }
  return result;
}

WAGF_END_NAMESPACE
