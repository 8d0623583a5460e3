#pragma once

// Optimization: Adam, homoscedastic-uncertainty task weighting, task losses,
// multi-domain pretraining / fine-tuning loops and evaluation metrics.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "datasets.hpp"
#include "model.hpp"

namespace wq4ts {

struct AdamState {
  long step_count = 0;
  double lr = 1e-4, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  ModelParams m, v;
  // Moments of the task log-variances.
  std::vector<double> task_m, task_v;
};

AdamState make_adam(const ModelParams& params, double lr);

// Bias-corrected Adam update of every parameter tensor.
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state);

// One Adam update of a flat vector, with t the 1-based step number.
void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, const AdamState& hyper, long t);

struct TaskWeights {
  std::vector<double> log_var;  // s_i; weight alpha_i = exp(-s_i)
};

struct MultiTaskLoss {
  double value = 0.0;
  std::vector<double> d_losses;   // dL / dL_i = exp(-s_i)
  std::vector<double> d_log_var;  // dL / ds_i = 1 - exp(-s_i) L_i
};

// L = sum_i exp(-s_i) L_i + s_i.
MultiTaskLoss multi_task_loss(std::span<const double> losses, const TaskWeights& weights);

struct LossGrad {
  double value = 0.0;
  Vec grad;
};

LossGrad mse_loss(const Vec& pred, std::span<const double> target);
// MSE restricted to positions where mask is non-zero.
LossGrad masked_loss(const Vec& pred, std::span<const double> target, std::span<const std::uint8_t> mask);
LossGrad cross_entropy(const Vec& logits, int label);

struct TrainConfig {
  double lr = 1e-4;
  int batch_size = 32;
  int max_epochs = 10;
  int patience = 3;
  long max_steps = 0;  // 0: unlimited
  std::uint64_t seed = 0;
  double fewshot_fraction = 1.0;

  void validate() const;
};

// Train and validation windows of one domain, routed to one model head.
struct DomainTask {
  std::string name;
  WindowSet train;
  WindowSet val;
  int head = 0;
};

struct EpochRecord {
  int epoch = 0;
  long steps = 0;
  std::vector<double> train_loss;  // per domain
  std::vector<double> val_loss;    // per domain, NaN when a domain has no validation windows
  double mean_val_loss = 0.0;
  std::vector<double> task_weights;
};

struct TrainResult {
  ModelParams params;  // best-validation parameters
  std::vector<std::string> domains;
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  long steps = 0;
  bool early_stopped = false;
  TaskWeights weights;
};

// Per-sample model input; imputation windows are standardized by their
// observed points and hidden points set to zero.
struct PreparedInput {
  std::vector<double> input;
  double shift = 0.0;
  double scale = 1.0;
};
PreparedInput prepare_input(const WindowSample& s, WindowTask task);

// Forward + loss for one sample. When grads is non-null, accumulates
// weight * d(loss)/d(params).
double sample_step(const WindowSample& s, WindowTask task, const Wavebook* book, const ModelParams& params,
                   int head, ModelParams* grads, double weight);

// Multi-domain training with learnable task weights (active with >= 2
// domains), seeded shuffling, early stopping on the mean validation loss.
TrainResult pretrain_multi_domain(const std::vector<DomainTask>& domains, ModelParams init,
                                  const Wavebook* book, const TrainConfig& cfg);

TrainResult train_supervised(const DomainTask& domain, ModelParams init, const Wavebook* book,
                             const TrainConfig& cfg);

// Continues training every parameter on (a few-shot subset of) the target.
TrainResult finetune(const ModelParams& pretrained, const DomainTask& target, const Wavebook* book,
                     const TrainConfig& cfg);

struct Metrics {
  WindowTask task = WindowTask::kForecast;
  std::size_t samples = 0;
  double loss = 0.0;
  double mse = 0.0, mae = 0.0;
  double accuracy = 0.0, precision = 0.0, recall = 0.0, f1 = 0.0;
};

Metrics evaluate(const ModelParams& params, const Wavebook* book, const WindowSet& windows, int head = 0);

// Classification scores from predictions (macro averages over classes that
// appear in either vector; precision of a never-predicted class is 0).
Metrics classification_metrics(std::span<const int> predicted, std::span<const int> actual, int num_classes);

}  // namespace wq4ts
