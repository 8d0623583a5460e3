#include "training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "error.hpp"

namespace wq4ts {
namespace {

WindowTask task_of(HeadKind kind) {
  switch (kind) {
    case HeadKind::kForecast: return WindowTask::kForecast;
    case HeadKind::kImpute: return WindowTask::kImpute;
    case HeadKind::kClassify: return WindowTask::kClassify;
  }
  return WindowTask::kForecast;
}

void check_head(const ModelParams& params, const DomainTask& d) {
  if (d.head < 0 || d.head >= static_cast<int>(params.heads.size()))
    throw ConfigError("domain '" + d.name + "' routed to a missing head");
  if (task_of(params.heads[d.head].spec.kind) != d.train.task())
    throw ConfigError("domain '" + d.name + "' task does not match its head");
}

double mean_loss(const ModelParams& params, const Wavebook* book, const WindowSet& ws, int head) {
  if (ws.empty()) return std::numeric_limits<double>::quiet_NaN();
  double acc = 0.0;
  for (std::size_t i = 0; i < ws.size(); ++i)
    acc += sample_step(ws.at(i), ws.task(), book, params, head, nullptr, 0.0);
  return acc / static_cast<double>(ws.size());
}

}  // namespace

AdamState make_adam(const ModelParams& params, double lr) {
  AdamState s;
  s.lr = lr;
  s.m = zeros_like(params);
  s.v = zeros_like(params);
  return s;
}

void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, const AdamState& h, long t) {
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * grad[i];
    v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * grad[i] * grad[i];
    param[i] -= h.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + h.eps);
  }
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state) {
  std::vector<std::span<double>> p, m, v;
  std::vector<std::span<const double>> g;
  auto collect = [](auto& out) {
    return [&out](const char*, auto& t) { out.emplace_back(t.data(), static_cast<std::size_t>(t.size())); };
  };
  for_each_tensor(params, collect(p));
  for_each_tensor(grads, collect(g));
  for_each_tensor(state.m, collect(m));
  for_each_tensor(state.v, collect(v));
  if (p.size() != g.size() || p.size() != m.size() || p.size() != v.size())
    throw ShapeError("adam_step: tensor count mismatch");
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i].size() != g[i].size() || p[i].size() != m[i].size() || p[i].size() != v[i].size())
      throw ShapeError("adam_step: tensor shape mismatch");
  ++state.step_count;
  for (std::size_t i = 0; i < p.size(); ++i) adam_update(p[i], g[i], m[i], v[i], state, state.step_count);
}

MultiTaskLoss multi_task_loss(std::span<const double> losses, const TaskWeights& weights) {
  if (losses.size() != weights.log_var.size())
    throw ShapeError("multi_task_loss: one log-variance per task is required");
  MultiTaskLoss out;
  out.d_losses.resize(losses.size());
  out.d_log_var.resize(losses.size());
  for (std::size_t i = 0; i < losses.size(); ++i) {
    const double s = weights.log_var[i];
    const double w = std::exp(-s);
    out.value += w * losses[i] + s;
    out.d_losses[i] = w;
    out.d_log_var[i] = 1.0 - w * losses[i];
  }
  return out;
}

LossGrad mse_loss(const Vec& pred, std::span<const double> target) {
  if (static_cast<std::size_t>(pred.size()) != target.size() || target.empty())
    throw ShapeError("mse_loss: prediction and target lengths differ");
  LossGrad out;
  out.grad.resize(pred.size());
  const double n = static_cast<double>(target.size());
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const double d = pred(i) - target[i];
    out.value += d * d / n;
    out.grad(i) = 2.0 * d / n;
  }
  return out;
}

LossGrad masked_loss(const Vec& pred, std::span<const double> target, std::span<const std::uint8_t> mask) {
  if (static_cast<std::size_t>(pred.size()) != target.size() || mask.size() != target.size())
    throw ShapeError("masked_loss: prediction, target and mask lengths differ");
  const auto count = static_cast<double>(std::count_if(mask.begin(), mask.end(), [](auto b) { return b != 0; }));
  if (count == 0.0) throw EmptyMaskError("masked_loss: mask selects no positions");
  LossGrad out;
  out.grad = Vec::Zero(pred.size());
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    if (!mask[i]) continue;
    const double d = pred(i) - target[i];
    out.value += d * d / count;
    out.grad(i) = 2.0 * d / count;
  }
  return out;
}

LossGrad cross_entropy(const Vec& logits, int label) {
  if (label < 0 || label >= logits.size()) throw ShapeError("cross_entropy: label out of range");
  const double mx = logits.maxCoeff();
  const Vec e = (logits.array() - mx).exp();
  const double z = e.sum();
  LossGrad out;
  out.grad = e / z;
  out.value = -(logits(label) - mx - std::log(z));
  out.grad(label) -= 1.0;
  return out;
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("train.lr must be positive");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (max_epochs < 1) throw ConfigError("train.max_epochs must be >= 1");
  if (patience < 1) throw ConfigError("train.patience must be >= 1");
  if (max_steps < 0) throw ConfigError("train.max_steps must be >= 0");
  if (!(fewshot_fraction > 0.0 && fewshot_fraction <= 1.0))
    throw ConfigError("train.fewshot_fraction must be in (0, 1]");
}

PreparedInput prepare_input(const WindowSample& s, WindowTask task) {
  PreparedInput p;
  p.input = s.input;
  if (task != WindowTask::kImpute) return p;
  double sum = 0.0, count = 0.0;
  for (std::size_t t = 0; t < s.input.size(); ++t)
    if (!s.mask[t]) {
      sum += s.input[t];
      count += 1.0;
    }
  if (count > 0.0) {
    const double mean = sum / count;
    double sq = 0.0;
    for (std::size_t t = 0; t < s.input.size(); ++t)
      if (!s.mask[t]) sq += (s.input[t] - mean) * (s.input[t] - mean);
    const double sd = std::sqrt(sq / count);
    p.shift = mean;
    p.scale = sd > 1e-8 ? sd : 1.0;
  }
  for (std::size_t t = 0; t < p.input.size(); ++t)
    p.input[t] = s.mask[t] ? 0.0 : (s.input[t] - p.shift) / p.scale;
  return p;
}

double sample_step(const WindowSample& s, WindowTask task, const Wavebook* book, const ModelParams& params,
                   int head, ModelParams* grads, double weight) {
  const PreparedInput prep = prepare_input(s, task);
  const ForwardCache cache = model_forward(prep.input, book, params, head);
  LossGrad lg;
  switch (task) {
    case WindowTask::kForecast:
      lg = mse_loss(cache.output, s.target);
      break;
    case WindowTask::kImpute: {
      const Vec restored = cache.output.array() * prep.scale + prep.shift;
      lg = masked_loss(restored, s.target, s.mask);
      lg.grad *= prep.scale;
      break;
    }
    case WindowTask::kClassify:
      lg = cross_entropy(cache.output, s.label);
      break;
  }
  if (!std::isfinite(lg.value)) throw NumericError("non-finite loss");
  if (grads != nullptr && weight != 0.0) model_backward(cache, params, weight * lg.grad, *grads);
  return lg.value;
}

TrainResult pretrain_multi_domain(const std::vector<DomainTask>& domains, ModelParams init, const Wavebook* book,
                                  const TrainConfig& cfg) {
  cfg.validate();
  if (domains.empty()) throw EmptyDomainError("pretraining needs at least one domain");
  for (const auto& d : domains) {
    if (d.train.empty()) throw EmptyDomainError("domain '" + d.name + "' has no training windows");
    if (d.train.lookback() != init.config.length)
      throw ShapeError("domain '" + d.name + "' lookback differs from the model window length");
    check_head(init, d);
  }

  const std::size_t n_domains = domains.size();
  const bool weighted = n_domains > 1;

  TrainResult result;
  for (const auto& d : domains) result.domains.push_back(d.name);
  result.weights.log_var.assign(n_domains, 0.0);

  ModelParams params = std::move(init);
  AdamState adam = make_adam(params, cfg.lr);
  adam.task_m.assign(n_domains, 0.0);
  adam.task_v.assign(n_domains, 0.0);
  ModelParams grads = zeros_like(params);

  std::vector<std::pair<std::uint32_t, std::uint32_t>> pool;  // (domain, window)
  for (std::size_t d = 0; d < n_domains; ++d)
    for (std::size_t i = 0; i < domains[d].train.size(); ++i)
      pool.emplace_back(static_cast<std::uint32_t>(d), static_cast<std::uint32_t>(i));

  std::mt19937_64 rng(cfg.seed);
  double best_val = std::numeric_limits<double>::infinity();
  ModelParams best = params;
  int stale = 0;
  bool out_of_steps = false;

  for (int epoch = 1; epoch <= cfg.max_epochs && !out_of_steps; ++epoch) {
    std::shuffle(pool.begin(), pool.end(), rng);
    std::vector<double> epoch_loss(n_domains, 0.0), epoch_count(n_domains, 0.0);

    for (std::size_t begin = 0; begin < pool.size(); begin += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(pool.size(), begin + static_cast<std::size_t>(cfg.batch_size));
      std::vector<double> count(n_domains, 0.0), loss(n_domains, 0.0);
      for (std::size_t k = begin; k < end; ++k) count[pool[k].first] += 1.0;

      std::vector<double> alpha(n_domains, 1.0);
      if (weighted)
        for (std::size_t d = 0; d < n_domains; ++d) alpha[d] = std::exp(-result.weights.log_var[d]);

      for_each_tensor(grads, [](const char*, auto& t) { t.setZero(); });
      for (std::size_t k = begin; k < end; ++k) {
        const auto [d, i] = pool[k];
        const auto& dom = domains[d];
        const double w = alpha[d] / count[d];
        loss[d] += sample_step(dom.train.at(i), dom.train.task(), book, params, dom.head, &grads, w) / count[d];
      }
      adam_step(params, grads, adam);

      if (weighted) {
        // Only domains present in the batch contribute a term.
        std::vector<double> present_loss, g;
        TaskWeights present;
        std::vector<std::size_t> idx;
        for (std::size_t d = 0; d < n_domains; ++d)
          if (count[d] > 0.0) {
            idx.push_back(d);
            present_loss.push_back(loss[d]);
            present.log_var.push_back(result.weights.log_var[d]);
          }
        const MultiTaskLoss mtl = multi_task_loss(present_loss, present);
        for (std::size_t k = 0; k < idx.size(); ++k) {
          const std::size_t d = idx[k];
          std::span<double> s(&result.weights.log_var[d], 1);
          std::span<const double> gs(&mtl.d_log_var[k], 1);
          adam_update(s, gs, std::span<double>(&adam.task_m[d], 1), std::span<double>(&adam.task_v[d], 1), adam,
                      adam.step_count);
        }
      }

      for (std::size_t d = 0; d < n_domains; ++d) {
        epoch_loss[d] += loss[d] * count[d];
        epoch_count[d] += count[d];
      }
      ++result.steps;
      if (cfg.max_steps > 0 && result.steps >= cfg.max_steps) {
        out_of_steps = true;
        break;
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.steps = result.steps;
    double val_sum = 0.0, val_n = 0.0;
    for (std::size_t d = 0; d < n_domains; ++d) {
      rec.train_loss.push_back(epoch_count[d] > 0.0 ? epoch_loss[d] / epoch_count[d]
                                                     : std::numeric_limits<double>::quiet_NaN());
      const double v = mean_loss(params, book, domains[d].val, domains[d].head);
      rec.val_loss.push_back(v);
      if (!std::isnan(v)) {
        val_sum += v;
        val_n += 1.0;
      }
    }
    // Without any validation windows the training loss drives model selection.
    if (val_n == 0.0)
      for (double t : rec.train_loss)
        if (!std::isnan(t)) {
          val_sum += t;
          val_n += 1.0;
        }
    rec.mean_val_loss = val_sum / val_n;
    rec.task_weights.resize(n_domains);
    for (std::size_t d = 0; d < n_domains; ++d)
      rec.task_weights[d] = weighted ? std::exp(-result.weights.log_var[d]) : 1.0;
    result.history.push_back(rec);

    if (!std::isfinite(rec.mean_val_loss)) throw NumericError("validation loss is not finite");
    if (rec.mean_val_loss < best_val) {
      best_val = rec.mean_val_loss;
      best = params;
      result.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      result.early_stopped = true;
      break;
    }
  }

  result.params = std::move(best);
  return result;
}

TrainResult train_supervised(const DomainTask& domain, ModelParams init, const Wavebook* book,
                             const TrainConfig& cfg) {
  return pretrain_multi_domain({domain}, std::move(init), book, cfg);
}

TrainResult finetune(const ModelParams& pretrained, const DomainTask& target, const Wavebook* book,
                     const TrainConfig& cfg) {
  cfg.validate();
  if (target.train.empty()) throw EmptyDomainError("target domain '" + target.name + "' has no training windows");
  DomainTask subset = target;
  if (cfg.fewshot_fraction < 1.0) subset.train = target.train.fewshot(cfg.fewshot_fraction, cfg.seed);
  return train_supervised(subset, pretrained, book, cfg);
}

Metrics classification_metrics(std::span<const int> predicted, std::span<const int> actual, int num_classes) {
  if (predicted.size() != actual.size()) throw ShapeError("classification_metrics: length mismatch");
  if (actual.empty()) throw EmptySplitError("classification_metrics: no samples");
  Metrics m;
  m.task = WindowTask::kClassify;
  m.samples = actual.size();
  std::vector<double> tp(num_classes, 0.0), fp(num_classes, 0.0), fn(num_classes, 0.0);
  std::vector<bool> seen(num_classes, false);
  double correct = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const int p = predicted[i], a = actual[i];
    if (p < 0 || p >= num_classes || a < 0 || a >= num_classes)
      throw ShapeError("classification_metrics: class index out of range");
    seen[p] = seen[a] = true;
    if (p == a) {
      correct += 1.0;
      tp[a] += 1.0;
    } else {
      fp[p] += 1.0;
      fn[a] += 1.0;
    }
  }
  m.accuracy = correct / static_cast<double>(actual.size());
  double classes = 0.0;
  for (int k = 0; k < num_classes; ++k) {
    if (!seen[k]) continue;
    classes += 1.0;
    const double prec = tp[k] + fp[k] > 0.0 ? tp[k] / (tp[k] + fp[k]) : 0.0;
    const double rec = tp[k] + fn[k] > 0.0 ? tp[k] / (tp[k] + fn[k]) : 0.0;
    m.precision += prec;
    m.recall += rec;
    m.f1 += prec + rec > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
  }
  m.precision /= classes;
  m.recall /= classes;
  m.f1 /= classes;
  return m;
}

Metrics evaluate(const ModelParams& params, const Wavebook* book, const WindowSet& windows, int head) {
  if (windows.empty()) throw EmptySplitError("evaluate: no windows in the evaluation split");
  const WindowTask task = windows.task();
  if (head < 0 || head >= static_cast<int>(params.heads.size()) || task_of(params.heads[head].spec.kind) != task)
    throw ConfigError("evaluate: head does not match the window task");

  Metrics m;
  m.task = task;
  m.samples = windows.size();
  double se = 0.0, ae = 0.0, points = 0.0, loss = 0.0;
  std::vector<int> predicted, actual;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const WindowSample s = windows.at(i);
    const PreparedInput prep = prepare_input(s, task);
    const ForwardCache cache = model_forward(prep.input, book, params, head);
    if (task == WindowTask::kClassify) {
      Eigen::Index best = 0;
      cache.output.maxCoeff(&best);
      predicted.push_back(static_cast<int>(best));
      actual.push_back(s.label);
      loss += cross_entropy(cache.output, s.label).value;
      continue;
    }
    const Vec out = task == WindowTask::kImpute ? Vec(cache.output.array() * prep.scale + prep.shift) : cache.output;
    double sample_se = 0.0, sample_points = 0.0;
    for (Eigen::Index t = 0; t < out.size(); ++t) {
      if (task == WindowTask::kImpute && !s.mask[t]) continue;
      const double d = out(t) - s.target[t];
      sample_se += d * d;
      ae += std::abs(d);
      sample_points += 1.0;
    }
    se += sample_se;
    points += sample_points;
    loss += sample_se / sample_points;
  }
  if (task == WindowTask::kClassify) {
    const int k = std::max(windows.num_classes(), static_cast<int>(params.heads[head].spec.outputs));
    Metrics c = classification_metrics(predicted, actual, k);
    c.loss = loss / static_cast<double>(windows.size());
    return c;
  }
  m.mse = se / points;
  m.mae = ae / points;
  m.loss = loss / static_cast<double>(windows.size());
  return m;
}

}  // namespace wq4ts
