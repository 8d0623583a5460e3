#include "runner.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "error.hpp"
#include "training.hpp"
#include "wavebook.hpp"

namespace wq4ts {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kWavebookFile = "wavebook.wqbk";
constexpr const char* kModelFile = "model.wqmd";
constexpr const char* kHistoryFile = "history.json";
constexpr const char* kMetricsFile = "metrics.json";

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Test file paired with a UCR train file, or "" for CSV inputs.
std::string ucr_test_path(const std::string& path) {
  if (!ends_with(path, ".tsv")) return "";
  const auto pos = path.rfind("_TRAIN");
  if (pos == std::string::npos) throw ConfigError("UCR path '" + path + "' must name the _TRAIN file");
  return path.substr(0, pos) + "_TEST" + path.substr(pos + 6);
}

std::string join_path(const std::string& dir, const std::string& file) { return (fs::path(dir) / file).string(); }

std::string effective_regime(Command command, const RunConfig& cfg) {
  switch (command) {
    case Command::kPretrain:
      if (cfg.regime != "pretrain" && cfg.regime != "supervised")
        throw ConfigError("pretrain runs need regime 'pretrain' or 'supervised', got '" + cfg.regime + "'");
      return cfg.regime;
    case Command::kFinetune:
      return "finetune";
    case Command::kEvaluate:
      return "zeroshot";
  }
  return cfg.regime;
}

void check_inputs(Command command, const RunConfig& cfg) {
  if (cfg.data.paths.empty()) throw ConfigError("'data.paths' must name at least one dataset");
  if (command != Command::kPretrain) {
    if (cfg.checkpoint.empty()) throw ConfigError("'checkpoint' is required for " + std::string(command_name(command)));
    if (command == Command::kFinetune && cfg.data.paths.size() != 1)
      throw ConfigError("finetune takes exactly one target dataset in 'data.paths'");
  }
}

HeadSpec head_for(WindowTask task, int lookback, int horizon, int classes) {
  switch (task) {
    case WindowTask::kForecast: return {HeadKind::kForecast, horizon};
    case WindowTask::kImpute: return {HeadKind::kImpute, lookback};
    case WindowTask::kClassify: return {HeadKind::kClassify, classes};
  }
  return {};
}

WindowSet windows_for(const DomainDataset& ds, const RunConfig& cfg, int l, Split split) {
  switch (cfg.task) {
    case WindowTask::kForecast:
      return make_forecast_windows(ds, l, cfg.data.horizon, split, split != Split::kTrain);
    case WindowTask::kImpute:
      return make_imputation_windows(ds, l, cfg.data.mask_ratio, cfg.train.seed + static_cast<std::uint64_t>(split),
                                     split);
    case WindowTask::kClassify:
      return make_classification_windows(ds, l, split);
  }
  return {};
}

Wavebook build_book(const WavebookSpec& spec) {
  const FilterPair fp = build_filter_pair(named_lowpass(spec.filter));
  return build_wavebook(cascade_mother(fp, spec.m, spec.filter), spec.lambda);
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(); }

json metrics_json(const Metrics& m) {
  json out = {{"samples", m.samples}, {"loss", finite_or_null(m.loss)}};
  if (m.task == WindowTask::kClassify) {
    out["accuracy"] = m.accuracy;
    out["precision"] = m.precision;
    out["recall"] = m.recall;
    out["f1"] = m.f1;
  } else {
    out["mse"] = finite_or_null(m.mse);
    out["mae"] = finite_or_null(m.mae);
  }
  return out;
}

void check_finite(const Metrics& m, const std::string& domain) {
  const double key = m.task == WindowTask::kClassify ? m.loss : m.mse;
  if (!std::isfinite(key)) throw NumericError("non-finite test metric on '" + domain + "'");
}

json history_json(const TrainResult& r) {
  json epochs = json::array();
  for (const auto& e : r.history) {
    json train = json::object(), val = json::object(), weights = json::object();
    for (std::size_t d = 0; d < r.domains.size(); ++d) {
      train[r.domains[d]] = finite_or_null(e.train_loss[d]);
      val[r.domains[d]] = finite_or_null(e.val_loss[d]);
      weights[r.domains[d]] = e.task_weights[d];
    }
    epochs.push_back({{"epoch", e.epoch},
                      {"steps", e.steps},
                      {"train_loss", train},
                      {"val_loss", val},
                      {"mean_val_loss", finite_or_null(e.mean_val_loss)},
                      {"task_weights", weights}});
  }
  return {{"domains", r.domains},
          {"epochs", epochs},
          {"best_epoch", r.best_epoch},
          {"steps", r.steps},
          {"early_stopped", r.early_stopped}};
}

json stamp(Command command, const std::string& regime, const RunConfig& cfg) {
  json doc = cfg.resolved;
  doc["regime"] = regime;
  return {{"version", version_string()}, {"command", command_name(command)}, {"config", doc}};
}

void write_json(const std::string& path, const json& doc) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
}

struct LoadedModel {
  ModelParams params;
  std::optional<Wavebook> book;
  std::string book_path;
};

LoadedModel load_model(const std::string& path) {
  LoadedModel lm;
  CheckpointMeta meta;
  lm.params = load_checkpoint(path, &meta);
  if (lm.params.config.tokenizer == TokenizerKind::kWave) {
    if (meta.wavebook_path.empty()) throw FormatError("checkpoint '" + path + "' does not name its wavebook");
    fs::path book = meta.wavebook_path;
    if (book.is_relative()) book = fs::path(path).parent_path() / book;
    lm.book_path = book.string();
    lm.book = load_wavebook(lm.book_path);
    if (lm.book->lambda != lm.params.config.lambda)
      throw FormatError("wavebook '" + lm.book_path + "' does not match the checkpoint's token width");
  }
  return lm;
}

const Wavebook* book_ptr(const std::optional<Wavebook>& b) { return b ? &*b : nullptr; }

int find_head(const ModelParams& p, const HeadSpec& spec) {
  for (std::size_t i = 0; i < p.heads.size(); ++i)
    if (p.heads[i].spec == spec) return static_cast<int>(i);
  return -1;
}

int resolve_lookback(const RunConfig& cfg, const std::vector<DomainDataset>& domains) {
  if (cfg.data.lookback) return *cfg.data.lookback;
  const auto& d = domains.front();
  if (d.train.empty()) throw EmptySplitError("'" + d.name + "' has no training series");
  return static_cast<int>(d.train.front().values.size());
}

std::vector<DomainDataset> load_all(const RunConfig& cfg) {
  std::vector<DomainDataset> out;
  for (const auto& p : cfg.data.paths) {
    out.push_back(load_domain(p, cfg));
    // Domain names key the history and metrics; keep them unique.
    const std::string base = out.back().name;
    for (int k = 2; std::count_if(out.begin(), out.end() - 1, [&](const auto& d) { return d.name == out.back().name; });
         ++k)
      out.back().name = base + "_" + std::to_string(k);
  }
  return out;
}

ModelConfig model_config(const RunConfig& cfg, int lookback) {
  ModelConfig mc;
  mc.lambda = cfg.wavebook.lambda;
  mc.length = lookback;
  mc.layers = cfg.model.layers;
  mc.d_k = cfg.model.d_k;
  mc.n_heads = cfg.model.n_heads;
  mc.d_ff = cfg.model.d_ff;
  mc.tokenizer = cfg.model.tokenizer;
  mc.window_width = cfg.model.tokenizer == TokenizerKind::kWindow ? cfg.model.window : 0;
  return mc;
}

json test_metrics(const ModelParams& params, const Wavebook* book, const std::vector<DomainDataset>& domains,
                  const RunConfig& cfg, const std::vector<int>& heads, bool require) {
  json out = json::object();
  for (std::size_t d = 0; d < domains.size(); ++d) {
    const WindowSet test = windows_for(domains[d], cfg, params.config.length, Split::kTest);
    if (test.empty() && !require) {
      out[domains[d].name] = nullptr;
      continue;
    }
    const Metrics m = evaluate(params, book, test, heads[d]);
    check_finite(m, domains[d].name);
    out[domains[d].name] = metrics_json(m);
  }
  return out;
}

json run_pretrain(const RunConfig& cfg, const std::string& regime) {
  const auto domains = load_all(cfg);
  const int l = resolve_lookback(cfg, domains);
  ModelConfig mc = model_config(cfg, l);

  std::vector<DomainTask> tasks;
  std::vector<int> heads;
  for (const auto& ds : domains) {
    const HeadSpec spec = head_for(cfg.task, l, cfg.data.horizon, ds.num_classes());
    int head = cfg.task == WindowTask::kClassify ? -1 : (mc.heads.empty() ? -1 : 0);
    if (head < 0) {
      mc.heads.push_back(spec);
      head = static_cast<int>(mc.heads.size()) - 1;
    }
    heads.push_back(head);
    tasks.push_back({ds.name, windows_for(ds, cfg, l, Split::kTrain), windows_for(ds, cfg, l, Split::kVal), head});
  }

  std::optional<Wavebook> book;
  if (cfg.model.tokenizer == TokenizerKind::kWave) book = build_book(cfg.wavebook);
  const TrainResult r = pretrain_multi_domain(tasks, init_params(mc, cfg.train.seed), book_ptr(book), cfg.train);

  ensure_dir(cfg.output_dir);
  json artifacts = json::array();
  CheckpointMeta meta{version_string(), "", stamp(Command::kPretrain, regime, cfg).dump()};
  if (book) {
    save_wavebook(*book, join_path(cfg.output_dir, kWavebookFile));
    meta.wavebook_path = kWavebookFile;
    artifacts.push_back(join_path(cfg.output_dir, kWavebookFile));
  }
  save_checkpoint(r.params, meta, join_path(cfg.output_dir, kModelFile));
  artifacts.push_back(join_path(cfg.output_dir, kModelFile));

  json history = stamp(Command::kPretrain, regime, cfg);
  history.update(history_json(r));
  write_json(join_path(cfg.output_dir, kHistoryFile), history);
  artifacts.push_back(join_path(cfg.output_dir, kHistoryFile));

  json train_windows = json::object();
  for (const auto& t : tasks) train_windows[t.name] = t.train.size();
  json metrics = stamp(Command::kPretrain, regime, cfg);
  metrics["provenance"] = {{"regime", regime},
                           {"seed", cfg.train.seed},
                           {"fewshot_fraction", 1.0},
                           {"checkpoint", nullptr},
                           {"wavebook_id", book ? json(book->content_id()) : json()},
                           {"parameter_count", r.params.parameter_count()},
                           {"train_windows", train_windows},
                           {"best_epoch", r.best_epoch},
                           {"steps", r.steps}};
  metrics["metrics"] = test_metrics(r.params, book_ptr(book), domains, cfg, heads, false);
  write_json(join_path(cfg.output_dir, kMetricsFile), metrics);
  artifacts.push_back(join_path(cfg.output_dir, kMetricsFile));

  return {{"command", "pretrain"}, {"output_dir", cfg.output_dir}, {"artifacts", artifacts}, {"metrics", metrics["metrics"]}};
}

json run_finetune(const RunConfig& cfg) {
  LoadedModel lm = load_model(cfg.checkpoint);
  const auto domains = load_all(cfg);
  const DomainDataset& ds = domains.front();
  const int l = lm.params.config.length;
  if (cfg.data.lookback && *cfg.data.lookback != l)
    throw ConfigError("'data.lookback' = " + std::to_string(*cfg.data.lookback) + " differs from the checkpoint's " +
                      std::to_string(l));

  // Keep the matching head if the checkpoint has one, else start a fresh one.
  const HeadSpec spec = head_for(cfg.task, l, cfg.data.horizon, ds.num_classes());
  ModelParams params = lm.params;
  ModelConfig mc = params.config;
  mc.heads = {spec};
  const int existing = find_head(params, spec);
  const HeadParams head = existing >= 0 ? params.heads[existing] : init_params(mc, cfg.train.seed).heads.front();
  params.config = mc;
  params.heads = {head};

  const DomainTask task{ds.name, windows_for(ds, cfg, l, Split::kTrain), windows_for(ds, cfg, l, Split::kVal), 0};
  const TrainResult r = finetune(params, task, book_ptr(lm.book), cfg.train);
  const std::size_t used = cfg.train.fewshot_fraction < 1.0
                               ? task.train.fewshot(cfg.train.fewshot_fraction, cfg.train.seed).size()
                               : task.train.size();

  ensure_dir(cfg.output_dir);
  json artifacts = json::array();
  CheckpointMeta meta{version_string(), "", stamp(Command::kFinetune, "finetune", cfg).dump()};
  if (lm.book) {
    save_wavebook(*lm.book, join_path(cfg.output_dir, kWavebookFile));
    meta.wavebook_path = kWavebookFile;
    artifacts.push_back(join_path(cfg.output_dir, kWavebookFile));
  }
  save_checkpoint(r.params, meta, join_path(cfg.output_dir, kModelFile));
  artifacts.push_back(join_path(cfg.output_dir, kModelFile));

  json history = stamp(Command::kFinetune, "finetune", cfg);
  history.update(history_json(r));
  write_json(join_path(cfg.output_dir, kHistoryFile), history);
  artifacts.push_back(join_path(cfg.output_dir, kHistoryFile));

  json metrics = stamp(Command::kFinetune, "finetune", cfg);
  metrics["provenance"] = {{"regime", "finetune"},
                           {"seed", cfg.train.seed},
                           {"fewshot_fraction", cfg.train.fewshot_fraction},
                           {"checkpoint", cfg.checkpoint},
                           {"head_reinitialized", existing < 0},
                           {"wavebook_id", lm.book ? json(lm.book->content_id()) : json()},
                           {"parameter_count", r.params.parameter_count()},
                           {"train_windows", {{ds.name, used}}},
                           {"best_epoch", r.best_epoch},
                           {"steps", r.steps}};
  metrics["metrics"] = test_metrics(r.params, book_ptr(lm.book), domains, cfg, {0}, true);
  write_json(join_path(cfg.output_dir, kMetricsFile), metrics);
  artifacts.push_back(join_path(cfg.output_dir, kMetricsFile));

  return {{"command", "finetune"}, {"output_dir", cfg.output_dir}, {"artifacts", artifacts}, {"metrics", metrics["metrics"]}};
}

json run_evaluate(const RunConfig& cfg) {
  const LoadedModel lm = load_model(cfg.checkpoint);
  const auto domains = load_all(cfg);
  const int l = lm.params.config.length;
  if (cfg.data.lookback && *cfg.data.lookback != l)
    throw ConfigError("'data.lookback' = " + std::to_string(*cfg.data.lookback) + " differs from the checkpoint's " +
                      std::to_string(l));

  std::vector<int> heads;
  for (const auto& ds : domains) {
    const HeadSpec spec = head_for(cfg.task, l, cfg.data.horizon, ds.num_classes());
    const int h = find_head(lm.params, spec);
    if (h < 0)
      throw ConfigError("checkpoint has no " + std::string(head_kind_name(spec.kind)) + " head with " +
                        std::to_string(spec.outputs) + " outputs for '" + ds.name + "'");
    heads.push_back(h);
  }

  json metrics = stamp(Command::kEvaluate, "zeroshot", cfg);
  metrics["provenance"] = {{"regime", "zeroshot"},
                           {"seed", cfg.train.seed},
                           {"fewshot_fraction", nullptr},
                           {"checkpoint", cfg.checkpoint},
                           {"wavebook_id", lm.book ? json(lm.book->content_id()) : json()},
                           {"parameter_count", lm.params.parameter_count()}};
  metrics["metrics"] = test_metrics(lm.params, book_ptr(lm.book), domains, cfg, heads, true);

  ensure_dir(cfg.output_dir);
  write_json(join_path(cfg.output_dir, kMetricsFile), metrics);
  return {{"command", "evaluate"},
          {"output_dir", cfg.output_dir},
          {"artifacts", {join_path(cfg.output_dir, kMetricsFile)}},
          {"metrics", metrics["metrics"]}};
}

}  // namespace

Command parse_command(const std::string& name) {
  if (name == "pretrain") return Command::kPretrain;
  if (name == "finetune") return Command::kFinetune;
  if (name == "evaluate") return Command::kEvaluate;
  throw ConfigError("unknown command '" + name + "'");
}

const char* command_name(Command c) {
  switch (c) {
    case Command::kPretrain: return "pretrain";
    case Command::kFinetune: return "finetune";
    case Command::kEvaluate: return "evaluate";
  }
  return "unknown";
}

DomainDataset load_domain(const std::string& path, const RunConfig& cfg) {
  DomainDataset ds;
  const std::string test = ucr_test_path(path);
  if (!test.empty()) {
    if (cfg.task != WindowTask::kClassify) throw ConfigError("'" + path + "' is a UCR file; only classify reads those");
    ds = load_ucr_tsv(path, test, cfg.train.seed);
    if (const auto pos = ds.name.rfind("_TRAIN"); pos != std::string::npos) ds.name.resize(pos);
  } else {
    if (cfg.task == WindowTask::kClassify) throw ConfigError("classify expects UCR _TRAIN.tsv files, got '" + path + "'");
    ds = load_ett_csv(path);
    if (!cfg.data.target.empty()) {
      std::size_t ch = ds.channel_names.size();
      for (std::size_t i = 0; i < ds.channel_names.size(); ++i)
        if (ds.channel_names[i] == cfg.data.target) ch = i;
      if (ch == ds.channel_names.size())
        throw ConfigError("'" + path + "' has no column '" + cfg.data.target + "'");
      std::vector<double> col(ds.rows);
      for (std::size_t r = 0; r < ds.rows; ++r) col[r] = ds.at(r, ch);
      DomainDataset one = dataset_from_matrix(ds.name, std::move(col), ds.rows, 1);
      one.timestamps = std::move(ds.timestamps);
      one.channel_names = {cfg.data.target};
      ds = std::move(one);
    }
  }
  standardize(ds);
  return ds;
}

json plan_run(Command command, const RunConfig& cfg) {
  const std::string regime = effective_regime(command, cfg);
  check_inputs(command, cfg);
  json reads = json::array();
  for (const auto& p : cfg.data.paths) {
    reads.push_back(p);
    if (const auto t = ucr_test_path(p); !t.empty()) reads.push_back(t);
  }
  if (command != Command::kPretrain) reads.push_back(cfg.checkpoint);
  json writes = json::array();
  if (command != Command::kEvaluate) {
    if (command == Command::kPretrain ? cfg.model.tokenizer == TokenizerKind::kWave : true)
      writes.push_back(join_path(cfg.output_dir, kWavebookFile));
    writes.push_back(join_path(cfg.output_dir, kModelFile));
    writes.push_back(join_path(cfg.output_dir, kHistoryFile));
  }
  writes.push_back(join_path(cfg.output_dir, kMetricsFile));
  json plan = stamp(command, regime, cfg);
  plan["reads"] = reads;
  plan["writes"] = writes;
  return plan;
}

json execute_run(Command command, const RunConfig& cfg) {
  const std::string regime = effective_regime(command, cfg);
  check_inputs(command, cfg);
  switch (command) {
    case Command::kPretrain: return run_pretrain(cfg, regime);
    case Command::kFinetune: return run_finetune(cfg);
    case Command::kEvaluate: return run_evaluate(cfg);
  }
  throw ConfigError("unknown command");
}

}  // namespace wq4ts
