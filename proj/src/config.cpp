#include "config.hpp"

#include <fstream>
#include <sstream>

#include "error.hpp"

#ifndef WQ4TS_VERSION_STRING
#define WQ4TS_VERSION_STRING "0.1.0"
#endif

namespace wq4ts {

using nlohmann::json;

namespace {

WindowTask parse_task(const std::string& name) {
  if (name == "forecast") return WindowTask::kForecast;
  if (name == "impute") return WindowTask::kImpute;
  if (name == "classify") return WindowTask::kClassify;
  throw ConfigError("task must be one of forecast, impute, classify; got '" + name + "'");
}

void merge_into(json& base, const json& patch, const std::string& prefix) {
  if (!patch.is_object()) throw ConfigError("'" + (prefix.empty() ? std::string("config") : prefix) + "' must be an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError("unknown key '" + path + "'");
    json& slot = base[it.key()];
    if (slot.is_object()) merge_into(slot, it.value(), path);
    else slot = it.value();
  }
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &doc;
  std::stringstream ss(key);
  std::string part, walked;
  while (std::getline(ss, part, '.')) {
    walked += walked.empty() ? part : "." + part;
    if (!node->is_object() || !node->contains(part)) throw ConfigError("unknown key '" + walked + "'");
    node = &(*node)[part];
  }
  if (node->is_object()) throw ConfigError("override '" + key + "' targets a section, not a value");
  *node = std::move(value);
}

const json& at(const json& doc, const std::string& path) {
  const json* node = &doc;
  std::stringstream ss(path);
  std::string part;
  while (std::getline(ss, part, '.')) node = &node->at(part);
  return *node;
}

std::string get_string(const json& doc, const std::string& path) {
  const json& v = at(doc, path);
  if (!v.is_string()) throw ConfigError("'" + path + "' must be a string");
  return v.get<std::string>();
}

long get_int(const json& doc, const std::string& path, long lo, long hi) {
  const json& v = at(doc, path);
  if (!v.is_number_integer()) throw ConfigError("'" + path + "' must be an integer");
  const long x = v.get<long>();
  if (x < lo || x > hi)
    throw ConfigError("'" + path + "' = " + std::to_string(x) + " is outside [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "]");
  return x;
}

double get_number(const json& doc, const std::string& path) {
  const json& v = at(doc, path);
  if (!v.is_number()) throw ConfigError("'" + path + "' must be a number");
  return v.get<double>();
}

std::string get_optional_string(const json& doc, const std::string& path) {
  const json& v = at(doc, path);
  if (v.is_null()) return "";
  if (!v.is_string()) throw ConfigError("'" + path + "' must be a string or null");
  return v.get<std::string>();
}

}  // namespace

const char* version_string() { return WQ4TS_VERSION_STRING; }

const char* task_name(WindowTask task) {
  switch (task) {
    case WindowTask::kForecast: return "forecast";
    case WindowTask::kImpute: return "impute";
    case WindowTask::kClassify: return "classify";
  }
  return "unknown";
}

json default_config(WindowTask task) {
  const bool cls = task == WindowTask::kClassify;
  const int lambda = 100;
  json doc = {
      {"task", task_name(task)},
      {"regime", "supervised"},
      {"wavebook", {{"filter", "db2"}, {"m", 8}, {"lambda", lambda}}},
      {"model",
       {{"L", cls ? 5 : 10},
        {"d_k", nullptr},
        {"n_heads", 4},
        {"d_ff", nullptr},
        {"tokenizer", "wave"},
        {"window", 9}}},
      {"train",
       {{"lr", cls ? 1e-3 : 1e-4},
        {"batch_size", cls ? 64 : 32},
        {"max_epochs", cls ? 30 : 10},
        {"patience", 3},
        {"seed", 0},
        {"fewshot_fraction", 1.0},
        {"max_steps", 0}}},
      {"data",
       {{"paths", json::array()},
        {"target", nullptr},
        {"lookback", task == WindowTask::kForecast ? json(336) : task == WindowTask::kImpute ? json(96) : json()},
        {"horizon", 96},
        {"mask_ratio", 0.25}}},
      {"checkpoint", nullptr},
      {"output_dir", "runs/default"},
  };
  return doc;
}

RunConfig resolve_config(const json& user, const std::vector<std::string>& overrides) {
  if (!user.is_object()) throw ConfigError("config must be a JSON object");

  // The task decides the defaults, so find it first (overrides win).
  std::string task = "forecast";
  if (user.contains("task")) {
    if (!user["task"].is_string()) throw ConfigError("'task' must be a string");
    task = user["task"].get<std::string>();
  }
  for (const auto& o : overrides)
    if (o.rfind("task=", 0) == 0) task = o.substr(5);
  const WindowTask kind = parse_task(task);

  json doc = default_config(kind);
  merge_into(doc, user, "");
  for (const auto& o : overrides) apply_override(doc, o);
  if (get_string(doc, "task") != task_name(kind)) throw ConfigError("'task' changed while resolving overrides");

  RunConfig cfg;
  cfg.task = kind;
  cfg.regime = get_string(doc, "regime");
  if (cfg.regime != "supervised" && cfg.regime != "pretrain" && cfg.regime != "finetune" && cfg.regime != "zeroshot")
    throw ConfigError("regime must be one of supervised, pretrain, finetune, zeroshot; got '" + cfg.regime + "'");

  cfg.wavebook.filter = get_string(doc, "wavebook.filter");
  cfg.wavebook.m = static_cast<int>(get_int(doc, "wavebook.m", 4, 20));
  cfg.wavebook.lambda = static_cast<int>(get_int(doc, "wavebook.lambda", 1, 4096));

  const int lambda = cfg.wavebook.lambda;
  json& model = doc["model"];
  if (model["d_k"].is_null()) model["d_k"] = lambda;
  if (model["d_ff"].is_null()) model["d_ff"] = 4 * lambda;
  cfg.model.layers = static_cast<int>(get_int(doc, "model.L", 1, 256));
  cfg.model.d_k = static_cast<int>(get_int(doc, "model.d_k", 1, 1 << 16));
  cfg.model.n_heads = static_cast<int>(get_int(doc, "model.n_heads", 1, 1024));
  cfg.model.d_ff = static_cast<int>(get_int(doc, "model.d_ff", 1, 1 << 20));
  const std::string tok = get_string(doc, "model.tokenizer");
  if (tok == "wave") cfg.model.tokenizer = TokenizerKind::kWave;
  else if (tok == "window") cfg.model.tokenizer = TokenizerKind::kWindow;
  else throw ConfigError("model.tokenizer must be 'wave' or 'window'; got '" + tok + "'");
  cfg.model.window = static_cast<int>(get_int(doc, "model.window", 1, 4097));
  if (cfg.model.window % 2 == 0) throw ConfigError("model.window must be odd");
  if (cfg.model.d_k % cfg.model.n_heads != 0 || lambda % cfg.model.n_heads != 0)
    throw ConfigError("wavebook.lambda and model.d_k must be divisible by model.n_heads");
  if (cfg.model.d_ff < lambda) throw ConfigError("model.d_ff must be >= wavebook.lambda");

  cfg.train.lr = get_number(doc, "train.lr");
  cfg.train.batch_size = static_cast<int>(get_int(doc, "train.batch_size", 1, 1 << 20));
  cfg.train.max_epochs = static_cast<int>(get_int(doc, "train.max_epochs", 1, 1 << 20));
  cfg.train.patience = static_cast<int>(get_int(doc, "train.patience", 1, 1 << 20));
  {
    const json& seed = at(doc, "train.seed");
    if (!seed.is_number_integer() || seed.get<long long>() < 0) throw ConfigError("'train.seed' must be a non-negative integer");
    cfg.train.seed = seed.get<std::uint64_t>();
  }
  cfg.train.fewshot_fraction = get_number(doc, "train.fewshot_fraction");
  cfg.train.max_steps = get_int(doc, "train.max_steps", 0, 1L << 40);
  cfg.train.validate();

  const json& paths = at(doc, "data.paths");
  if (!paths.is_array()) throw ConfigError("'data.paths' must be an array of strings");
  for (const auto& p : paths) {
    if (!p.is_string()) throw ConfigError("'data.paths' must be an array of strings");
    cfg.data.paths.push_back(p.get<std::string>());
  }
  cfg.data.target = get_optional_string(doc, "data.target");
  if (!at(doc, "data.lookback").is_null())
    cfg.data.lookback = static_cast<int>(get_int(doc, "data.lookback", 1, 1 << 20));
  else if (kind != WindowTask::kClassify)
    throw ConfigError("'data.lookback' is required for " + std::string(task_name(kind)));
  cfg.data.horizon = static_cast<int>(get_int(doc, "data.horizon", 1, 1 << 20));
  cfg.data.mask_ratio = get_number(doc, "data.mask_ratio");
  if (!(cfg.data.mask_ratio > 0.0 && cfg.data.mask_ratio < 1.0)) throw ConfigError("'data.mask_ratio' must be in (0, 1)");

  cfg.checkpoint = get_optional_string(doc, "checkpoint");
  cfg.output_dir = get_string(doc, "output_dir");
  if (cfg.output_dir.empty()) throw ConfigError("'output_dir' must not be empty");
  cfg.resolved = std::move(doc);
  return cfg;
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  json user = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    user = json::parse(in, nullptr, false);
    if (user.is_discarded()) throw ConfigError("config file '" + path + "' is not valid JSON");
  }
  return resolve_config(user, overrides);
}

}  // namespace wq4ts
