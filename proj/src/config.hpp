#pragma once

// Run configuration: a single JSON document merged over per-task defaults,
// with dotted-path overrides ("train.lr=1e-3").

#include "json.hpp"
#include <optional>
#include <string>
#include <vector>

#include "model.hpp"
#include "training.hpp"

namespace wq4ts {

const char* version_string();

struct WavebookSpec {
  std::string filter = "db2";
  int m = 8;
  int lambda = 100;
};

struct ModelSpec {
  int layers = 10;
  int d_k = 100;
  int n_heads = 4;
  int d_ff = 400;
  TokenizerKind tokenizer = TokenizerKind::kWave;
  int window = 9;
};

struct DataSpec {
  std::vector<std::string> paths;
  std::string target;
  std::optional<int> lookback;  // classification: series length when absent
  int horizon = 96;
  double mask_ratio = 0.25;
};

struct RunConfig {
  WindowTask task = WindowTask::kForecast;
  std::string regime = "supervised";
  WavebookSpec wavebook;
  ModelSpec model;
  TrainConfig train;
  DataSpec data;
  std::string checkpoint;
  std::string output_dir;

  // Fully resolved document, embedded in every output artifact.
  nlohmann::json resolved;
};

const char* task_name(WindowTask task);

// Per-task defaults as a complete document.
nlohmann::json default_config(WindowTask task);

// Merges user JSON over the defaults of its task, applies overrides, checks
// types and ranges. Unknown keys are rejected.
RunConfig resolve_config(const nlohmann::json& user, const std::vector<std::string>& overrides = {});

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

}  // namespace wq4ts
