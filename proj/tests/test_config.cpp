#include <doctest.h>

#include <string>

#include "config.hpp"
#include "error.hpp"

using namespace wq4ts;
using nlohmann::json;

TEST_CASE("default_config: tabled hyperparameters per task") {
  const auto f = resolve_config(json::object());
  CHECK(f.task == WindowTask::kForecast);
  CHECK(f.train.lr == 1e-4);
  CHECK(f.train.batch_size == 32);
  CHECK(f.train.max_epochs == 10);
  CHECK(f.train.patience == 3);
  CHECK(f.model.layers == 10);
  CHECK(f.wavebook.lambda == 100);
  CHECK(f.data.lookback == 336);

  const auto c = resolve_config({{"task", "classify"}});
  CHECK(c.train.lr == 1e-3);
  CHECK(c.train.batch_size == 64);
  CHECK(c.train.max_epochs == 30);
  CHECK(c.model.layers == 5);
  CHECK_FALSE(c.data.lookback.has_value());

  const auto i = resolve_config({{"task", "impute"}});
  CHECK(i.data.lookback == 96);
  CHECK(i.data.mask_ratio == 0.25);
}

TEST_CASE("resolve_config: d_k and d_ff follow lambda unless set") {
  const auto a = resolve_config({{"wavebook", {{"lambda", 16}}}});
  CHECK(a.model.d_k == 16);
  CHECK(a.model.d_ff == 64);
  CHECK(a.resolved["model"]["d_ff"] == 64);
  const auto b = resolve_config({{"wavebook", {{"lambda", 16}}}, {"model", {{"d_ff", 32}}}});
  CHECK(b.model.d_ff == 32);
}

TEST_CASE("resolve_config: unknown keys are rejected with their path") {
  CHECK_THROWS_WITH_AS(resolve_config({{"bogus", 1}}), doctest::Contains("'bogus'"), ConfigError);
  CHECK_THROWS_WITH_AS(resolve_config({{"train", {{"learning_rate", 1}}}}), doctest::Contains("'train.learning_rate'"),
                       ConfigError);
  CHECK_THROWS_AS(resolve_config(json::object(), {"model.depth=3"}), ConfigError);
}

TEST_CASE("resolve_config: overrides parse JSON and fall back to strings") {
  const auto cfg = resolve_config(json::object(), {"train.lr=0.01", "data.paths=[\"a.csv\",\"b.csv\"]",
                                                   "data.target=OT", "output_dir=out/x", "model.tokenizer=window"});
  CHECK(cfg.train.lr == 0.01);
  REQUIRE(cfg.data.paths.size() == 2);
  CHECK(cfg.data.paths[1] == "b.csv");
  CHECK(cfg.data.target == "OT");
  CHECK(cfg.output_dir == "out/x");
  CHECK(cfg.model.tokenizer == TokenizerKind::kWindow);
  CHECK_THROWS_AS(resolve_config(json::object(), {"train"}), ConfigError);
  CHECK_THROWS_AS(resolve_config(json::object(), {"train={}"}), ConfigError);
}

TEST_CASE("resolve_config: the task override selects the defaults") {
  const auto cfg = resolve_config({{"task", "forecast"}}, {"task=classify"});
  CHECK(cfg.task == WindowTask::kClassify);
  CHECK(cfg.train.lr == 1e-3);
}

TEST_CASE("resolve_config: type and range errors") {
  CHECK_THROWS_WITH_AS(resolve_config({{"train", {{"batch_size", 0}}}}), doctest::Contains("train.batch_size"), ConfigError);
  CHECK_THROWS_WITH_AS(resolve_config({{"train", {{"patience", "3"}}}}), doctest::Contains("must be an integer"), ConfigError);
  CHECK_THROWS_AS(resolve_config({{"task", "regress"}}), ConfigError);
  CHECK_THROWS_AS(resolve_config({{"regime", "online"}}), ConfigError);
  CHECK_THROWS_AS(resolve_config({{"train", {{"fewshot_fraction", 0.0}}}}), ConfigError);
  CHECK_THROWS_AS(resolve_config({{"train", {{"seed", -1}}}}), ConfigError);
  CHECK_THROWS_AS(resolve_config({{"model", {{"window", 8}}}}), ConfigError);
  CHECK_THROWS_AS(resolve_config({{"model", {{"n_heads", 3}}}}), ConfigError);
  CHECK_THROWS_AS(resolve_config({{"data", {{"mask_ratio", 1.0}}}}), ConfigError);
  CHECK_THROWS_AS(resolve_config({{"data", {{"paths", "a.csv"}}}}), ConfigError);
  CHECK_THROWS_AS(resolve_config({{"task", "forecast"}, {"data", {{"lookback", nullptr}}}}), ConfigError);
  CHECK_THROWS_AS(resolve_config(json::array()), ConfigError);
}

TEST_CASE("load_config: missing file and bad JSON are config errors") {
  CHECK_THROWS_AS(load_config("/nonexistent/wq4ts.json"), ConfigError);
}

TEST_CASE("version_string is non-empty") { CHECK(std::string(version_string()).rfind("0.1.0", 0) == 0); }
