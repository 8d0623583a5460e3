#pragma once

// Dataset ingestion (ETT-style CSV, UCR TSV), train-split standardization,
// chronological splits and channel-independent window extraction.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace wq4ts {

enum class Split { kTrain = 0, kVal = 1, kTest = 2 };
const char* split_name(Split s);

struct LabeledSeries {
  std::vector<double> values;
  int label = 0;  // remapped to 0..K-1
};

struct DomainDataset {
  std::string name;

  // Continuous multivariate series (forecasting / imputation).
  std::size_t rows = 0;
  std::size_t channels = 0;
  std::vector<double> values;  // row-major rows x channels
  std::vector<std::string> timestamps;
  std::vector<std::string> channel_names;
  std::size_t train_end = 0, val_end = 0, test_end = 0;

  // Labeled collection (classification). Non-empty train means "labeled".
  std::vector<LabeledSeries> train, val, test;
  std::vector<long> label_values;  // original label of class k
  std::vector<std::string> warnings;

  // Per-channel train statistics; filled by standardize().
  std::vector<double> mean, stddev;
  std::vector<bool> constant;
  bool standardized = false;

  bool labeled() const { return !train.empty() || !test.empty(); }
  int num_classes() const { return static_cast<int>(label_values.size()); }
  double at(std::size_t row, std::size_t ch) const { return values[row * channels + ch]; }
  std::size_t split_begin(Split s) const;
  std::size_t split_end(Split s) const;
  std::size_t split_length(Split s) const { return split_end(s) - split_begin(s); }
};

// Row borders of the ETT family (12/4/4 months) when the row count matches a
// known dataset, else a 70/10/20 chronological split.
void assign_default_splits(DomainDataset& ds);

DomainDataset load_ett_csv(const std::string& path);
DomainDataset load_ucr_tsv(const std::string& train_path, const std::string& test_path,
                           std::uint64_t seed = 0);

// Builds a continuous dataset from a row-major matrix (splits assigned by the
// default policy unless given).
DomainDataset dataset_from_matrix(std::string name, std::vector<double> values, std::size_t rows,
                                  std::size_t channels);

void standardize(DomainDataset& ds);
double inverse_standardize(const DomainDataset& ds, std::size_t channel, double z);

struct WindowSample {
  std::vector<double> input;
  std::vector<double> target;   // forecast horizon, or the original window for imputation
  std::vector<std::uint8_t> mask;  // imputation: 1 where hidden
  int label = -1;               // classification
  std::string domain;
  int channel = 0;
};

enum class WindowTask { kForecast, kImpute, kClassify };

// Lazily materialized window list over one split of a dataset.
class WindowSet {
 public:
  WindowSet() = default;

  std::size_t size() const { return starts_.size(); }
  bool empty() const { return starts_.empty(); }
  WindowSample at(std::size_t i) const;

  WindowTask task() const { return task_; }
  int lookback() const { return lookback_; }
  int horizon() const { return horizon_; }
  const std::string& domain() const { return domain_; }
  int num_classes() const { return num_classes_; }

  // First ceil(fraction * N) windows in (start, channel) order, or a seeded
  // stratified subset for classification.
  WindowSet fewshot(double fraction, std::uint64_t seed) const;

  std::size_t start_of(std::size_t i) const { return starts_[i]; }
  int channel_of(std::size_t i) const { return channels_[i]; }

 private:
  friend WindowSet make_forecast_windows(const DomainDataset&, int, int, Split, bool);
  friend WindowSet make_imputation_windows(const DomainDataset&, int, double, std::uint64_t, Split);
  friend WindowSet make_classification_windows(const DomainDataset&, int, Split);

  WindowTask task_ = WindowTask::kForecast;
  int lookback_ = 0, horizon_ = 0, num_classes_ = 0;
  std::string domain_;
  std::shared_ptr<const DomainDataset> data_;
  std::vector<std::size_t> starts_;  // row of first input step, or series index
  std::vector<int> channels_;
  std::vector<std::vector<std::uint8_t>> masks_;
};

// Closed-form count (split_len - l - c + 1) * C, or 0 when too short.
std::size_t forecast_window_count(std::size_t split_len, int l, int c, std::size_t channels);

// borrow_lookback: val/test inputs may reach back l rows into the previous
// split (targets never do); this is the convention behind published ETT
// window counts.
WindowSet make_forecast_windows(const DomainDataset& ds, int l, int c, Split split,
                                bool borrow_lookback = false);
WindowSet make_imputation_windows(const DomainDataset& ds, int l, double ratio, std::uint64_t seed,
                                  Split split);
WindowSet make_classification_windows(const DomainDataset& ds, int l, Split split);

// Number of hidden points per window: nearest integer, at least 1.
int mask_count(int l, double ratio);

std::vector<double> resample_linear(const std::vector<double>& x, int length);

}  // namespace wq4ts
