#include "datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "error.hpp"

namespace wq4ts {
namespace {

struct KnownLayout {
  std::size_t rows, train_end, val_end, test_end;
};

// Hourly ETT files hold 17420 rows, the 15-minute ones 69680; borders follow
// 12/4/4 months of 30 days.
constexpr KnownLayout kKnownLayouts[] = {
    {17420, 12 * 30 * 24, 16 * 30 * 24, 20 * 30 * 24},
    {69680, 12 * 30 * 24 * 4, 16 * 30 * 24 * 4, 20 * 30 * 24 * 4},
};

char detect_delimiter(const std::string& line) {
  return line.find('\t') != std::string::npos ? '\t' : ',';
}

std::vector<std::string> split_fields(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, delim)) out.push_back(field);
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& text, double& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  try {
    std::size_t used = 0;
    out = std::stod(t, &used);
    return used == t.size();
  } catch (const std::exception&) {
    return false;
  }
}

struct UcrRow {
  long label;
  std::vector<double> values;
};

std::vector<UcrRow> read_ucr_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<UcrRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(trim(line), detect_delimiter(line));
    double label = 0.0;
    if (!parse_double(fields[0], label) || label != std::floor(label))
      throw ParseError(path + ":" + std::to_string(line_no) + ": label '" + fields[0] + "' is not an integer");
    UcrRow row{static_cast<long>(label), {}};
    for (std::size_t i = 1; i < fields.size(); ++i) {
      double v = 0.0;
      if (!parse_double(fields[i], v))
        throw ParseError(path + ":" + std::to_string(line_no) + ": column " + std::to_string(i + 1) +
                         ": not a number: '" + fields[i] + "'");
      row.values.push_back(v);
    }
    if (row.values.empty()) throw ParseError(path + ":" + std::to_string(line_no) + ": empty series");
    if (!rows.empty() && row.values.size() != rows.front().values.size())
      throw RaggedLengthError(path + ":" + std::to_string(line_no) + ": series length " +
                              std::to_string(row.values.size()) + " != " +
                              std::to_string(rows.front().values.size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw EmptySplitError("'" + path + "' holds no series");
  return rows;
}

}  // namespace

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "unknown";
}

std::size_t DomainDataset::split_begin(Split s) const {
  switch (s) {
    case Split::kTrain: return 0;
    case Split::kVal: return train_end;
    case Split::kTest: return val_end;
  }
  return 0;
}

std::size_t DomainDataset::split_end(Split s) const {
  switch (s) {
    case Split::kTrain: return train_end;
    case Split::kVal: return val_end;
    case Split::kTest: return test_end;
  }
  return 0;
}

void assign_default_splits(DomainDataset& ds) {
  for (const auto& k : kKnownLayouts) {
    if (ds.rows == k.rows) {
      ds.train_end = k.train_end;
      ds.val_end = k.val_end;
      ds.test_end = k.test_end;
      return;
    }
  }
  const auto n = ds.rows;
  const auto n_train = static_cast<std::size_t>(static_cast<double>(n) * 0.7);
  const auto n_test = static_cast<std::size_t>(static_cast<double>(n) * 0.2);
  ds.train_end = n_train;
  ds.val_end = n - n_test;
  ds.test_end = n;
  if (ds.train_end == 0 || ds.train_end >= ds.val_end)
    throw TooShortError("dataset '" + ds.name + "' has too few rows (" + std::to_string(n) + ") to split");
}

DomainDataset dataset_from_matrix(std::string name, std::vector<double> values, std::size_t rows,
                                  std::size_t channels) {
  if (values.size() != rows * channels) throw ShapeError("dataset: values size != rows * channels");
  DomainDataset ds;
  ds.name = std::move(name);
  ds.rows = rows;
  ds.channels = channels;
  ds.values = std::move(values);
  assign_default_splits(ds);
  return ds;
}

DomainDataset load_ett_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string header;
  if (!std::getline(in, header) || trim(header).empty()) throw MissingHeaderError("'" + path + "' is empty");
  const char delim = detect_delimiter(header);
  const auto names = split_fields(trim(header), delim);
  if (names.size() < 2) throw MissingHeaderError("'" + path + "': header needs a date and a value column");
  {
    double probe = 0.0;
    bool numeric = true;
    for (std::size_t i = 1; i < names.size(); ++i) numeric = numeric && parse_double(names[i], probe);
    if (numeric) throw MissingHeaderError("'" + path + "': first row is numeric, expected a header");
  }

  DomainDataset ds;
  ds.name = path.substr(path.find_last_of('/') == std::string::npos ? 0 : path.find_last_of('/') + 1);
  if (const auto dot = ds.name.rfind('.'); dot != std::string::npos) ds.name.resize(dot);
  ds.channels = names.size() - 1;
  for (std::size_t i = 1; i < names.size(); ++i) ds.channel_names.push_back(trim(names[i]));
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(trim(line), delim);
    if (fields.size() != names.size())
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(names.size()) +
                       " fields, found " + std::to_string(fields.size()));
    ds.timestamps.push_back(trim(fields[0]));
    for (std::size_t c = 1; c < fields.size(); ++c) {
      double v = 0.0;
      if (!parse_double(fields[c], v))
        throw ParseError(path + ":" + std::to_string(line_no) + ": column '" + trim(names[c]) +
                         "': not a number: '" + fields[c] + "'");
      ds.values.push_back(v);
    }
    ++ds.rows;
  }
  if (ds.rows == 0) throw EmptySplitError("'" + path + "' has a header but no rows");
  assign_default_splits(ds);
  return ds;
}

DomainDataset load_ucr_tsv(const std::string& train_path, const std::string& test_path, std::uint64_t seed) {
  auto train_rows = read_ucr_file(train_path);
  auto test_rows = read_ucr_file(test_path);
  if (train_rows.front().values.size() != test_rows.front().values.size())
    throw RaggedLengthError("train and test series lengths differ");

  DomainDataset ds;
  ds.name = train_path.substr(train_path.find_last_of('/') == std::string::npos ? 0 : train_path.find_last_of('/') + 1);
  if (const auto cut = ds.name.find("_TRAIN"); cut != std::string::npos) ds.name.resize(cut);
  ds.channels = 1;

  std::map<long, int> remap;
  for (const auto& r : train_rows) remap.emplace(r.label, 0);
  int next = 0;
  for (auto& [label, idx] : remap) {
    idx = next++;
    ds.label_values.push_back(label);
  }
  if (remap.size() == 1) ds.warnings.push_back("only one class present in the training file");

  // Seeded stratified 20% validation split of the training file.
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < train_rows.size(); ++i) by_class[remap.at(train_rows[i].label)].push_back(i);
  std::mt19937_64 rng(seed);
  std::vector<bool> to_val(train_rows.size(), false);
  for (auto& [cls, idx] : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    auto n_val = static_cast<std::size_t>(std::lround(0.2 * static_cast<double>(idx.size())));
    n_val = std::min(n_val, idx.size() - 1);
    for (std::size_t k = 0; k < n_val; ++k) to_val[idx[k]] = true;
  }
  for (std::size_t i = 0; i < train_rows.size(); ++i) {
    LabeledSeries s{std::move(train_rows[i].values), remap.at(train_rows[i].label)};
    (to_val[i] ? ds.val : ds.train).push_back(std::move(s));
  }
  for (std::size_t i = 0; i < test_rows.size(); ++i) {
    const auto it = remap.find(test_rows[i].label);
    if (it == remap.end())
      throw UnknownLabelError(test_path + ": test row " + std::to_string(i + 1) + " has label " +
                              std::to_string(test_rows[i].label) + " absent from the training set");
    ds.test.push_back({std::move(test_rows[i].values), it->second});
  }
  return ds;
}

void standardize(DomainDataset& ds) {
  if (ds.standardized) return;
  const std::size_t channels = ds.labeled() ? 1 : ds.channels;
  ds.mean.assign(channels, 0.0);
  ds.stddev.assign(channels, 1.0);
  ds.constant.assign(channels, false);

  auto finish = [&](std::size_t ch, double mean, double var) {
    ds.mean[ch] = mean;
    if (var <= 1e-24) {
      ds.constant[ch] = true;
      ds.stddev[ch] = 1.0;
    } else {
      ds.stddev[ch] = std::sqrt(var);
    }
  };

  if (ds.labeled()) {
    double sum = 0.0, count = 0.0;
    for (const auto& s : ds.train)
      for (double v : s.values) {
        sum += v;
        count += 1.0;
      }
    if (count == 0.0) throw EmptySplitError("standardize: empty train split");
    const double mean = sum / count;
    double sq = 0.0;
    for (const auto& s : ds.train)
      for (double v : s.values) sq += (v - mean) * (v - mean);
    finish(0, mean, sq / count);
    for (auto* split : {&ds.train, &ds.val, &ds.test})
      for (auto& s : *split)
        for (double& v : s.values) v = (v - ds.mean[0]) / ds.stddev[0];
  } else {
    if (ds.train_end == 0) throw EmptySplitError("standardize: empty train split");
    for (std::size_t c = 0; c < ds.channels; ++c) {
      double sum = 0.0;
      for (std::size_t r = 0; r < ds.train_end; ++r) sum += ds.at(r, c);
      const double mean = sum / static_cast<double>(ds.train_end);
      double sq = 0.0;
      for (std::size_t r = 0; r < ds.train_end; ++r) sq += (ds.at(r, c) - mean) * (ds.at(r, c) - mean);
      finish(c, mean, sq / static_cast<double>(ds.train_end));
    }
    for (std::size_t r = 0; r < ds.rows; ++r)
      for (std::size_t c = 0; c < ds.channels; ++c) {
        double& v = ds.values[r * ds.channels + c];
        v = (v - ds.mean[c]) / ds.stddev[c];
      }
  }
  ds.standardized = true;
}

double inverse_standardize(const DomainDataset& ds, std::size_t channel, double z) {
  if (!ds.standardized) return z;
  return z * ds.stddev.at(channel) + ds.mean.at(channel);
}

std::size_t forecast_window_count(std::size_t split_len, int l, int c, std::size_t channels) {
  const auto need = static_cast<std::size_t>(l + c);
  if (split_len < need) return 0;
  return (split_len - need + 1) * channels;
}

int mask_count(int l, double ratio) {
  return std::max(1, static_cast<int>(std::lround(ratio * l)));
}

std::vector<double> resample_linear(const std::vector<double>& x, int length) {
  if (x.empty() || length < 1) throw PreconditionError("resample_linear: empty input or target");
  if (static_cast<int>(x.size()) == length) return x;
  std::vector<double> out(length);
  if (x.size() == 1 || length == 1) {
    std::fill(out.begin(), out.end(), x.front());
    return out;
  }
  const double span = static_cast<double>(x.size() - 1) / static_cast<double>(length - 1);
  for (int j = 0; j < length; ++j) {
    const double pos = j * span;
    const auto lo = std::min(static_cast<std::size_t>(pos), x.size() - 2);
    const double frac = pos - static_cast<double>(lo);
    out[j] = x[lo] + frac * (x[lo + 1] - x[lo]);
  }
  return out;
}

WindowSet make_forecast_windows(const DomainDataset& ds, int l, int c, Split split, bool borrow_lookback) {
  if (ds.labeled()) throw PreconditionError("forecast windows need a continuous dataset");
  if (l < 1 || c < 0) throw PreconditionError("forecast windows: l must be >= 1 and c >= 0");
  std::size_t begin = ds.split_begin(split);
  const std::size_t end = ds.split_end(split);
  if (borrow_lookback && split != Split::kTrain) begin = begin >= static_cast<std::size_t>(l) ? begin - l : 0;
  const std::size_t len = end - begin;
  if (len < static_cast<std::size_t>(l + c))
    throw TooShortError(std::string(split_name(split)) + " split of '" + ds.name + "' has " + std::to_string(len) +
                        " rows, need lookback + horizon = " + std::to_string(l + c));
  WindowSet ws;
  ws.task_ = WindowTask::kForecast;
  ws.lookback_ = l;
  ws.horizon_ = c;
  ws.domain_ = ds.name;
  ws.data_ = std::make_shared<const DomainDataset>(ds);
  for (std::size_t s = begin; s + l + c <= end; ++s)
    for (std::size_t ch = 0; ch < ds.channels; ++ch) {
      ws.starts_.push_back(s);
      ws.channels_.push_back(static_cast<int>(ch));
    }
  return ws;
}

WindowSet make_imputation_windows(const DomainDataset& ds, int l, double ratio, std::uint64_t seed, Split split) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw PreconditionError("imputation: mask ratio must be in (0, 1)");
  WindowSet ws = make_forecast_windows(ds, l, 0, split);
  ws.task_ = WindowTask::kImpute;
  ws.horizon_ = 0;
  const int hidden = mask_count(l, ratio);
  std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(split) + 1)));
  std::vector<int> order(l);
  ws.masks_.reserve(ws.size());
  for (std::size_t i = 0; i < ws.size(); ++i) {
    std::iota(order.begin(), order.end(), 0);
    // Partial Fisher-Yates: the first `hidden` slots become the mask.
    for (int k = 0; k < hidden; ++k) {
      std::uniform_int_distribution<int> pick(k, l - 1);
      std::swap(order[k], order[pick(rng)]);
    }
    std::vector<std::uint8_t> mask(l, 0);
    for (int k = 0; k < hidden; ++k) mask[order[k]] = 1;
    ws.masks_.push_back(std::move(mask));
  }
  return ws;
}

WindowSet make_classification_windows(const DomainDataset& ds, int l, Split split) {
  if (!ds.labeled()) throw PreconditionError("classification windows need a labeled dataset");
  if (l < 1) throw PreconditionError("classification windows: l must be >= 1");
  const auto& series = split == Split::kTrain ? ds.train : split == Split::kVal ? ds.val : ds.test;
  WindowSet ws;
  ws.task_ = WindowTask::kClassify;
  ws.lookback_ = l;
  ws.num_classes_ = ds.num_classes();
  ws.domain_ = ds.name;
  auto copy = std::make_shared<DomainDataset>();
  copy->name = ds.name;
  copy->label_values = ds.label_values;
  for (const auto& s : series) copy->test.push_back({resample_linear(s.values, l), s.label});
  ws.data_ = copy;
  for (std::size_t i = 0; i < series.size(); ++i) {
    ws.starts_.push_back(i);
    ws.channels_.push_back(0);
  }
  return ws;
}

WindowSample WindowSet::at(std::size_t i) const {
  WindowSample s;
  s.domain = domain_;
  s.channel = channels_.at(i);
  const std::size_t start = starts_.at(i);
  if (task_ == WindowTask::kClassify) {
    const auto& series = data_->test.at(start);
    s.input = series.values;
    s.label = series.label;
    return s;
  }
  const auto& d = *data_;
  s.input.resize(lookback_);
  for (int t = 0; t < lookback_; ++t) s.input[t] = d.at(start + t, s.channel);
  if (task_ == WindowTask::kForecast) {
    s.target.resize(horizon_);
    for (int t = 0; t < horizon_; ++t) s.target[t] = d.at(start + lookback_ + t, s.channel);
  } else {
    s.target = s.input;
    s.mask = masks_.at(i);
    for (int t = 0; t < lookback_; ++t)
      if (s.mask[t]) s.input[t] = 0.0;
  }
  return s;
}

WindowSet WindowSet::fewshot(double fraction, std::uint64_t seed) const {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("few-shot fraction must be in (0, 1]");
  if (empty()) throw EmptyDomainError("few-shot subset of an empty window set");
  std::vector<std::size_t> keep;
  if (task_ == WindowTask::kClassify) {
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < size(); ++i) by_class[data_->test[starts_[i]].label].push_back(i);
    std::mt19937_64 rng(seed);
    for (auto& [cls, idx] : by_class) {
      std::shuffle(idx.begin(), idx.end(), rng);
      const auto n = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(idx.size())));
      keep.insert(keep.end(), idx.begin(), idx.begin() + static_cast<long>(std::min(n, idx.size())));
    }
    std::sort(keep.begin(), keep.end());
  } else {
    std::vector<std::size_t> order(size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return starts_[a] != starts_[b] ? starts_[a] < starts_[b] : channels_[a] < channels_[b];
    });
    // Guard against 0.05 * 20 = 1.0000000000000002 style rounding.
    const double want = fraction * static_cast<double>(size());
    auto n = static_cast<std::size_t>(std::ceil(want - 1e-9));
    n = std::clamp<std::size_t>(n, 1, size());
    keep.assign(order.begin(), order.begin() + static_cast<long>(n));
  }
  WindowSet out = *this;
  out.starts_.clear();
  out.channels_.clear();
  out.masks_.clear();
  for (std::size_t i : keep) {
    out.starts_.push_back(starts_[i]);
    out.channels_.push_back(channels_[i]);
    if (!masks_.empty()) out.masks_.push_back(masks_[i]);
  }
  return out;
}

}  // namespace wq4ts
