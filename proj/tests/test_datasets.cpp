#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "datasets.hpp"
#include "error.hpp"

using namespace wq4ts;

namespace {

std::string write_temp(const std::string& name, const std::string& body) {
  const auto path = (std::filesystem::temp_directory_path() / ("wq4ts_test_" + name)).string();
  std::ofstream(path, std::ios::trunc) << body;
  return path;
}

DomainDataset ramp(std::size_t rows, std::size_t channels) {
  std::vector<double> v(rows * channels);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < channels; ++c) v[r * channels + c] = static_cast<double>(r) + 1000.0 * c;
  return dataset_from_matrix("ramp", std::move(v), rows, channels);
}

}  // namespace

TEST_CASE("load_ett_csv: toy file, delimiters and errors") {
  const auto path = write_temp("toy.csv", "date,a,b\n2020-01-01 00:00,1,2\n2020-01-01 01:00,3,4\n2020-01-01 02:00,5,6\n");
  auto ds = load_ett_csv(path);
  CHECK(ds.rows == 3);
  CHECK(ds.channels == 2);
  CHECK(ds.at(2, 1) == 6.0);
  CHECK(ds.timestamps[1] == "2020-01-01 01:00");
  CHECK(ds.name == "wq4ts_test_toy");

  const auto tsv = write_temp("toy.tsv", "date\ta\n1\t1.5\n2\t2.5\n3\t3.5\n4\t4.5\n5\t5.5\n6\t6.5\n7\t7.5\n8\t8.5\n9\t9.5\n10\t10.5\n");
  const auto t = load_ett_csv(tsv);
  CHECK(t.channels == 1);
  CHECK(t.rows == 10);
  CHECK(t.train_end == 7);
  CHECK(t.val_end == 8);
  CHECK(t.test_end == 10);

  const auto bad = write_temp("bad.csv", "date,a,b\nx,1,2\ny,3,oops\n");
  try {
    load_ett_csv(bad);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find(":3:") != std::string::npos);
    CHECK(msg.find("'b'") != std::string::npos);
  }
  const auto headerless = write_temp("noheader.csv", "2020,1,2\n2021,3,4\n");
  CHECK_THROWS_AS(load_ett_csv(headerless), MissingHeaderError);
  CHECK_THROWS_AS(load_ett_csv(write_temp("empty.csv", "")), MissingHeaderError);
  CHECK_THROWS_AS(load_ett_csv("/nonexistent/file.csv"), IoError);
  for (const auto& p : {path, tsv, bad, headerless}) std::remove(p.c_str());
}

TEST_CASE("ETTh1-sized layout reproduces the published window counts") {
  const auto ds = ramp(17420, 1);
  CHECK(ds.train_end == 8640);
  CHECK(ds.val_end == 11520);
  CHECK(ds.test_end == 14400);
  CHECK(make_forecast_windows(ds, 96, 0, Split::kTrain, true).size() == 8545);
  CHECK(make_forecast_windows(ds, 96, 0, Split::kVal, true).size() == 2881);
  CHECK(make_forecast_windows(ds, 96, 0, Split::kTest, true).size() == 2881);
  const auto ds15 = ramp(69680, 1);
  CHECK(ds15.train_end == 34560);
}

TEST_CASE("forecast windows: counts, channel independence, contents") {
  auto ds = dataset_from_matrix("ten", std::vector<double>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, 10, 1);
  ds.train_end = 10;
  ds.val_end = 10;
  ds.test_end = 10;
  const auto w = make_forecast_windows(ds, 3, 2, Split::kTrain);
  CHECK(w.size() == 6);
  CHECK(forecast_window_count(10, 3, 2, 1) == 6);
  const auto s = w.at(2);
  CHECK(s.input == std::vector<double>{2, 3, 4});
  CHECK(s.target == std::vector<double>{5, 6});
  CHECK_THROWS_AS(make_forecast_windows(ds, 8, 3, Split::kTrain), TooShortError);

  const auto multi = ramp(200, 7);
  for (Split sp : {Split::kTrain, Split::kVal, Split::kTest}) {
    const auto ws = make_forecast_windows(multi, 5, 3, sp);
    CHECK(ws.size() == forecast_window_count(multi.split_length(sp), 5, 3, 7));
    // No window straddles its split.
    for (std::size_t i = 0; i < ws.size(); ++i) {
      CHECK(ws.start_of(i) >= multi.split_begin(sp));
      CHECK(ws.start_of(i) + 8 <= multi.split_end(sp));
    }
  }
  const auto ws = make_forecast_windows(multi, 5, 3, Split::kTrain);
  CHECK(ws.at(3).channel == 3);
  CHECK(ws.at(3).input.front() == 3000.0);
  CHECK(ws.at(7).input.front() == 1.0);
}

TEST_CASE("standardize: train statistics, round trip, constant channel") {
  std::vector<double> v;
  for (int r = 0; r < 100; ++r) {
    v.push_back(std::sin(0.3 * r) * 5.0 + 2.0);
    v.push_back(4.0);
  }
  auto ds = dataset_from_matrix("s", v, 100, 2);
  const auto raw = ds;
  standardize(ds);
  CHECK(ds.constant[1]);
  CHECK(ds.stddev[1] == 1.0);
  for (std::size_t r = 0; r < ds.rows; ++r) {
    CHECK(ds.at(r, 1) == 0.0);
    for (std::size_t c = 0; c < 2; ++c) CHECK(std::abs(inverse_standardize(ds, c, ds.at(r, c)) - raw.at(r, c)) < 1e-12);
  }
  double sum = 0.0, sq = 0.0;
  for (std::size_t r = 0; r < ds.train_end; ++r) {
    sum += ds.at(r, 0);
    sq += ds.at(r, 0) * ds.at(r, 0);
  }
  CHECK(std::abs(sum / ds.train_end) < 1e-12);
  CHECK(sq / ds.train_end == doctest::Approx(1.0).epsilon(1e-12));

  // Statistics ignore rows past the train split.
  auto leak = raw;
  for (std::size_t r = leak.train_end; r < leak.rows; ++r) leak.values[r * 2] = 1e6;
  standardize(leak);
  CHECK(leak.mean[0] == doctest::Approx(ds.mean[0]).epsilon(1e-14));

  // Re-standardizing standardized data is a near-identity.
  auto again = dataset_from_matrix("z", ds.values, 100, 2);
  standardize(again);
  for (std::size_t i = 0; i < again.values.size(); ++i) CHECK(std::abs(again.values[i] - ds.values[i]) < 1e-12);
}

TEST_CASE("imputation windows: mask sizes and determinism") {
  const auto ds = ramp(400, 2);
  const auto a = make_imputation_windows(ds, 96, 0.25, 9, Split::kTrain);
  const auto b = make_imputation_windows(ds, 96, 0.25, 9, Split::kTrain);
  const auto c = make_imputation_windows(ds, 96, 0.25, 10, Split::kTrain);
  REQUIRE(a.size() == forecast_window_count(ds.train_end, 96, 0, 2));
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); i += 17) {
    const auto s = a.at(i);
    int hidden = 0;
    for (std::size_t t = 0; t < 96; ++t) {
      hidden += s.mask[t];
      if (s.mask[t]) CHECK(s.input[t] == 0.0);
      else CHECK(s.input[t] == s.target[t]);
    }
    CHECK(hidden == 24);
    CHECK(s.mask == b.at(i).mask);
    any_diff = any_diff || s.mask != c.at(i).mask;
  }
  CHECK(any_diff);
  CHECK(mask_count(96, 0.5) == 48);
  CHECK(mask_count(96, 0.125) == 12);
  CHECK(mask_count(96, 0.375) == 36);
  CHECK(mask_count(4, 0.01) == 1);
  CHECK_THROWS_AS(make_imputation_windows(ds, 96, 1.0, 1, Split::kTrain), PreconditionError);
  CHECK_THROWS_AS(make_imputation_windows(ds, 500, 0.25, 1, Split::kTrain), TooShortError);
}

TEST_CASE("fewshot: chronological prefix of ceil(f N)") {
  const auto ds = ramp(300, 3);
  const auto ws = make_forecast_windows(ds, 10, 5, Split::kTrain);
  const auto few = ws.fewshot(0.05, 1);
  CHECK(few.size() == static_cast<std::size_t>(std::ceil(0.05 * ws.size())));
  for (std::size_t i = 0; i < few.size(); ++i) {
    CHECK(few.start_of(i) == ws.start_of(i));
    CHECK(few.channel_of(i) == ws.channel_of(i));
  }
  CHECK(ws.fewshot(1.0, 1).size() == ws.size());
  CHECK_THROWS_AS(ws.fewshot(0.0, 1), ConfigError);
  CHECK_THROWS_AS(ws.fewshot(1.5, 1), ConfigError);
}

TEST_CASE("load_ucr_tsv: remapping, validation split, errors") {
  std::string train, test;
  for (int i = 0; i < 10; ++i) train += std::to_string(i % 2 ? 7 : 3) + "\t" + std::to_string(i) + "\t1\t2\t3\n";
  for (int i = 0; i < 4; ++i) test += std::to_string(i % 2 ? 7 : 3) + "," + std::to_string(i) + ",1,2,3\n";
  const auto tr = write_temp("X_TRAIN.tsv", train), te = write_temp("X_TEST.tsv", test);
  const auto ds = load_ucr_tsv(tr, te, 1);
  CHECK(ds.name == "wq4ts_test_X");
  CHECK(ds.num_classes() == 2);
  CHECK(ds.label_values == std::vector<long>{3, 7});
  CHECK(ds.train.size() == 8);
  CHECK(ds.val.size() == 2);
  CHECK(ds.test.size() == 4);
  std::set<int> val_labels;
  for (const auto& s : ds.val) val_labels.insert(s.label);
  CHECK(val_labels == std::set<int>{0, 1});
  CHECK(ds.test[1].label == 1);
  CHECK(ds.test[0].values.size() == 4);
  const auto again = load_ucr_tsv(tr, te, 1);
  for (std::size_t i = 0; i < ds.val.size(); ++i) CHECK(ds.val[i].values == again.val[i].values);

  const auto single = write_temp("S_TRAIN.tsv", "5\t1\t2\n5\t3\t4\n5\t3\t5\n");
  const auto single_test = write_temp("S_TEST.tsv", "5\t1\t2\n");
  const auto s = load_ucr_tsv(single, single_test);
  CHECK(s.num_classes() == 1);
  CHECK(s.warnings.size() == 1);

  CHECK_THROWS_AS(load_ucr_tsv(write_temp("R_TRAIN.tsv", "1\t1\t2\n2\t1\n"), te), RaggedLengthError);
  CHECK_THROWS_AS(load_ucr_tsv(tr, write_temp("U_TEST.tsv", "9\t1\t2\t3\t4\n")), UnknownLabelError);
  CHECK_THROWS_AS(load_ucr_tsv(tr, write_temp("P_TEST.tsv", "x\t1\t2\t3\t4\n")), ParseError);
}

TEST_CASE("classification windows and stratified few-shot") {
  std::string train, test;
  for (int i = 0; i < 20; ++i) train += std::to_string(i < 14 ? 1 : 2) + "\t0\t" + std::to_string(i) + "\t4\n";
  for (int i = 0; i < 6; ++i) test += "1\t0\t1\t2\n";
  const auto ds = load_ucr_tsv(write_temp("C_TRAIN.tsv", train), write_temp("C_TEST.tsv", test), 3);
  const auto ws = make_classification_windows(ds, 5, Split::kTrain);
  CHECK(ws.size() == ds.train.size());
  CHECK(ws.num_classes() == 2);
  const auto s = ws.at(0);
  CHECK(s.input.size() == 5);
  CHECK(s.input.front() == ds.train[0].values.front());
  CHECK(s.input.back() == ds.train[0].values.back());
  const auto few = ws.fewshot(0.25, 4);
  int per_class[2] = {0, 0};
  for (std::size_t i = 0; i < few.size(); ++i) ++per_class[few.at(i).label];
  CHECK(per_class[0] == static_cast<int>(std::ceil(0.25 * 11)));
  CHECK(per_class[1] == static_cast<int>(std::ceil(0.25 * 5)));
}

TEST_CASE("resample_linear") {
  CHECK(resample_linear({0.0, 2.0}, 3) == std::vector<double>{0.0, 1.0, 2.0});
  CHECK(resample_linear({1.0, 2.0, 3.0}, 3) == std::vector<double>{1.0, 2.0, 3.0});
  CHECK(resample_linear({4.0}, 3) == std::vector<double>{4.0, 4.0, 4.0});
  const auto down = resample_linear({0, 1, 2, 3, 4}, 3);
  CHECK(down == std::vector<double>{0.0, 2.0, 4.0});
}
