#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "error.hpp"
#include "wavebook.hpp"

using namespace wq4ts;

namespace {

const double kInvSqrt2 = 1.0 / std::numbers::sqrt2;

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("wq4ts_test_" + name)).string();
}

// Naive DFT magnitude peak, independent of the FFTW path.
std::size_t naive_peak_bin(const std::vector<double>& a) {
  const std::size_t n = a.size();
  std::size_t best = 1;
  double best_mag = -1.0;
  for (std::size_t k = 1; k < n; ++k) {
    double re = 0.0, im = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double ang = -2.0 * std::numbers::pi * static_cast<double>(k * t) / static_cast<double>(n);
      re += a[t] * std::cos(ang);
      im += a[t] * std::sin(ang);
    }
    const double mag = std::hypot(re, im);
    if (mag > best_mag + 1e-9) {
      best_mag = mag;
      best = k;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("build_filter_pair: Haar band-pass follows g_n = (-1)^(n-1) h_(1-n)") {
  const auto fp = build_filter_pair(named_lowpass("haar"));
  REQUIRE(fp.g.size() == 2);
  CHECK(fp.g_first_index() == 0);
  // n = 0: -h_1, n = 1: +h_0
  CHECK(fp.g[0] == doctest::Approx(-kInvSqrt2).epsilon(1e-15));
  CHECK(fp.g[1] == doctest::Approx(kInvSqrt2).epsilon(1e-15));
}

TEST_CASE("build_filter_pair: db2 band-pass is the sign-alternated reversal") {
  const auto h = named_lowpass("db2");
  CHECK(h[0] == doctest::Approx(0.4829629131).epsilon(1e-9));
  CHECK(h[1] == doctest::Approx(0.8365163037).epsilon(1e-9));
  CHECK(h[2] == doctest::Approx(0.2241438680).epsilon(1e-9));
  CHECK(h[3] == doctest::Approx(-0.1294095226).epsilon(1e-9));
  const auto fp = build_filter_pair(h);
  // Support n = -2..1; hand evaluation of (-1)^(n-1) h_(1-n).
  CHECK(fp.g_first_index() == -2);
  CHECK(fp.support_offset == 2);
  CHECK(fp.g[0] == doctest::Approx(0.1294095226).epsilon(1e-9));
  CHECK(fp.g[1] == doctest::Approx(0.2241438680).epsilon(1e-9));
  CHECK(fp.g[2] == doctest::Approx(-0.8365163037).epsilon(1e-9));
  CHECK(fp.g[3] == doctest::Approx(0.4829629131).epsilon(1e-9));
  // Published db2 decomposition high-pass differs by an overall sign only.
  const double published[] = {-0.1294095226, -0.2241438680, 0.8365163037, -0.4829629131};
  for (int i = 0; i < 4; ++i) CHECK(fp.g[i] == doctest::Approx(-published[i]).epsilon(1e-9));
}

TEST_CASE("build_filter_pair: invariants and normalization error") {
  const auto fp = build_filter_pair(named_lowpass("db2"));
  CHECK(fp.g.size() == fp.h.size());
  double sum = 0.0;
  for (double v : fp.h) sum += v;
  CHECK(std::abs(sum - std::numbers::sqrt2) < 1e-10);

  const std::vector<double> bad = {0.5, 0.5};
  CHECK_THROWS_AS(build_filter_pair(bad), NormalizationError);
  CHECK_THROWS_AS(build_filter_pair(std::vector<double>{}), PreconditionError);
}

TEST_CASE("verify_unitary: exact filters pass, perturbed Haar fails") {
  CHECK(verify_unitary(build_filter_pair(named_lowpass("haar")), 256) < 1e-12);
  CHECK(verify_unitary(build_filter_pair(named_lowpass("db2")), 256) < 1e-10);
  CHECK(verify_unitary(build_filter_pair(named_lowpass("db2")), 512) < 1e-9);

  // Scale after construction so the pair is built but no longer unitary.
  auto fp = build_filter_pair(named_lowpass("haar"));
  for (double& v : fp.h) v *= 1.01;
  for (double& v : fp.g) v *= 1.01;
  const double dev = verify_unitary(fp, 256);
  CHECK(dev > 1e-2);
  CHECK(dev == doctest::Approx(1.01 * 1.01 - 1.0).epsilon(1e-9));

  CHECK_THROWS_AS(verify_unitary(fp, 32), PreconditionError);
}

TEST_CASE("verify_unitary: an odd shift of g breaks the cross condition") {
  auto fp = build_filter_pair(named_lowpass("db2"));
  fp.support_offset -= 1;
  CHECK(verify_unitary(fp, 256) > 0.5);
  fp.support_offset -= 1;  // even total shift keeps the pair unitary
  CHECK(verify_unitary(fp, 256) < 1e-10);
}

TEST_CASE("cascade_mother: Haar m=4 is a two-level step with unit energy") {
  const auto w = cascade_mother(build_filter_pair(named_lowpass("haar")), 4);
  REQUIRE(w.amplitudes.size() == 16);
  // Band-pass sign puts the negative half first.
  for (int t = 0; t < 8; ++t) CHECK(w.amplitudes[t] == doctest::Approx(-0.25).epsilon(1e-15));
  for (int t = 8; t < 16; ++t) CHECK(w.amplitudes[t] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(w.step == doctest::Approx(4.0 / 15.0));
}

TEST_CASE("cascade_mother: db2 m=8 admissibility") {
  const auto w = cascade_mother(build_filter_pair(named_lowpass("db2")), 8);
  REQUIRE(w.amplitudes.size() == 256);
  CHECK(zero_mean_ratio(w.amplitudes) < 1e-3);
  double energy = 0.0;
  for (double a : w.amplitudes) energy += a * a;
  CHECK(std::abs(std::sqrt(energy) - 1.0) < 1e-10);
  CHECK(w.f_c > 0.0);
}

TEST_CASE("cascade_mother: precondition and convergence errors") {
  CHECK_THROWS_AS(cascade_mother(build_filter_pair(named_lowpass("haar")), 2), PreconditionError);
  // Sums to sqrt2 but is not orthogonal: node iteration diverges.
  const std::vector<double> h = {0.9, -0.3, 0.814213562373095};
  CHECK_THROWS_AS(cascade_mother(build_filter_pair(h), 6), ConvergenceError);
}

TEST_CASE("cascade_mother: zero-mean and unit energy for several depths and filters") {
  for (const char* name : {"haar", "db2"})
    for (int m = 4; m <= 10; ++m) {
      const auto w = cascade_mother(build_filter_pair(named_lowpass(name)), m);
      CHECK(zero_mean_ratio(w.amplitudes) < 1e-3);
      double e = 0.0;
      for (double a : w.amplitudes) e += a * a;
      CHECK(std::abs(std::sqrt(e) - 1.0) < 1e-10);
    }
}

TEST_CASE("estimate_center_frequency: pure cosine, Haar regression, zero input") {
  const int m = 6;
  std::vector<double> tone(64);
  for (int t = 0; t < 64; ++t) tone[t] = std::cos(2.0 * std::numbers::pi * 4.0 * t / 64.0);
  auto w = make_mother(tone, m);
  const double bin = 1.0 / (64 * w.step);
  CHECK(std::abs(estimate_center_frequency(w) - 4.0 / 6.0) <= bin);
  CHECK(naive_peak_bin(tone) == 4);

  const auto haar = cascade_mother(build_filter_pair(named_lowpass("haar")), m);
  // Square wave: fundamental in bin 1, f_c = 1 / (64 * 6/63) = 63/384.
  CHECK(naive_peak_bin(haar.amplitudes) == 1);
  CHECK(haar.f_c == doctest::Approx(63.0 / 384.0).epsilon(1e-14));

  CHECK_THROWS_AS(estimate_center_frequency(make_mother(std::vector<double>(64, 0.0), m)), DegenerateError);
}

TEST_CASE("estimate_center_frequency agrees with a naive DFT peak for db2") {
  for (int m = 4; m <= 9; ++m) {
    const auto w = cascade_mother(build_filter_pair(named_lowpass("db2")), m);
    const double expected = static_cast<double>(naive_peak_bin(w.amplitudes)) / (w.amplitudes.size() * w.step);
    CHECK(w.f_c == doctest::Approx(expected).epsilon(1e-14));
  }
}

TEST_CASE("compute_scales") {
  const auto s = compute_scales(1.0, 4);
  REQUIRE(s.size() == 4);
  CHECK(s[0] == 8.0);
  CHECK(s[1] == 4.0);
  CHECK(s[2] == doctest::Approx(8.0 / 3.0).epsilon(1e-15));
  CHECK(s[3] == 2.0);
  CHECK(compute_scales(0.5, 1) == std::vector<double>{1.0});
  const auto big = compute_scales(1.0, 100);
  CHECK(big.front() == 200.0);
  CHECK(big.back() == 2.0);
  for (std::size_t i = 1; i < big.size(); ++i) CHECK(big[i] < big[i - 1]);
  // S_lambda == 2 f_c exactly.
  for (double fc : {0.1, 0.2490234375, 0.75, 3.3})
    for (int lambda : {1, 7, 16, 100}) CHECK(compute_scales(fc, lambda).back() == 2.0 * fc);
  CHECK_THROWS_AS(compute_scales(0.0, 4), PreconditionError);
  CHECK_THROWS_AS(compute_scales(1.0, 0), PreconditionError);
}

TEST_CASE("even_round") {
  CHECK(even_round(0.8) == 0);
  CHECK(even_round(1.0) == 2);  // half away from zero
  CHECK(even_round(2.9) == 2);
  CHECK(even_round(3.1) == 4);
  CHECK(even_round(48.0) == 48);
}

TEST_CASE("sample_basis: coordinates (2^m - 1) j / n with linear interpolation") {
  std::vector<double> a(16);
  for (int t = 0; t < 16; ++t) a[t] = std::sin(0.7 * t) + 0.1 * t * t;
  const auto w = make_mother(a, 4);
  // n = even_round(4 * 2) = 8.
  const auto b = sample_basis(w, 2.0);
  REQUIRE(b.size() == 8);
  for (int j = 1; j <= 8; ++j) {
    const double coord = 15.0 * j / 8.0;
    const int lo = static_cast<int>(std::floor(coord));
    const double frac = coord - lo;
    const double expected = lo >= 15 ? a[15] : a[lo] * (1.0 - frac) + a[lo + 1] * frac;
    CHECK(b[j - 1] == doctest::Approx(expected).epsilon(1e-14));
  }
  CHECK(b[7] == a[15]);
}

TEST_CASE("sample_basis: full-length sampling lands on the last amplitude and stays interpolated") {
  std::vector<double> a(16);
  for (int t = 0; t < 16; ++t) a[t] = t * t;
  const auto w = make_mother(a, 4);
  const auto b = sample_basis(w, 4.0);  // n = 16
  REQUIRE(b.size() == 16);
  CHECK(b[15] == a[15]);
  for (int j = 1; j <= 16; ++j) {
    const double coord = 15.0 * j / 16.0;
    CHECK(b[j - 1] >= a[static_cast<int>(std::floor(coord))]);
  }
}

TEST_CASE("sample_basis: too-small scale is a ScaleError") {
  const auto w = make_mother(std::vector<double>(16, 1.0), 4);
  CHECK_THROWS_AS(sample_basis(w, 0.05), ScaleError);
  CHECK_THROWS_AS(sample_basis(w, 0.0), ScaleError);
}

TEST_CASE("build_wavebook: lengths, scales, invariants") {
  std::vector<double> tone(64);
  for (int t = 0; t < 64; ++t) tone[t] = std::sin(2.0 * std::numbers::pi * t / 64.0);
  auto w = make_mother(tone, 6);
  w.f_c = 1.0;
  const auto book = build_wavebook(w, 4);
  REQUIRE(book.bases.size() == 4);
  CHECK(book.bases[0].size() == 48);
  CHECK(book.bases[1].size() == 24);
  CHECK(book.bases[2].size() == 16);
  CHECK(book.bases[3].size() == 12);
  CHECK(book.f_c == 1.0);
  CHECK(book.mother_id.rfind("mw-", 0) == 0);

  const auto single = build_wavebook(w, 1);
  CHECK(single.bases.size() == 1);
  CHECK(static_cast<long>(single.bases[0].size()) == even_round(6 * 2.0 * 1.0));

  CHECK_THROWS_AS(build_wavebook(w, 0), PreconditionError);

  // Lengths never increase with i and are always even and >= 2.
  const auto db2 = cascade_mother(build_filter_pair(named_lowpass("db2")), 8);
  const auto big = build_wavebook(db2, 100);
  for (std::size_t i = 0; i < big.bases.size(); ++i) {
    CHECK(big.bases[i].size() % 2 == 0);
    CHECK(big.bases[i].size() >= 2);
    CHECK(static_cast<long>(big.bases[i].size()) == even_round(db2.m * big.scales[i]));
    if (i > 0) CHECK(big.bases[i].size() <= big.bases[i - 1].size());
  }
}

TEST_CASE("build_wavebook: ScaleError names the offending basis") {
  auto w = make_mother(std::vector<double>(16, 1.0), 4);
  w.f_c = 0.01;
  try {
    build_wavebook(w, 2);
    FAIL("expected ScaleError");
  } catch (const ScaleError& e) {
    CHECK(std::string(e.what()).find("basis 1") != std::string::npos);
  }
}

TEST_CASE("wavebook file round trip and format errors") {
  const auto w = cascade_mother(build_filter_pair(named_lowpass("db2")), 6);
  const auto book = build_wavebook(w, 8);
  const auto path = temp_path("book.wqbk");
  save_wavebook(book, path);
  const auto loaded = load_wavebook(path);
  CHECK(loaded == book);

  // Truncation at every prefix length must be reported, never crash.
  std::ifstream in(path, std::ios::binary);
  const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto cut = temp_path("cut.wqbk");
  for (std::size_t len : {std::size_t{0}, std::size_t{3}, std::size_t{10}, bytes.size() / 2, bytes.size() - 1}) {
    std::ofstream(cut, std::ios::binary | std::ios::trunc).write(bytes.data(), static_cast<std::streamsize>(len));
    CHECK_THROWS_AS(load_wavebook(cut), FormatError);
  }

  auto versioned = bytes;
  versioned[4] = 7;
  std::ofstream(cut, std::ios::binary | std::ios::trunc).write(versioned.data(), static_cast<std::streamsize>(versioned.size()));
  try {
    load_wavebook(cut);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("expected 1") != std::string::npos);
    CHECK(msg.find("found 7") != std::string::npos);
  }
  CHECK_THROWS_AS(load_wavebook(temp_path("does_not_exist.wqbk")), IoError);
  std::remove(path.c_str());
  std::remove(cut.c_str());
}

TEST_CASE("named_lowpass: file-backed coefficients") {
  const auto path = temp_path("filter.txt");
  std::ofstream(path) << "0.7071067811865476, 0.7071067811865476\n";
  const auto h = named_lowpass("file:" + path);
  CHECK(h.size() == 2);
  CHECK(verify_unitary(build_filter_pair(h), 128) < 1e-12);
  std::ofstream(path) << "0.5 abc\n";
  CHECK_THROWS_AS(named_lowpass("file:" + path), ParseError);
  CHECK_THROWS_AS(named_lowpass("sym99"), ConfigError);
  std::remove(path.c_str());
}
