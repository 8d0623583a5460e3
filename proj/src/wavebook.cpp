#include "wavebook.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "binio.hpp"
#include "error.hpp"
#include "fft.hpp"

namespace wq4ts {
namespace {

constexpr std::uint32_t kWavebookVersion = 1;
constexpr double kSqrt2 = std::numbers::sqrt2;

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Integer-node values of the scaling function: the eigenvector of the
// refinement matrix T[i][j] = sqrt2 * h[2i - j] for eigenvalue 1, reached by
// power iteration from the unit impulse. Columns of T sum to one for any
// orthogonal filter, so the iterate keeps unit sum.
std::vector<double> scaling_nodes(std::span<const double> h) {
  const int n = static_cast<int>(h.size());
  std::vector<double> v(n, 0.0), next(n);
  v[0] = 1.0;
  for (int iter = 0; iter < 2000; ++iter) {
    double diff = 0.0;
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int j = 0; j < n; ++j) {
        const int k = 2 * i - j;
        if (k >= 0 && k < n) acc += kSqrt2 * h[k] * v[j];
      }
      next[i] = acc;
      diff = std::max(diff, std::abs(acc - v[i]));
    }
    v.swap(next);
    if (diff < 1e-15) return v;
  }
  throw ConvergenceError("scaling function node values did not converge");
}

// One refinement level: phi on the 2^-(j+1) grid from phi on the 2^-j grid,
// phi(k / 2^(j+1)) = sqrt2 * sum_n h_n phi((k - n 2^j) / 2^j).
std::vector<double> refine(std::span<const double> h, std::span<const double> coarse, int level) {
  const long stride = 1L << level;
  const long len = (static_cast<long>(h.size()) - 1) * (stride << 1) + 1;
  std::vector<double> fine(len, 0.0);
  for (long k = 0; k < len; ++k) {
    double acc = 0.0;
    for (std::size_t n = 0; n < h.size(); ++n) {
      const long q = k - static_cast<long>(n) * stride;
      if (q >= 0 && q < static_cast<long>(coarse.size())) acc += h[n] * coarse[q];
    }
    fine[k] = kSqrt2 * acc;
  }
  return fine;
}

// psi on the 2^-(level+1) grid, index 0 at the left end of psi's support
// (t = g_first / 2).
std::vector<double> wavelet_from(const FilterPair& fp, std::span<const double> phi, int level) {
  const long stride = 1L << level;
  const long taps = static_cast<long>(fp.h.size());
  const long len = (taps - 1) * (stride << 1) + 1;
  const long first = fp.g_first_index();
  std::vector<double> psi(len, 0.0);
  for (long kp = 0; kp < len; ++kp) {
    const long k = kp + first * stride;
    double acc = 0.0;
    for (long idx = 0; idx < taps; ++idx) {
      const long n = first + idx;
      const long q = k - n * stride;
      if (q >= 0 && q < static_cast<long>(phi.size())) acc += fp.g[idx] * phi[q];
    }
    psi[kp] = kSqrt2 * acc;
  }
  return psi;
}

std::vector<double> parse_coefficients(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open filter file '" + path + "'");
  std::vector<double> h;
  std::string token;
  while (in >> token) {
    std::stringstream parts(token);
    std::string piece;
    while (std::getline(parts, piece, ',')) {
      if (piece.empty()) continue;
      try {
        std::size_t used = 0;
        h.push_back(std::stod(piece, &used));
        if (used != piece.size()) throw std::invalid_argument(piece);
      } catch (const std::exception&) {
        throw ParseError("filter file '" + path + "': not a number: '" + piece + "'");
      }
    }
  }
  if (h.empty()) throw ParseError("filter file '" + path + "' holds no coefficients");
  return h;
}

}  // namespace

std::size_t Wavebook::max_basis_length() const {
  std::size_t n = 0;
  for (const auto& b : bases) n = std::max(n, b.size());
  return n;
}

std::string Wavebook::content_id() const {
  std::vector<double> all;
  all.push_back(f_c);
  all.push_back(static_cast<double>(m));
  for (const auto& b : bases) all.insert(all.end(), b.begin(), b.end());
  return "wb-" + content_hash(all);
}

std::string content_hash(std::span<const double> values) {
  // FNV-1a over the raw bytes.
  std::uint64_t hash = 1469598103934665603ULL;
  const auto* p = reinterpret_cast<const unsigned char*>(values.data());
  for (std::size_t i = 0; i < values.size_bytes(); ++i) {
    hash ^= p[i];
    hash *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

double zero_mean_ratio(std::span<const double> a) {
  double sum = 0.0, abs_sum = 0.0;
  for (double x : a) {
    sum += x;
    abs_sum += std::abs(x);
  }
  return abs_sum > 0.0 ? std::abs(sum) / abs_sum : 0.0;
}

std::vector<double> named_lowpass(const std::string& spec) {
  if (spec == "haar") return {1.0 / kSqrt2, 1.0 / kSqrt2};
  if (spec == "db2") {
    const double s3 = std::sqrt(3.0);
    const double d = 4.0 * kSqrt2;
    return {(1.0 + s3) / d, (3.0 + s3) / d, (3.0 - s3) / d, (1.0 - s3) / d};
  }
  if (spec.rfind("file:", 0) == 0) return parse_coefficients(spec.substr(5));
  throw ConfigError("unknown filter '" + spec + "' (expected haar, db2 or file:<path>)");
}

FilterPair build_filter_pair(std::span<const double> h) {
  if (h.empty()) throw PreconditionError("build_filter_pair: empty low-pass filter");
  const double sum = std::accumulate(h.begin(), h.end(), 0.0);
  if (std::abs(sum - kSqrt2) > 1e-6) {
    throw NormalizationError("low-pass filter sums to " + std::to_string(sum) +
                             ", expected sqrt(2)");
  }
  const int taps = static_cast<int>(h.size());
  FilterPair fp;
  fp.h.assign(h.begin(), h.end());
  fp.support_offset = taps - 2;
  fp.g.resize(taps);
  for (int idx = 0; idx < taps; ++idx) {
    const int n = fp.g_first_index() + idx;
    const double sign = ((n - 1) % 2 == 0) ? 1.0 : -1.0;
    fp.g[idx] = sign * h[1 - n];
  }
  return fp;
}

double verify_unitary(const FilterPair& fp, int grid_points) {
  if (grid_points < 64) throw PreconditionError("verify_unitary: grid_points must be >= 64");
  using cd = std::complex<double>;
  auto response = [](std::span<const double> taps, int first, double w) {
    cd acc{0.0, 0.0};
    for (std::size_t i = 0; i < taps.size(); ++i) {
      const double n = static_cast<double>(first + static_cast<int>(i));
      acc += taps[i] * std::polar(1.0, -n * w);
    }
    return acc / kSqrt2;
  };
  double worst = 0.0;
  for (int k = 0; k < grid_points; ++k) {
    const double w = 2.0 * std::numbers::pi * k / grid_points;
    const double wp = w + std::numbers::pi;
    const cd h0 = response(fp.h, 0, w), h1 = response(fp.h, 0, wp);
    const cd g0 = response(fp.g, fp.g_first_index(), w);
    const cd g1 = response(fp.g, fp.g_first_index(), wp);
    worst = std::max(worst, std::abs(std::norm(h0) + std::norm(h1) - 1.0));
    worst = std::max(worst, std::abs(std::norm(g0) + std::norm(g1) - 1.0));
    worst = std::max(worst, std::abs(h0 * std::conj(g0) + h1 * std::conj(g1)));
  }
  return worst;
}

MotherWavelet make_mother(std::vector<double> amplitudes, int m, std::string id) {
  if (m < 1 || m > 30) throw PreconditionError("mother wavelet: m out of range");
  if (amplitudes.size() != (std::size_t{1} << m))
    throw PreconditionError("mother wavelet: expected 2^m amplitudes");
  MotherWavelet w;
  w.amplitudes = std::move(amplitudes);
  w.m = m;
  w.step = static_cast<double>(m) / static_cast<double>((std::size_t{1} << m) - 1);
  w.id = std::move(id);
  return w;
}

MotherWavelet cascade_mother(const FilterPair& fp, int m, std::string id) {
  if (m < 4) throw PreconditionError("cascade_mother: m must be >= 4, got " + std::to_string(m));
  if (m > 24) throw PreconditionError("cascade_mother: m must be <= 24");
  if (fp.h.size() < 2) throw PreconditionError("cascade_mother: filter needs at least 2 taps");

  std::vector<std::vector<double>> phi;
  phi.push_back(scaling_nodes(fp.h));
  for (int level = 0; level < m - 1; ++level) phi.push_back(refine(fp.h, phi.back(), level));

  // The final band-pass step makes m iterations in total.
  const std::vector<double> psi = wavelet_from(fp, phi[m - 1], m - 1);
  const std::vector<double> coarse = wavelet_from(fp, phi[m - 2], m - 2);

  double diff = 0.0;
  for (std::size_t k = 0; k < coarse.size(); ++k) {
    const double d = psi[2 * k] - coarse[k];
    diff += d * d;
  }
  const double coarse_norm = l2_norm(coarse);
  if (!(coarse_norm > 0.0)) throw DegenerateError("cascade produced an all-zero wavelet");
  const double change = std::sqrt(diff) / coarse_norm;
  if (!(change <= 1e-3)) {
    throw ConvergenceError("cascade relative change " + std::to_string(change) +
                           " exceeds 1e-3 at depth " + std::to_string(m));
  }

  // psi covers (taps - 1) * 2^m grid intervals; average them in groups of
  // (taps - 1) so the 2^m cells tile the support exactly.
  const std::size_t count = std::size_t{1} << m;
  const std::size_t group = fp.h.size() - 1;
  std::vector<double> amps(count);
  for (std::size_t c = 0; c < count; ++c) {
    double acc = 0.0;
    for (std::size_t k = 0; k < group; ++k) acc += psi[c * group + k];
    amps[c] = acc / static_cast<double>(group);
  }
  const double norm = l2_norm(amps);
  if (!(norm > 0.0)) throw DegenerateError("mother wavelet has zero energy");
  for (double& a : amps) a /= norm;

  MotherWavelet w = make_mother(std::move(amps), m, std::move(id));
  w.f_c = estimate_center_frequency(w);
  return w;
}

double estimate_center_frequency(const MotherWavelet& w) {
  const auto& a = w.amplitudes;
  if (std::all_of(a.begin(), a.end(), [](double x) { return x == 0.0; }))
    throw DegenerateError("center frequency of an all-zero sequence");
  const std::vector<double> mag = fft::dft_magnitudes(a);
  std::size_t best = 1;
  for (std::size_t k = 2; k < mag.size(); ++k) {
    if (mag[k] > mag[best]) best = k;
  }
  return static_cast<double>(best) / (static_cast<double>(a.size()) * w.step);
}

std::vector<double> compute_scales(double f_c, int lambda) {
  if (!(f_c > 0.0)) throw PreconditionError("compute_scales: f_c must be positive");
  if (lambda < 1) throw PreconditionError("compute_scales: lambda must be >= 1");
  std::vector<double> s(lambda);
  for (int i = 1; i <= lambda; ++i) s[i - 1] = (2.0 * f_c * lambda) / i;
  return s;
}

long even_round(double x) { return 2L * std::lround(x / 2.0); }

std::vector<double> sample_basis(const MotherWavelet& w, double scale) {
  if (!(scale > 0.0)) throw ScaleError("sample_basis: scale must be positive");
  const long n = even_round(w.m * scale);
  if (n < 2) {
    throw ScaleError("sample_basis: basis length even_round(" + std::to_string(w.m * scale) +
                     ") = " + std::to_string(n) + " is below 2");
  }
  const auto& a = w.amplitudes;
  const double last = static_cast<double>(a.size() - 1);
  std::vector<double> out(n);
  for (long j = 1; j <= n; ++j) {
    const double coord = last * static_cast<double>(j) / static_cast<double>(n);
    const auto lo = static_cast<std::size_t>(std::floor(coord));
    if (lo >= a.size() - 1) {
      out[j - 1] = a.back();
      continue;
    }
    const double frac = coord - static_cast<double>(lo);
    out[j - 1] = frac == 0.0 ? a[lo] : a[lo] + frac * (a[lo + 1] - a[lo]);
  }
  return out;
}

Wavebook build_wavebook(const MotherWavelet& w, int lambda) {
  if (lambda < 1) throw PreconditionError("build_wavebook: lambda must be >= 1");
  Wavebook book;
  book.lambda = lambda;
  book.m = w.m;
  book.f_c = w.f_c;
  book.scales = compute_scales(w.f_c, lambda);
  book.mother = w.amplitudes;
  book.mother_id = "mw-" + content_hash(w.amplitudes);
  book.bases.reserve(lambda);
  for (int i = 0; i < lambda; ++i) {
    try {
      book.bases.push_back(sample_basis(w, book.scales[i]));
    } catch (const ScaleError& e) {
      throw ScaleError("basis " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return book;
}

void save_wavebook(const Wavebook& book, const std::string& path) {
  binio::Writer w;
  w.magic("WQBK");
  w.u32(kWavebookVersion);
  w.u32(static_cast<std::uint32_t>(book.m));
  w.u32(static_cast<std::uint32_t>(book.lambda));
  w.f64(book.f_c);
  for (const auto& b : book.bases) {
    w.u32(static_cast<std::uint32_t>(b.size()));
    w.f64s(b);
  }
  w.u32(static_cast<std::uint32_t>(book.mother.size()));
  w.f64s(book.mother);
  w.save(path);
}

Wavebook load_wavebook(const std::string& path) {
  auto r = binio::Reader::open(path);
  r.expect_magic("WQBK");
  r.expect_version(kWavebookVersion);
  Wavebook book;
  book.m = static_cast<int>(r.u32());
  book.lambda = static_cast<int>(r.u32());
  if (book.m < 1 || book.m > 30) r.fail("resolution exponent out of range");
  if (book.lambda < 1) r.fail("wavebook size must be >= 1");
  book.f_c = r.f64();
  if (!(book.f_c > 0.0) || !std::isfinite(book.f_c)) r.fail("center frequency must be positive");
  book.bases.resize(book.lambda);
  for (auto& b : book.bases) {
    const std::uint32_t n = r.u32();
    if (n < 2 || n % 2 != 0) r.fail("basis length must be even and >= 2");
    if (n > (1u << 28)) r.fail("basis length too large");
    b.resize(n);
    r.f64s(b);
  }
  const std::uint32_t mother_len = r.u32();
  if (mother_len != (1u << book.m)) r.fail("mother length is not 2^m");
  book.mother.resize(mother_len);
  r.f64s(book.mother);
  r.expect_end();
  book.scales = compute_scales(book.f_c, book.lambda);
  book.mother_id = "mw-" + content_hash(book.mother);
  return book;
}

}  // namespace wq4ts
