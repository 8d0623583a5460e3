#include "tokenizer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "binio.hpp"
#include "error.hpp"
#include "fft.hpp"

namespace wq4ts {
namespace {

void check_recode_args(std::size_t l, std::size_t n) {
  if (l < 1) throw PreconditionError("recode: empty series");
  if (n < 2) throw PreconditionError("recode: basis length must be >= 2");
  if (n % 2 != 0) throw OddKernelError("recode: basis length " + std::to_string(n) + " is odd");
}

// Centered difference of a full convolution into one token row.
void recode_from_conv(std::span<const double> conv, std::size_t l, std::size_t n, double scale,
                      double* row) {
  const double gain = -std::sqrt(scale);
  const std::size_t half = n / 2;
  // 1-based: p_j = d_{j + n/2 - 1} = -sqrt(s) (c_{j + n/2} - c_{j + n/2 - 1}).
  for (std::size_t j = 1; j <= l; ++j) {
    const std::size_t hi = j + half;  // 1-based c index
    row[j - 1] = gain * (conv[hi - 1] - conv[hi - 2]);
  }
}

}  // namespace

std::vector<double> convolve(std::span<const double> x, std::span<const double> kernel) {
  if (x.empty() || kernel.empty()) throw PreconditionError("convolve: empty input");
  std::vector<double> c(x.size() + kernel.size() - 1, 0.0);
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double xk = x[k];
    for (std::size_t t = 0; t < kernel.size(); ++t) c[k + t] += xk * kernel[t];
  }
  return c;
}

std::vector<double> difference(std::span<const double> x, std::span<const double> kernel, double scale) {
  if (kernel.size() < 2) throw PreconditionError("difference: basis length must be >= 2");
  if (!(scale > 0.0)) throw PreconditionError("difference: scale must be positive");
  const std::vector<double> c = convolve(x, kernel);
  const double gain = -std::sqrt(scale);
  std::vector<double> d(c.size() - 1);
  for (std::size_t j = 0; j + 1 < c.size(); ++j) d[j] = gain * (c[j + 1] - c[j]);
  return d;
}

std::vector<double> recode(std::span<const double> x, std::span<const double> kernel, double scale) {
  check_recode_args(x.size(), kernel.size());
  if (!(scale > 0.0)) throw PreconditionError("recode: scale must be positive");
  const std::vector<double> c = convolve(x, kernel);
  std::vector<double> p(x.size());
  recode_from_conv(c, x.size(), kernel.size(), scale, p.data());
  return p;
}

TokenGrid tokenize(std::span<const double> x, const Wavebook& book) {
  if (x.empty()) throw PreconditionError("tokenize: empty series");
  TokenGrid grid;
  grid.lambda = book.lambda;
  grid.length = static_cast<int>(x.size());
  grid.wavebook_id = book.content_id();
  grid.values.assign(static_cast<std::size_t>(grid.lambda) * grid.length, 0.0);
  for (int i = 0; i < book.lambda; ++i) {
    const auto& basis = book.bases[i];
    check_recode_args(x.size(), basis.size());
    const std::vector<double> c = convolve(x, basis);
    recode_from_conv(c, x.size(), basis.size(), book.scales[i], &grid.at(i, 0));
  }
  return grid;
}

TokenGrid tokenize_fft(std::span<const double> x, const Wavebook& book) {
  if (x.empty()) throw PreconditionError("tokenize: empty series");
  TokenGrid grid;
  grid.lambda = book.lambda;
  grid.length = static_cast<int>(x.size());
  grid.wavebook_id = book.content_id();
  grid.values.assign(static_cast<std::size_t>(grid.lambda) * grid.length, 0.0);
  const fft::Convolver conv(x, book.max_basis_length());
  for (int i = 0; i < book.lambda; ++i) {
    const auto& basis = book.bases[i];
    check_recode_args(x.size(), basis.size());
    const std::vector<double> c = conv.convolve(basis);
    recode_from_conv(c, x.size(), basis.size(), book.scales[i], &grid.at(i, 0));
  }
  return grid;
}

TokenGrid window_embed(std::span<const double> x, std::span<const double> weights, int rows, int width) {
  if (x.empty()) throw PreconditionError("window_embed: empty series");
  if (rows < 1 || width < 1 || width % 2 == 0)
    throw PreconditionError("window_embed: rows must be >= 1 and width odd");
  if (weights.size() != static_cast<std::size_t>(rows) * width)
    throw ShapeError("window_embed: weights must be rows x width");
  TokenGrid grid;
  grid.lambda = rows;
  grid.length = static_cast<int>(x.size());
  grid.wavebook_id = "window-embed";
  grid.values.assign(static_cast<std::size_t>(rows) * x.size(), 0.0);
  const int half = width / 2;
  const int l = grid.length;
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < l; ++j) {
      double acc = 0.0;
      for (int k = 0; k < width; ++k) {
        const int t = j + k - half;
        if (t >= 0 && t < l) acc += weights[static_cast<std::size_t>(i) * width + k] * x[t];
      }
      grid.at(i, j) = acc;
    }
  }
  return grid;
}

void save_token_grid(const TokenGrid& grid, const std::string& path) {
  binio::Writer w;
  w.magic("WQTG");
  w.u32(static_cast<std::uint32_t>(grid.lambda));
  w.u32(static_cast<std::uint32_t>(grid.length));
  w.f64s(grid.values);
  w.save(path);
}

TokenGrid load_token_grid(const std::string& path) {
  auto r = binio::Reader::open(path);
  r.expect_magic("WQTG");
  TokenGrid grid;
  grid.lambda = static_cast<int>(r.u32());
  grid.length = static_cast<int>(r.u32());
  if (grid.lambda < 1 || grid.length < 1) r.fail("empty token grid");
  grid.values.resize(static_cast<std::size_t>(grid.lambda) * grid.length);
  r.f64s(grid.values);
  r.expect_end();
  return grid;
}

void save_token_grid_csv(const TokenGrid& grid, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  char buf[32];
  for (int i = 0; i < grid.lambda; ++i) {
    for (int j = 0; j < grid.length; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", grid.at(i, j));
      if (j > 0) out << ',';
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace wq4ts
