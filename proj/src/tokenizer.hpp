#pragma once

// Convolve -> Difference -> Recode projection of a univariate window onto a
// wavebook. Row i of the grid is the response to basis i, column j the token
// for timestep j.

#include <span>
#include <string>
#include <vector>

#include "wavebook.hpp"

namespace wq4ts {

struct TokenGrid {
  int lambda = 0;
  int length = 0;
  std::vector<double> values;  // row-major lambda x length
  std::string wavebook_id;

  double at(int row, int col) const { return values[static_cast<std::size_t>(row) * length + col]; }
  double& at(int row, int col) { return values[static_cast<std::size_t>(row) * length + col]; }
};

std::vector<double> convolve(std::span<const double> x, std::span<const double> kernel);

// d_j = -sqrt(s) * (c_{j+1} - c_j); length l + n - 2.
std::vector<double> difference(std::span<const double> x, std::span<const double> kernel, double scale);

// p_j = d_{j + n/2 - 1}; length l. Requires an even kernel length.
std::vector<double> recode(std::span<const double> x, std::span<const double> kernel, double scale);

TokenGrid tokenize(std::span<const double> x, const Wavebook& book);

// Same contract as tokenize, convolution done in the frequency domain.
TokenGrid tokenize_fft(std::span<const double> x, const Wavebook& book);

// Learnable sliding-window embedding used as the "no wave quantization"
// ablation. weights is rows x width (row-major), width odd; zero padding.
TokenGrid window_embed(std::span<const double> x, std::span<const double> weights, int rows, int width);

// Binary token-grid file: "WQTG", u32 lambda, u32 l, f64 row-major.
void save_token_grid(const TokenGrid& grid, const std::string& path);
TokenGrid load_token_grid(const std::string& path);
void save_token_grid_csv(const TokenGrid& grid, const std::string& path);

}  // namespace wq4ts
