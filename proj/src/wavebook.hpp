#pragma once

// Orthogonal-wavelet basis construction: QMF filter pairs, the discretized
// mother wavelet, and the scaled basis set ("wavebook") used by the tokenizer.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace wq4ts {

// Low-pass / band-pass filter pair. h holds h_n for n = 0..N-1 and g holds
// g_n = (-1)^(n-1) h_{1-n}, whose support is n = 2-N..1. Both arrays have
// length N; support_offset is the index of n = 0 inside g (equivalently the
// position of h_0 on g's index axis), so g[k] = g_{k - support_offset}.
struct FilterPair {
  std::vector<double> h;
  std::vector<double> g;
  int support_offset = 0;

  int g_first_index() const { return -support_offset; }
};

struct MotherWavelet {
  std::vector<double> amplitudes;  // length 2^m
  int m = 0;
  double step = 0.0;  // m / (2^m - 1)
  double f_c = 0.0;   // cycles per unit time
  std::string id;
};

struct Wavebook {
  int lambda = 0;
  int m = 0;
  double f_c = 0.0;
  std::vector<double> scales;               // S_i, i = 1..lambda
  std::vector<std::vector<double>> bases;   // A_i, non-increasing lengths
  std::vector<double> mother;               // amplitudes the bases were sampled from
  std::string mother_id;

  std::size_t max_basis_length() const;
  std::string content_id() const;

  friend bool operator==(const Wavebook&, const Wavebook&) = default;
};

// Known filters by name: "haar", "db2". Anything else is looked up as
// "file:<path>" holding whitespace/comma separated h coefficients.
std::vector<double> named_lowpass(const std::string& spec);

FilterPair build_filter_pair(std::span<const double> h);

// Max deviation from the unitary conditions of the 2x2 modulation matrix
// over a uniform grid on [0, 2pi).
double verify_unitary(const FilterPair& fp, int grid_points);

MotherWavelet make_mother(std::vector<double> amplitudes, int m, std::string id = "custom");

// Cascade refinement to depth m, cell-averaged onto 2^m points, unit energy.
MotherWavelet cascade_mother(const FilterPair& fp, int m, std::string id = "custom");

double estimate_center_frequency(const MotherWavelet& w);

std::vector<double> compute_scales(double f_c, int lambda);

// 2 * round(x / 2). No clamping; callers reject results below 2.
long even_round(double x);

std::vector<double> sample_basis(const MotherWavelet& w, double scale);

Wavebook build_wavebook(const MotherWavelet& w, int lambda);

void save_wavebook(const Wavebook& book, const std::string& path);
Wavebook load_wavebook(const std::string& path);

// Relative imbalance |sum A| / sum |A|.
double zero_mean_ratio(std::span<const double> a);

std::string content_hash(std::span<const double> values);

}  // namespace wq4ts
