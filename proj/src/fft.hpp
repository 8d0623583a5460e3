#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace wq4ts::fft {

// Magnitudes |DFT(x)[k]| for k = 0..N-1 (unnormalized forward transform).
std::vector<double> dft_magnitudes(std::span<const double> x);

// Full linear convolution of a fixed signal against many kernels. The signal
// spectrum is computed once; each convolve() call costs one forward and one
// inverse transform of the padded size.
class Convolver {
 public:
  Convolver(std::span<const double> signal, std::size_t max_kernel_len);

  // Returns the length (signal + kernel - 1) full convolution.
  std::vector<double> convolve(std::span<const double> kernel) const;

  std::size_t padded_size() const { return padded_; }

 private:
  std::size_t signal_len_;
  std::size_t max_kernel_len_;
  std::size_t padded_;
  std::vector<std::complex<double>> signal_hat_;
};

}  // namespace wq4ts::fft
