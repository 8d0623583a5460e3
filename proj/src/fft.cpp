#include "fft.hpp"

#include <fftw3.h>

#include <bit>
#include <memory>
#include <mutex>
#include <stdexcept>

#include "error.hpp"

namespace wq4ts::fft {
namespace {

// FFTW planning is not thread-safe; execution with the new-array interface is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct PlanDeleter {
  void operator()(fftw_plan_s* p) const {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(p);
  }
};
using Plan = std::unique_ptr<fftw_plan_s, PlanDeleter>;

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};
template <class T>
using Buffer = std::unique_ptr<T[], FftwFree>;

template <class T>
Buffer<T> alloc(std::size_t n) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * n));
  if (p == nullptr) throw std::bad_alloc();
  return Buffer<T>(p);
}

void forward(std::span<const double> x, std::size_t n, std::vector<std::complex<double>>& out) {
  auto in = alloc<double>(n);
  auto spec = alloc<fftw_complex>(n / 2 + 1);
  Plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan.reset(fftw_plan_dft_r2c_1d(static_cast<int>(n), in.get(), spec.get(), FFTW_ESTIMATE));
  }
  for (std::size_t i = 0; i < n; ++i) in[i] = i < x.size() ? x[i] : 0.0;
  fftw_execute(plan.get());
  out.resize(n / 2 + 1);
  for (std::size_t k = 0; k <= n / 2; ++k) out[k] = {spec[k][0], spec[k][1]};
}

}  // namespace

std::vector<double> dft_magnitudes(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  std::vector<std::complex<double>> half;
  forward(x, n, half);
  std::vector<double> mag(n);
  for (std::size_t k = 0; k < n; ++k) {
    // Real input: X[n-k] = conj(X[k]).
    mag[k] = std::abs(k <= n / 2 ? half[k] : half[n - k]);
  }
  return mag;
}

Convolver::Convolver(std::span<const double> signal, std::size_t max_kernel_len)
    : signal_len_(signal.size()), max_kernel_len_(max_kernel_len) {
  if (signal.empty() || max_kernel_len == 0)
    throw PreconditionError("Convolver: empty signal or kernel bound");
  padded_ = std::bit_ceil(signal_len_ + max_kernel_len_ - 1);
  forward(signal, padded_, signal_hat_);
}

std::vector<double> Convolver::convolve(std::span<const double> kernel) const {
  if (kernel.empty() || kernel.size() > max_kernel_len_)
    throw PreconditionError("Convolver: kernel length outside [1, max_kernel_len]");
  std::vector<std::complex<double>> kernel_hat;
  forward(kernel, padded_, kernel_hat);

  auto spec = alloc<fftw_complex>(padded_ / 2 + 1);
  auto out = alloc<double>(padded_);
  Plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan.reset(fftw_plan_dft_c2r_1d(static_cast<int>(padded_), spec.get(), out.get(), FFTW_ESTIMATE));
  }
  for (std::size_t k = 0; k < kernel_hat.size(); ++k) {
    const auto prod = signal_hat_[k] * kernel_hat[k];
    spec[k][0] = prod.real();
    spec[k][1] = prod.imag();
  }
  fftw_execute(plan.get());

  const std::size_t len = signal_len_ + kernel.size() - 1;
  const double scale = 1.0 / static_cast<double>(padded_);
  std::vector<double> result(len);
  for (std::size_t i = 0; i < len; ++i) result[i] = out[i] * scale;
  return result;
}

}  // namespace wq4ts::fft
