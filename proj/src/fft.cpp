#include "fq/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <mutex>
#include <stdexcept>
#include <utility>

namespace fq {
namespace {
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

Fft::Fft(std::size_t n) : n_(n) {
  if (n == 0) throw std::invalid_argument("Fft: zero length");
  // Plans are made on a scratch buffer and executed on caller data through the
  // new-array interface, so FFTW_UNALIGNED is required.
  std::lock_guard lock(planner_mutex());
  auto* buf = fftw_alloc_complex(n);
  const int len = static_cast<int>(n);
  fwd_ = fftw_plan_dft_1d(len, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  inv_ = fftw_plan_dft_1d(len, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  fftw_free(buf);
  if (fwd_ == nullptr || inv_ == nullptr) throw std::runtime_error("Fft: planning failed");
}

Fft::~Fft() {
  std::lock_guard lock(planner_mutex());
  if (fwd_ != nullptr) fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
  if (inv_ != nullptr) fftw_destroy_plan(static_cast<fftw_plan>(inv_));
}

Fft::Fft(Fft&& other) noexcept
    : n_(other.n_), fwd_(std::exchange(other.fwd_, nullptr)), inv_(std::exchange(other.inv_, nullptr)) {}

Fft& Fft::operator=(Fft&& other) noexcept {
  std::swap(n_, other.n_);
  std::swap(fwd_, other.fwd_);
  std::swap(inv_, other.inv_);
  return *this;
}

void Fft::forward(CVec& data) const {
  if (data.size() != n_) throw std::invalid_argument("Fft::forward: length mismatch");
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(static_cast<fftw_plan>(fwd_), p, p);
}

void Fft::inverse(CVec& data) const {
  if (data.size() != n_) throw std::invalid_argument("Fft::inverse: length mismatch");
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(static_cast<fftw_plan>(inv_), p, p);
  const double s = 1.0 / static_cast<double>(n_);
  for (auto& z : data) z *= s;
}

std::size_t fast_fft_size(std::size_t n) {
  for (std::size_t m = std::max<std::size_t>(n, 1);; ++m) {
    std::size_t r = m;
    for (std::size_t f : {2, 3, 5}) {
      while (r % f == 0) r /= f;
    }
    if (r == 1) return m;
  }
}

std::vector<double> angular_frequency_grid(std::size_t n, double sample_rate) {
  std::vector<double> w(n);
  const auto sn = static_cast<std::ptrdiff_t>(n);
  for (std::ptrdiff_t k = 0; k < sn; ++k) {
    const std::ptrdiff_t kk = k < (sn + 1) / 2 ? k : k - sn;
    w[static_cast<std::size_t>(k)] = 2.0 * kPi * sample_rate * static_cast<double>(kk) / static_cast<double>(n);
  }
  return w;
}

}  // namespace fq
