#pragma once

#include <cstddef>
#include <vector>

#include "fq/common.hpp"

namespace fq {

/// In-place complex DFT of a fixed length, backed by FFTW with
/// deterministic (FFTW_ESTIMATE) plans. forward() is unnormalised;
/// inverse() divides by n so inverse(forward(x)) == x.
class Fft {
 public:
  explicit Fft(std::size_t n);
  ~Fft();
  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;
  Fft(Fft&& other) noexcept;
  Fft& operator=(Fft&& other) noexcept;

  std::size_t size() const { return n_; }
  void forward(CVec& data) const;
  void inverse(CVec& data) const;

 private:
  std::size_t n_ = 0;
  void* fwd_ = nullptr;
  void* inv_ = nullptr;
};

/// Smallest n' >= n whose only prime factors are 2, 3 and 5.
std::size_t fast_fft_size(std::size_t n);

/// Angular frequency (rad/s) of DFT bin k for n samples at sample_rate.
std::vector<double> angular_frequency_grid(std::size_t n, double sample_rate);

}  // namespace fq
