#include "fq/signal.hpp"

#include <cmath>
#include <stdexcept>

#include "fq/fft.hpp"

namespace fq {

std::vector<double> rrc_taps(const RrcConfig& cfg) {
  if (!(cfg.rolloff > 0.0 && cfg.rolloff <= 1.0)) {
    throw std::invalid_argument("rrc_taps: rolloff must lie in (0, 1]");
  }
  if (cfg.span_symbols < 32 || cfg.span_symbols % 2 != 0 || cfg.sps < 1) {
    throw std::invalid_argument("rrc_taps: span_symbols must be even and >= 32");
  }
  const double b = cfg.rolloff;
  const int n = cfg.taps();
  const int mid = cfg.group_delay();
  std::vector<double> h(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i - mid) / cfg.sps;  // in symbol periods
    double v;
    if (i == mid) {
      v = 1.0 + b * (4.0 / kPi - 1.0);
    } else if (std::abs(std::abs(4.0 * b * t) - 1.0) < 1e-12) {
      v = b / std::sqrt(2.0) *
          ((1.0 + 2.0 / kPi) * std::sin(kPi / (4.0 * b)) + (1.0 - 2.0 / kPi) * std::cos(kPi / (4.0 * b)));
    } else {
      const double num = std::sin(kPi * t * (1.0 - b)) + 4.0 * b * t * std::cos(kPi * t * (1.0 + b));
      const double den = kPi * t * (1.0 - (4.0 * b * t) * (4.0 * b * t));
      v = num / den;
    }
    h[static_cast<std::size_t>(i)] = v;
  }
  double e = 0.0;
  for (double v : h) e += v * v;
  const double s = 1.0 / std::sqrt(e);
  for (double& v : h) v *= s;
  return h;
}

CVec convolve_same(const CVec& x, const std::vector<double>& taps) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  const auto nt = static_cast<std::ptrdiff_t>(taps.size());
  const std::ptrdiff_t mid = nt / 2;
  // Long inputs use a zero-padded FFT linear convolution.
  if (n * nt > (1 << 22)) {
    const std::size_t len = fast_fft_size(static_cast<std::size_t>(n + nt - 1));
    CVec a(len), h(len);
    std::copy(x.begin(), x.end(), a.begin());
    for (std::ptrdiff_t i = 0; i < nt; ++i) h[static_cast<std::size_t>(i)] = taps[static_cast<std::size_t>(i)];
    Fft fft(len);
    fft.forward(a);
    fft.forward(h);
    for (std::size_t i = 0; i < len; ++i) a[i] *= h[i];
    fft.inverse(a);
    return CVec(a.begin() + mid, a.begin() + mid + n);
  }
  CVec y(x.size());
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    cplx acc{0.0, 0.0};
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, k + mid - nt + 1);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n - 1, k + mid);
    for (std::ptrdiff_t j = lo; j <= hi; ++j) acc += x[static_cast<std::size_t>(j)] * taps[static_cast<std::size_t>(k + mid - j)];
    y[static_cast<std::size_t>(k)] = acc;
  }
  return y;
}

SignalFrame rrc_shape(const SymbolFrame& symbols, const RrcConfig& cfg) {
  const auto h = rrc_taps(cfg);
  SignalFrame out;
  out.symbol_rate = symbols.symbol_rate;
  out.sps = cfg.sps;
  for (auto p : {Polarization::X, Polarization::Y}) {
    const CVec& s = symbols.pol(p);
    CVec up(s.size() * static_cast<std::size_t>(cfg.sps));
    for (std::size_t k = 0; k < s.size(); ++k) up[k * static_cast<std::size_t>(cfg.sps)] = s[k];
    out.pol(p) = convolve_same(up, h);
  }
  return out;
}

double mean_power(const SignalFrame& frame) {
  if (frame.size() == 0) return 0.0;
  double p = 0.0;
  for (std::size_t i = 0; i < frame.size(); ++i) p += std::norm(frame.samples_x[i]) + std::norm(frame.samples_y[i]);
  return p / static_cast<double>(frame.size());
}

SignalFrame set_launch_power(const SignalFrame& frame, double power_dbm) {
  if (!std::isfinite(power_dbm)) throw std::invalid_argument("set_launch_power: non-finite power");
  const double per_pol = dbm_to_watts(power_dbm) / 2.0;
  SignalFrame out = frame;
  for (auto p : {Polarization::X, Polarization::Y}) {
    double e = 0.0;
    for (auto z : out.pol(p)) e += std::norm(z);
    e /= static_cast<double>(out.pol(p).size());
    if (e <= 0.0) continue;
    const double s = std::sqrt(per_pol / e);
    for (auto& z : out.pol(p)) z *= s;
  }
  return out;
}

}  // namespace fq
