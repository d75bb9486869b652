#pragma once

#include <vector>

#include "fq/common.hpp"
#include "fq/qam.hpp"

namespace fq {

/// Dual-polarization baseband waveform. Field units are sqrt(W) once a
/// launch power has been applied.
struct SignalFrame {
  CVec samples_x;
  CVec samples_y;
  double symbol_rate = 34.4e9;  // Hz
  int sps = 8;

  double sample_rate() const { return symbol_rate * sps; }
  std::size_t size() const { return samples_x.size(); }
  const CVec& pol(Polarization p) const { return p == Polarization::X ? samples_x : samples_y; }
  CVec& pol(Polarization p) { return p == Polarization::X ? samples_x : samples_y; }
};

struct RrcConfig {
  int sps = 8;
  double rolloff = 0.1;
  int span_symbols = 64;  // filter length = span_symbols * sps + 1 taps

  int taps() const { return span_symbols * sps + 1; }
  int group_delay() const { return span_symbols * sps / 2; }
};

/// Closed-form root-raised-cosine pulse, unit energy (sum of squared taps = 1).
std::vector<double> rrc_taps(const RrcConfig& cfg);

/// Upsamples by cfg.sps and filters with rrc_taps. The output has
/// n_symbols * sps samples; sample k*sps is the peak of symbol k (the filter
/// group delay is removed and the tails beyond the frame are dropped).
SignalFrame rrc_shape(const SymbolFrame& symbols, const RrcConfig& cfg);

/// Mean of |x|^2 + |y|^2 over samples (total power when the field is in sqrt(W)).
double mean_power(const SignalFrame& frame);

/// Rescales each polarization so that it carries half of
/// 10^((power_dbm - 30) / 10) W.
SignalFrame set_launch_power(const SignalFrame& frame, double power_dbm);

/// "Same"-length linear convolution with a symmetric odd-length FIR, centred.
CVec convolve_same(const CVec& x, const std::vector<double>& taps);

}  // namespace fq
