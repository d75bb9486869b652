#include "fq/rx_dsp.hpp"

#include <stdexcept>

#include "fq/fft.hpp"

namespace fq {

SignalFrame cdc(const SignalFrame& frame, double beta2_total_s2) {
  SignalFrame out = frame;
  if (beta2_total_s2 == 0.0) return out;
  const std::size_t n = frame.size();
  const auto w = angular_frequency_grid(n, frame.sample_rate());
  Fft fft(n);
  for (auto p : {Polarization::X, Polarization::Y}) {
    CVec& s = out.pol(p);
    fft.forward(s);
    for (std::size_t k = 0; k < n; ++k) {
      const double phi = -0.5 * beta2_total_s2 * w[k] * w[k];
      s[k] *= cplx(std::cos(phi), std::sin(phi));
    }
    fft.inverse(s);
  }
  return out;
}

SymbolFrame matched_filter_downsample(const SignalFrame& frame, const RrcConfig& cfg, int order) {
  if (frame.sps != cfg.sps) throw InvalidState("matched filter: frame sps does not match filter sps");
  if (frame.size() % static_cast<std::size_t>(cfg.sps) != 0) {
    throw InvalidState("matched filter: frame is not a whole number of symbols");
  }
  const auto edge = static_cast<std::size_t>(matched_filter_edge_symbols(cfg));
  const std::size_t n_sym = frame.size() / static_cast<std::size_t>(cfg.sps);
  if (n_sym <= 2 * edge) throw std::invalid_argument("matched filter: frame shorter than the filter edges");
  const auto h = rrc_taps(cfg);
  SymbolFrame out;
  out.order = order;
  out.role = FrameRole::Received;
  out.symbol_rate = frame.symbol_rate;
  for (auto p : {Polarization::X, Polarization::Y}) {
    const CVec filtered = convolve_same(frame.pol(p), h);
    CVec& syms = out.pol(p);
    syms.reserve(n_sym - 2 * edge);
    for (std::size_t k = edge; k < n_sym - edge; ++k) syms.push_back(filtered[k * static_cast<std::size_t>(cfg.sps)]);
  }
  return out;
}

NormalizedFrame normalize_to_reference(const SymbolFrame& received, const SymbolFrame& transmitted) {
  if (received.size() != transmitted.size() || received.syms_y.size() != transmitted.syms_y.size()) {
    throw std::invalid_argument("normalize_to_reference: length mismatch");
  }
  NormalizedFrame out{received, {}};
  for (auto p : {Polarization::X, Polarization::Y}) {
    const CVec& y = received.pol(p);
    const CVec& x = transmitted.pol(p);
    cplx num{0.0, 0.0};
    double den = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      num += x[i] * std::conj(y[i]);
      den += std::norm(y[i]);
    }
    if (!(den > 0.0)) throw std::invalid_argument("normalize_to_reference: zero-power received sequence");
    const cplx k = num / den;
    out.scale[static_cast<std::size_t>(p)] = k;
    for (auto& z : out.frame.pol(p)) z *= k;
  }
  return out;
}

std::vector<int> decide_classes(std::span<const cplx> syms, const QamAlphabet& alphabet) {
  std::vector<int> out(syms.size());
  for (std::size_t i = 0; i < syms.size(); ++i) out[i] = alphabet.nearest(syms[i]);
  return out;
}

Decisions hard_decision(const SymbolFrame& received, const QamAlphabet& alphabet) {
  Decisions d;
  d.classes_x = decide_classes(received.syms_x, alphabet);
  d.classes_y = decide_classes(received.syms_y, alphabet);
  d.symbols.order = alphabet.order();
  d.symbols.role = FrameRole::Received;
  d.symbols.symbol_rate = received.symbol_rate;
  d.symbols.syms_x.reserve(received.size());
  d.symbols.syms_y.reserve(received.size());
  d.bits.reserve(received.size() * 2 * static_cast<std::size_t>(alphabet.bits_per_symbol()));
  for (std::size_t i = 0; i < received.size(); ++i) {
    d.symbols.syms_x.push_back(alphabet.point(d.classes_x[i]));
    d.symbols.syms_y.push_back(alphabet.point(d.classes_y[i]));
    alphabet.append_bits(d.classes_x[i], d.bits);
    alphabet.append_bits(d.classes_y[i], d.bits);
  }
  return d;
}

}  // namespace fq
