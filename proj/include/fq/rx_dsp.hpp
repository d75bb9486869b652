#pragma once

#include <array>
#include <vector>

#include "fq/qam.hpp"
#include "fq/signal.hpp"

namespace fq {

struct RxChainConfig {
  double total_beta2_l = 0.0;  // s^2, accumulated over the link
  RrcConfig rrc;
};

/// Frequency-domain chromatic dispersion compensation: multiplies the
/// spectrum by exp(-i beta2_total / 2 w^2), the exact inverse of the
/// dispersive phase applied by propagate_span.
SignalFrame cdc(const SignalFrame& frame, double beta2_total_s2);

/// Symbols dropped at each end of a frame by matched_filter_downsample.
inline int matched_filter_edge_symbols(const RrcConfig& cfg) { return cfg.span_symbols / 2; }

/// RRC matched filter, then one sample per symbol at the symbol instants.
/// The first and last matched_filter_edge_symbols() symbols are discarded,
/// so output symbol j corresponds to input symbol j + edge. Throws
/// InvalidState when the frame length is not a whole number of symbols or
/// the frame's sps differs from cfg.sps.
SymbolFrame matched_filter_downsample(const SignalFrame& frame, const RrcConfig& cfg, int order);

struct NormalizedFrame {
  SymbolFrame frame;
  std::array<cplx, 2> scale{};  // applied per polarization (X, Y)
};

/// Per polarization, multiplies the received symbols by the least-squares
/// scalar k = sum(x conj(y)) / sum(|y|^2) that best maps them onto the
/// transmitted ones. Throws std::invalid_argument on length mismatch or a
/// zero-power received polarization.
NormalizedFrame normalize_to_reference(const SymbolFrame& received, const SymbolFrame& transmitted);

struct Decisions {
  SymbolFrame symbols;
  std::vector<int> classes_x;
  std::vector<int> classes_y;
  Bits bits;  // interleaved X/Y words, same order as map_symbols consumes
};

/// Nearest-point slicing (ties to the lowest class index).
Decisions hard_decision(const SymbolFrame& received, const QamAlphabet& alphabet);

std::vector<int> decide_classes(std::span<const cplx> syms, const QamAlphabet& alphabet);

}  // namespace fq
