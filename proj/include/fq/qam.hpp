#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "fq/common.hpp"

namespace fq {

/// Gray-labelled QAM constellation with unit average power.
///
/// Points are stored by class index, and the class index of a point *is* its
/// bit label read MSB-first: bit_map(word) == point(word). For square orders
/// the upper half of the label selects the in-phase level and the lower half
/// the quadrature level, each Gray-coded. 32-QAM uses the cross layout with
/// the quasi-Gray table documented in qam.cpp.
class QamAlphabet {
 public:
  /// Throws std::invalid_argument unless order is 16, 32 or 64.
  static QamAlphabet build(int order);

  int order() const { return static_cast<int>(points_.size()); }
  int bits_per_symbol() const { return bits_; }
  std::span<const cplx> points() const { return points_; }
  cplx point(int cls) const { return points_.at(static_cast<std::size_t>(cls)); }

  /// Nearest point in Euclidean distance; ties go to the lowest class index.
  int nearest(cplx z) const;

  /// Class index for a symbol that is exactly (to 1e-9) an alphabet point, or
  /// -1 when it is not.
  int class_of(cplx z) const;

  void append_bits(int cls, Bits& out) const;
  int word_from_bits(std::span<const std::uint8_t> bits) const;

 private:
  QamAlphabet(std::vector<cplx> points, int bits) : points_(std::move(points)), bits_(bits) {}
  std::vector<cplx> points_;
  int bits_;
};

inline QamAlphabet build_alphabet(int order) { return QamAlphabet::build(order); }

/// The raw cross-constellation layout: integer grid coordinates per label.
std::span<const std::array<int, 2>, 32> qam32_cross_table();

enum class FrameRole : std::uint8_t { Transmitted = 0, Received = 1 };

/// One sample per symbol, both polarizations.
struct SymbolFrame {
  CVec syms_x;
  CVec syms_y;
  int order = 16;
  FrameRole role = FrameRole::Transmitted;
  double symbol_rate = 34.4e9;

  std::size_t size() const { return syms_x.size(); }
  const CVec& pol(Polarization p) const { return p == Polarization::X ? syms_x : syms_y; }
  CVec& pol(Polarization p) { return p == Polarization::X ? syms_x : syms_y; }
};

/// n_bits i.i.d. bits from a seeded Mersenne twister (64 bits per draw).
Bits generate_bits(std::size_t n_bits, std::uint64_t seed);

/// Maps consecutive log2(MF)-bit words to points of one polarization.
CVec map_words(std::span<const std::uint8_t> bits, const QamAlphabet& alphabet);

/// Maps a single bit stream onto both polarizations: even-indexed words go
/// to X, odd-indexed words to Y. Requires a whole, even number of words.
SymbolFrame map_symbols(std::span<const std::uint8_t> bits, const QamAlphabet& alphabet);

/// Class indices of symbols that lie on alphabet points.
std::vector<int> classes_of(std::span<const cplx> syms, const QamAlphabet& alphabet);

/// Concatenated bit labels of the given class indices.
Bits bits_of_classes(std::span<const int> classes, const QamAlphabet& alphabet);

/// Inverse of map_symbols on noiseless frames (interleaves X/Y words again).
Bits demap_frame(const SymbolFrame& frame, const QamAlphabet& alphabet);

}  // namespace fq
