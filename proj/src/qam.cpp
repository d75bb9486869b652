#include "fq/qam.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace fq {
namespace {

// 32-QAM cross constellation, quasi-Gray. Coordinates are (I, Q) on the odd
// integer grid {-5..5}^2 minus the four corners; row = 5-bit label.
// Built from an 8x4 rectangular Gray map with the |I| = 7 columns folded onto
// the |Q| = 5 rows; the fold was chosen by exhaustive search to minimise the
// summed Hamming distance over grid-adjacent pairs (60 over 52 pairs): 46
// differ in one bit, 4 in two and 2 in three.
constexpr std::array<std::array<int, 2>, 32> kQam32 = {{
    {-3, -5}, {-1, -5}, {-1, 5},  {-3, 5},  {-5, -3}, {-5, -1}, {-5, 3},  {-5, 1},
    {-1, -3}, {-1, -1}, {-1, 3},  {-1, 1},  {-3, -3}, {-3, -1}, {-3, 3},  {-3, 1},
    {3, -5},  {1, -5},  {1, 5},   {3, 5},   {5, -3},  {5, -1},  {5, 3},   {5, 1},
    {1, -3},  {1, -1},  {1, 3},   {1, 1},   {3, -3},  {3, -1},  {3, 3},   {3, 1},
}};

int gray_decode(int g) {
  int v = g;
  for (int s = g >> 1; s != 0; s >>= 1) v ^= s;
  return v;
}

std::vector<cplx> normalized(std::vector<cplx> pts) {
  double p = 0.0;
  for (auto z : pts) p += std::norm(z);
  const double scale = 1.0 / std::sqrt(p / static_cast<double>(pts.size()));
  for (auto& z : pts) z *= scale;
  return pts;
}

}  // namespace

std::span<const std::array<int, 2>, 32> qam32_cross_table() { return kQam32; }

QamAlphabet QamAlphabet::build(int order) {
  std::vector<cplx> pts(static_cast<std::size_t>(order > 0 ? order : 0));
  switch (order) {
    case 16:
    case 64: {
      const int half_bits = order == 16 ? 2 : 3;
      const int levels = 1 << half_bits;
      for (int w = 0; w < order; ++w) {
        const int ii = gray_decode(w >> half_bits);
        const int qi = gray_decode(w & (levels - 1));
        pts[static_cast<std::size_t>(w)] = {2.0 * ii - (levels - 1), 2.0 * qi - (levels - 1)};
      }
      return QamAlphabet(normalized(std::move(pts)), 2 * half_bits);
    }
    case 32:
      for (int w = 0; w < 32; ++w) {
        pts[static_cast<std::size_t>(w)] = {double(kQam32[w][0]), double(kQam32[w][1])};
      }
      return QamAlphabet(normalized(std::move(pts)), 5);
    default:
      throw std::invalid_argument("unsupported QAM order " + std::to_string(order));
  }
}

int QamAlphabet::nearest(cplx z) const {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const double d = std::norm(z - points_[i]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

int QamAlphabet::class_of(cplx z) const {
  const int c = nearest(z);
  return std::abs(z - points_[static_cast<std::size_t>(c)]) < 1e-9 ? c : -1;
}

void QamAlphabet::append_bits(int cls, Bits& out) const {
  for (int b = bits_ - 1; b >= 0; --b) out.push_back(static_cast<std::uint8_t>((cls >> b) & 1));
}

int QamAlphabet::word_from_bits(std::span<const std::uint8_t> bits) const {
  int w = 0;
  for (auto b : bits) w = (w << 1) | (b & 1);
  return w;
}

Bits generate_bits(std::size_t n_bits, std::uint64_t seed) {
  if (n_bits == 0) throw std::invalid_argument("generate_bits: n_bits must be positive");
  std::mt19937_64 gen(seed);
  Bits out(n_bits);
  std::uint64_t word = 0;
  for (std::size_t i = 0; i < n_bits; ++i) {
    if (i % 64 == 0) word = gen();
    out[i] = static_cast<std::uint8_t>((word >> (i % 64)) & 1U);
  }
  return out;
}

CVec map_words(std::span<const std::uint8_t> bits, const QamAlphabet& alphabet) {
  const auto k = static_cast<std::size_t>(alphabet.bits_per_symbol());
  if (bits.size() % k != 0) {
    throw std::invalid_argument("map_words: bit count not a multiple of log2(MF)");
  }
  CVec out(bits.size() / k);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = alphabet.point(alphabet.word_from_bits(bits.subspan(i * k, k)));
  }
  return out;
}

SymbolFrame map_symbols(std::span<const std::uint8_t> bits, const QamAlphabet& alphabet) {
  const auto k = static_cast<std::size_t>(alphabet.bits_per_symbol());
  if (bits.size() % (2 * k) != 0) {
    throw std::invalid_argument("map_symbols: bit count not a multiple of 2*log2(MF)");
  }
  const CVec all = map_words(bits, alphabet);
  SymbolFrame f;
  f.order = alphabet.order();
  f.syms_x.reserve(all.size() / 2);
  f.syms_y.reserve(all.size() / 2);
  for (std::size_t i = 0; i < all.size(); ++i) (i % 2 == 0 ? f.syms_x : f.syms_y).push_back(all[i]);
  return f;
}

std::vector<int> classes_of(std::span<const cplx> syms, const QamAlphabet& alphabet) {
  std::vector<int> out(syms.size());
  for (std::size_t i = 0; i < syms.size(); ++i) {
    out[i] = alphabet.class_of(syms[i]);
    if (out[i] < 0) throw std::invalid_argument("classes_of: symbol is not an alphabet point");
  }
  return out;
}

Bits bits_of_classes(std::span<const int> classes, const QamAlphabet& alphabet) {
  Bits out;
  out.reserve(classes.size() * static_cast<std::size_t>(alphabet.bits_per_symbol()));
  for (int c : classes) alphabet.append_bits(c, out);
  return out;
}

Bits demap_frame(const SymbolFrame& frame, const QamAlphabet& alphabet) {
  Bits out;
  for (std::size_t i = 0; i < frame.size(); ++i) {
    alphabet.append_bits(alphabet.nearest(frame.syms_x[i]), out);
    alphabet.append_bits(alphabet.nearest(frame.syms_y[i]), out);
  }
  return out;
}

}  // namespace fq
