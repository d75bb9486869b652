#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <set>

#include "fq/frame_io.hpp"
#include "fq/qam.hpp"
#include "oracles.hpp"

using namespace fq;

namespace {

double min_distance(const QamAlphabet& a) {
  double d = 1e9;
  for (int i = 0; i < a.order(); ++i)
    for (int j = i + 1; j < a.order(); ++j) d = std::min(d, std::abs(a.point(i) - a.point(j)));
  return d;
}

}  // namespace

TEST_CASE("generate_bits is deterministic and rejects zero length") {
  CHECK(generate_bits(8, 42) == generate_bits(8, 42));
  CHECK(generate_bits(1000, 1) != generate_bits(1000, 2));
  CHECK_THROWS_AS(generate_bits(0, 1), std::invalid_argument);
}

TEST_CASE("generate_bits mean is balanced over 2^20 bits") {
  const Bits b = generate_bits(1U << 20, 2024);
  const double mean = static_cast<double>(std::count(b.begin(), b.end(), 1)) / b.size();
  CHECK(mean >= 0.499);
  CHECK(mean <= 0.501);
}

TEST_CASE("bit streams from distinct seeds are uncorrelated at small lags") {
  const std::size_t n = 1U << 20;
  const Bits a = generate_bits(n, 11), b = generate_bits(n, 12);
  double worst = 0.0;
  for (int lag = -100; lag <= 100; ++lag) {
    long acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const long j = static_cast<long>(i) + lag;
      if (j < 0 || j >= static_cast<long>(n)) continue;
      acc += (2 * a[i] - 1) * (2 * b[static_cast<std::size_t>(j)] - 1);
    }
    worst = std::max(worst, std::abs(static_cast<double>(acc)) / n);
  }
  CHECK(worst <= 0.02);
}

TEST_CASE("16-QAM points are {+-1,+-3}^2 / sqrt(10)") {
  const auto a = build_alphabet(16);
  std::set<std::pair<long, long>> got, want;
  for (auto p : a.points()) got.insert({std::lround(p.real() * std::sqrt(10.0)), std::lround(p.imag() * std::sqrt(10.0))});
  for (int i : {-3, -1, 1, 3})
    for (int q : {-3, -1, 1, 3}) want.insert({i, q});
  CHECK(got == want);
  for (auto p : a.points()) {
    const double re = p.real() * std::sqrt(10.0), im = p.imag() * std::sqrt(10.0);
    CHECK(std::abs(re - std::round(re)) < 1e-12);
    CHECK(std::abs(im - std::round(im)) < 1e-12);
  }
}

TEST_CASE("alphabets have unit mean power and no duplicate points") {
  for (int order : {16, 32, 64}) {
    const auto a = build_alphabet(order);
    REQUIRE(a.order() == order);
    double p = 0.0;
    for (auto z : a.points()) p += std::norm(z);
    CHECK(std::abs(p / order - 1.0) <= 1e-12);
    CHECK(min_distance(a) > 0.1);
    for (int c = 0; c < order; ++c) CHECK(a.class_of(a.point(c)) == c);
  }
}

TEST_CASE("32-QAM is the 6x6 grid without corners") {
  std::vector<cplx> grid;
  for (int i = -5; i <= 5; i += 2)
    for (int q = -5; q <= 5; q += 2)
      if (!(std::abs(i) == 5 && std::abs(q) == 5)) grid.emplace_back(i, q);
  REQUIRE(grid.size() == 32);
  double p = 0.0;
  for (auto z : grid) p += std::norm(z);
  const double scale = std::sqrt(p / 32.0);
  const auto a = build_alphabet(32);
  for (auto z : grid) CHECK(a.class_of(z / scale) >= 0);
}

TEST_CASE("unsupported orders are rejected") {
  CHECK_THROWS_AS(build_alphabet(8), std::invalid_argument);
  CHECK_THROWS_AS(build_alphabet(128), std::invalid_argument);
}

TEST_CASE("square QAM nearest neighbours differ in exactly one bit") {
  for (int order : {16, 64}) {
    const auto a = build_alphabet(order);
    const double d = min_distance(a);
    int pairs = 0;
    for (int i = 0; i < order; ++i)
      for (int j = i + 1; j < order; ++j)
        if (std::abs(std::abs(a.point(i) - a.point(j)) - d) < 1e-9) {
          ++pairs;
          CHECK(std::popcount(static_cast<unsigned>(i ^ j)) == 1);
        }
    const int side = static_cast<int>(std::lround(std::sqrt(order)));
    CHECK(pairs == 2 * side * (side - 1));
  }
}

TEST_CASE("32-QAM cross labelling is quasi-Gray") {
  const auto a = build_alphabet(32);
  const double d = min_distance(a);
  int pairs = 0, single = 0, total = 0;
  for (int i = 0; i < 32; ++i)
    for (int j = i + 1; j < 32; ++j)
      if (std::abs(std::abs(a.point(i) - a.point(j)) - d) < 1e-9) {
        ++pairs;
        const int diff = std::popcount(static_cast<unsigned>(i ^ j));
        single += diff == 1;
        total += diff;
      }
  CHECK(pairs == 52);
  CHECK(single == 46);
  CHECK(total == 60);
}

TEST_CASE("all-zero bits map to a constant symbol") {
  const auto a = build_alphabet(16);
  const Bits zeros(8 * 100, 0);
  const SymbolFrame f = map_symbols(zeros, a);
  CHECK(f.size() == 100);
  for (auto z : f.syms_x) CHECK(z == a.point(0));
  for (auto z : f.syms_y) CHECK(z == a.point(0));
}

TEST_CASE("map then demap is the identity for every order") {
  for (int order : {16, 32, 64}) {
    const auto a = build_alphabet(order);
    const Bits bits = generate_bits(2 * 4096 * static_cast<std::size_t>(a.bits_per_symbol()), 5);
    CHECK(demap_frame(map_symbols(bits, a), a) == bits);
  }
}

TEST_CASE("even words go to X, odd words to Y, MSB first") {
  const auto a = build_alphabet(16);
  // words 0b0001 (X) then 0b1000 (Y)
  const Bits bits{0, 0, 0, 1, 1, 0, 0, 0};
  const SymbolFrame f = map_symbols(bits, a);
  CHECK(f.syms_x[0] == a.point(1));
  CHECK(f.syms_y[0] == a.point(8));
}

TEST_CASE("map_symbols rejects lengths that are not whole symbol pairs") {
  const auto a = build_alphabet(16);
  CHECK_THROWS_AS(map_symbols(Bits(12, 0), a), std::invalid_argument);
}

TEST_CASE("symbol histogram of 2^16 random bits is uniform within 3 sigma") {
  const auto a = build_alphabet(16);
  const SymbolFrame f = map_symbols(generate_bits(1U << 16, 77), a);
  std::vector<int> counts(16, 0);
  for (auto z : f.syms_x) ++counts[static_cast<std::size_t>(a.class_of(z))];
  for (auto z : f.syms_y) ++counts[static_cast<std::size_t>(a.class_of(z))];
  const double n = 2.0 * f.size(), p = 1.0 / 16.0;
  const double sigma = std::sqrt(n * p * (1.0 - p));
  double chi2 = 0.0;
  for (int c : counts) {
    CHECK(std::abs(c - n * p) <= 3.0 * sigma);
    chi2 += (c - n * p) * (c - n * p) / (n * p);
  }
  CHECK(chi2 < 37.7);  // 99.9% quantile, 15 degrees of freedom
}

TEST_CASE("nearest point breaks ties towards the lower class index") {
  const auto a = build_alphabet(16);
  for (int i = 0; i < 16; ++i)
    for (int j = i + 1; j < 16; ++j) {
      const cplx mid = 0.5 * (a.point(i) + a.point(j));
      if (std::abs(std::abs(a.point(i) - a.point(j)) - min_distance(a)) > 1e-9) continue;
      // The midpoint of two neighbours is equidistant from both.
      const int c = a.nearest(mid);
      CHECK(c <= std::min(i, j));
    }
}

TEST_CASE("symbol frame container round trip and header layout") {
  const auto a = build_alphabet(64);
  SymbolFrame f = map_symbols(generate_bits(2 * 50 * 6, 3), a);
  f.symbol_rate = 34.4e9;
  const auto bytes = encode_frame(to_container(f));
  CHECK(bytes.size() == kFrameHeaderBytes + 50 * 4 * 8);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "FQSF");
  CHECK(bytes[4] == 1);
  CHECK(bytes[5] == 0);
  CHECK(bytes[6] == 0);  // transmitted
  CHECK((bytes[7] | (bytes[8] << 8)) == 64);
  const SymbolFrame g = to_symbol_frame(decode_frame(bytes));
  CHECK(g.syms_x == f.syms_x);
  CHECK(g.syms_y == f.syms_y);
  CHECK(g.order == 64);
  CHECK(g.symbol_rate == 34.4e9);
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS(decode_frame(bad));
}
