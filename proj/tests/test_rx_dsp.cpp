#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fq/fiber.hpp"
#include "fq/metrics.hpp"
#include "fq/rng.hpp"
#include "fq/rx_dsp.hpp"
#include "oracles.hpp"

using namespace fq;

namespace {

SymbolFrame random_frame(int order, std::size_t n, std::uint64_t seed) {
  const auto a = build_alphabet(order);
  return map_symbols(generate_bits(2 * n * static_cast<std::size_t>(a.bits_per_symbol()), seed), a);
}

SymbolFrame slice(const SymbolFrame& f, std::size_t from, std::size_t n) {
  SymbolFrame out = f;
  out.syms_x.assign(f.syms_x.begin() + static_cast<long>(from), f.syms_x.begin() + static_cast<long>(from + n));
  out.syms_y.assign(f.syms_y.begin() + static_cast<long>(from), f.syms_y.begin() + static_cast<long>(from + n));
  return out;
}

double energy(const SignalFrame& f) {
  double e = 0.0;
  for (auto z : f.samples_x) e += std::norm(z);
  for (auto z : f.samples_y) e += std::norm(z);
  return e;
}

}  // namespace

TEST_CASE("zero dispersion CDC is the identity") {
  const SignalFrame s = set_launch_power(rrc_shape(random_frame(16, 256, 1), {}), 0.0);
  const SignalFrame out = cdc(s, 0.0);
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(std::abs(out.samples_x[i] - s.samples_x[i]) <= 1e-12 * 0.03);
}

TEST_CASE("CDC with opposite signs cancels and preserves energy") {
  const SignalFrame s = set_launch_power(rrc_shape(random_frame(16, 512, 2), {}), 0.0);
  const double b = -2.1e-21;
  const SignalFrame fwd = cdc(s, b);
  CHECK(std::abs(energy(fwd) / energy(s) - 1.0) <= 1e-12);
  const SignalFrame back = cdc(fwd, -b);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    num += std::norm(back.samples_x[i] - s.samples_x[i]);
    den += std::norm(s.samples_x[i]);
  }
  CHECK(std::sqrt(num / den) <= 1e-12);
}

TEST_CASE("CDC inverts a lossless linear span") {
  const SignalFrame s = set_launch_power(rrc_shape(random_frame(16, 1024, 3), {}), 0.0);
  FiberSpec f;
  f.alpha_db_per_km = 0.0;
  f.gamma_per_w_km = 0.0;
  const double b2 = beta2_from_D(17.0, 1550.0);
  const SignalFrame back = cdc(propagate_span(s, f, b2), b2 * f.length_km);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    num += std::norm(back.samples_x[i] - s.samples_x[i]) + std::norm(back.samples_y[i] - s.samples_y[i]);
    den += std::norm(s.samples_x[i]) + std::norm(s.samples_y[i]);
  }
  CHECK(std::sqrt(num / den) <= 1e-9);
}

TEST_CASE("back-to-back chain over 2^16 symbols") {
  const RrcConfig rrc;
  const auto alpha = build_alphabet(16);
  const SymbolFrame tx = random_frame(16, 1U << 16, 4);
  const SymbolFrame rx = matched_filter_downsample(set_launch_power(rrc_shape(tx, rrc), 3.0), rrc, 16);
  const int edge = matched_filter_edge_symbols(rrc);
  CHECK(edge == 32);
  REQUIRE(rx.size() == tx.size() - 2 * static_cast<std::size_t>(edge));
  const SymbolFrame ref = slice(tx, static_cast<std::size_t>(edge), rx.size());
  const NormalizedFrame n = normalize_to_reference(rx, ref);
  CHECK(evm_db(n.frame.syms_x, ref.syms_x) <= -45.0);
  CHECK(evm_db(n.frame.syms_y, ref.syms_y) <= -45.0);
  const Decisions d = hard_decision(n.frame, alpha);
  CHECK(d.bits == demap_frame(ref, alpha));
}

TEST_CASE("matched filter rejects misaligned frames") {
  const RrcConfig rrc;
  SignalFrame s = rrc_shape(random_frame(16, 256, 5), rrc);
  SignalFrame odd = s;
  odd.samples_x.pop_back();
  odd.samples_y.pop_back();
  CHECK_THROWS_AS(matched_filter_downsample(odd, rrc, 16), InvalidState);
  SignalFrame wrong = s;
  wrong.sps = 4;
  CHECK_THROWS_AS(matched_filter_downsample(wrong, rrc, 16), InvalidState);
}

TEST_CASE("normalization undoes a scalar channel exactly") {
  const SymbolFrame tx = random_frame(16, 4096, 6);
  SymbolFrame rx = tx;
  const cplx h = 2.0 * std::exp(cplx(0.0, kPi / 4.0));
  for (auto& z : rx.syms_x) z *= h;
  for (auto& z : rx.syms_y) z *= h;
  const NormalizedFrame n = normalize_to_reference(rx, tx);
  CHECK(std::abs(n.scale[0] - 0.5 * std::exp(cplx(0.0, -kPi / 4.0))) < 1e-13);
  for (std::size_t i = 0; i < tx.size(); ++i) CHECK(std::abs(n.frame.syms_x[i] - tx.syms_x[i]) < 1e-13);
}

TEST_CASE("normalization converges to 1 as noise vanishes") {
  const SymbolFrame tx = random_frame(16, 4096, 7);
  double prev = 1e9;
  for (double sd : {1e-1, 1e-2, 1e-3, 1e-4}) {
    SymbolFrame rx = tx;
    Rng rng(8);
    for (auto& z : rx.syms_x) {
      const auto [a, b] = rng.normal_pair();
      z += cplx(sd * a, sd * b);
    }
    const double err = std::abs(normalize_to_reference(rx, tx).scale[0] - 1.0);
    CHECK(err < prev);
    prev = err;
  }
  CHECK(prev < 1e-5);
}

TEST_CASE("closed-form normalization agrees with a grid search and leaves an orthogonal residual") {
  Rng rng(9);
  SymbolFrame tx, rx;
  for (int i = 0; i < 400; ++i) {
    tx.syms_x.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1));
    rx.syms_x.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1));
  }
  tx.syms_y = tx.syms_x;
  rx.syms_y = rx.syms_x;
  const NormalizedFrame n = normalize_to_reference(rx, tx);
  const cplx k = oracle::grid_search_scale(tx.syms_x, rx.syms_x);
  CHECK(std::abs(n.scale[0] - k) <= 1e-6);
  cplx inner{};
  for (std::size_t i = 0; i < tx.size(); ++i) inner += (tx.syms_x[i] - n.frame.syms_x[i]) * std::conj(rx.syms_x[i]);
  CHECK(std::abs(inner) < 1e-10);
}

TEST_CASE("normalization rejects bad inputs") {
  SymbolFrame a = random_frame(16, 8, 1);
  SymbolFrame z = a;
  for (auto& v : z.syms_x) v = 0.0;
  CHECK_THROWS_AS(normalize_to_reference(z, a), std::invalid_argument);
  SymbolFrame shorter = slice(a, 0, 4);
  CHECK_THROWS_AS(normalize_to_reference(shorter, a), std::invalid_argument);
}

TEST_CASE("normalized output is invariant to a global complex scaling of the received frame") {
  const RrcConfig rrc;
  const SymbolFrame tx = random_frame(16, 2048, 10);
  const SignalFrame wave = set_launch_power(rrc_shape(tx, rrc), 0.0);
  SignalFrame scaled = wave;
  const cplx g(0.3, -1.7);
  for (auto& v : scaled.samples_x) v *= g;
  for (auto& v : scaled.samples_y) v *= g;
  const SymbolFrame ref = slice(tx, 32, tx.size() - 64);
  const auto a = normalize_to_reference(matched_filter_downsample(wave, rrc, 16), ref).frame;
  const auto b = normalize_to_reference(matched_filter_downsample(scaled, rrc, 16), ref).frame;
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a.syms_x[i] - b.syms_x[i]) < 1e-12);
}

TEST_CASE("hard decision on noiseless symbols is the identity for every order") {
  for (int order : {16, 32, 64}) {
    const auto alpha = build_alphabet(order);
    const SymbolFrame tx = random_frame(order, 2048, 11);
    const Decisions d = hard_decision(tx, alpha);
    CHECK(d.symbols.syms_x == tx.syms_x);
    CHECK(d.bits == demap_frame(tx, alpha));
  }
}

TEST_CASE("hard decision SER on AWGN matches the square-QAM closed form") {
  const auto alpha = build_alphabet(16);
  const SymbolFrame tx = random_frame(16, 1U << 16, 12);
  const double dmin = 2.0 / std::sqrt(10.0);
  const double sd = 0.09;
  SymbolFrame rx = tx;
  Rng rng(13);
  for (auto& z : rx.syms_x) {
    const auto [a, b] = rng.normal_pair();
    z += cplx(sd * a, sd * b);
  }
  for (auto& z : rx.syms_y) {
    const auto [a, b] = rng.normal_pair();
    z += cplx(sd * a, sd * b);
  }
  const Decisions d = hard_decision(rx, alpha);
  const auto ref_x = classes_of(tx.syms_x, alpha), ref_y = classes_of(tx.syms_y, alpha);
  std::size_t errors = 0;
  for (std::size_t i = 0; i < tx.size(); ++i) errors += (d.classes_x[i] != ref_x[i]) + (d.classes_y[i] != ref_y[i]);
  const double n = 2.0 * tx.size();
  const double p = oracle::square_qam_ser(16, dmin, sd);
  CHECK(std::abs(errors / n - p) <= 3.0 * std::sqrt(p * (1 - p) / n));
}

TEST_CASE("decision boundary ties go to the lower class index") {
  const auto alpha = build_alphabet(16);
  const cplx mid = 0.5 * (alpha.point(0) + alpha.point(1));
  const std::vector<int> c = decide_classes(std::vector<cplx>{mid}, alpha);
  CHECK(c[0] == 0);
  CHECK(decide_classes(std::vector<cplx>{cplx{}}, alpha)[0] == alpha.nearest(cplx{}));
}
