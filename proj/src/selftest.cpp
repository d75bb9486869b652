#include "fq/selftest.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>

#include "fq/config.hpp"
#include "fq/equalizer.hpp"
#include "fq/fiber.hpp"
#include "fq/frame_io.hpp"
#include "fq/metrics.hpp"
#include "fq/nn/checkpoint.hpp"
#include "fq/nn/gradcheck.hpp"
#include "fq/rx_dsp.hpp"
#include "fq/signal.hpp"

namespace fq {
namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

SelftestResult gray_mapping() {
  for (int order : {16, 64}) {
    const auto a = QamAlphabet::build(order);
    const double dmin = std::abs(a.point(0) - a.point(1)) < std::abs(a.point(0) - a.point(2))
                            ? std::abs(a.point(0) - a.point(1))
                            : std::abs(a.point(0) - a.point(2));
    for (int i = 0; i < order; ++i) {
      for (int j = i + 1; j < order; ++j) {
        if (std::abs(std::abs(a.point(i) - a.point(j)) - dmin) < 1e-9 && std::popcount(unsigned(i ^ j)) != 1) {
          return {"gray mapping", false, std::to_string(order) + "-QAM neighbours " + std::to_string(i) + "/" +
                                             std::to_string(j) + " differ in more than one bit"};
        }
      }
    }
  }
  return {"gray mapping", true, "square 16/64-QAM neighbours differ in one bit"};
}

SelftestResult bit_round_trip() {
  for (int order : {16, 32, 64}) {
    const auto a = QamAlphabet::build(order);
    const Bits bits = generate_bits(2 * 1000 * static_cast<std::size_t>(a.bits_per_symbol()), 7);
    if (demap_frame(map_symbols(bits, a), a) != bits) {
      return {"bit round trip", false, std::to_string(order) + "-QAM demap differs"};
    }
  }
  return {"bit round trip", true, "16/32/64-QAM"};
}

SymbolFrame random_frame(int order, std::size_t n, std::uint64_t seed) {
  const auto a = QamAlphabet::build(order);
  return map_symbols(generate_bits(2 * n * static_cast<std::size_t>(a.bits_per_symbol()), seed), a);
}

SelftestResult back_to_back() {
  const RrcConfig rrc;
  const SymbolFrame tx = random_frame(16, 4096, 3);
  const SymbolFrame rx = matched_filter_downsample(rrc_shape(tx, rrc), rrc, 16);
  const auto edge = static_cast<std::size_t>(matched_filter_edge_symbols(rrc));
  SymbolFrame ref = tx;
  for (auto p : {Polarization::X, Polarization::Y}) {
    ref.pol(p).assign(tx.pol(p).begin() + static_cast<std::ptrdiff_t>(edge),
                      tx.pol(p).end() - static_cast<std::ptrdiff_t>(edge));
  }
  const SymbolFrame norm = normalize_to_reference(rx, ref).frame;
  const double evm = evm_db(norm.syms_x, ref.syms_x);
  const auto alphabet = QamAlphabet::build(16);
  const auto d = hard_decision(norm, alphabet);
  std::size_t errs = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    errs += d.classes_x[i] != alphabet.class_of(ref.syms_x[i]);
    errs += d.classes_y[i] != alphabet.class_of(ref.syms_y[i]);
  }
  return {"back-to-back chain", errs == 0 && evm <= -45.0, "EVM " + num(evm) + " dB, " + std::to_string(errs) + " errors"};
}

SelftestResult linear_link() {
  LinkSpec link = link_preset("ssmf_5x100");
  link.fiber.alpha_db_per_km = 0.0;
  link.fiber.gamma_per_w_km = 0.0;
  link.fiber.length_km = 100.0;
  link.fiber.step_km = 10.0;
  link.n_spans = 1;
  link.ase_enabled = false;
  const RrcConfig rrc;
  const SignalFrame tx = set_launch_power(rrc_shape(random_frame(16, 2048, 5), rrc), 0.0);
  const SignalFrame rx = cdc(propagate_link(tx, link, true).first, link.total_beta2_l());
  const double evm = evm_db(rx.samples_x, tx.samples_x);
  return {"dispersion-only link + CDC", evm <= -40.0, "EVM " + num(evm) + " dB"};
}

SelftestResult spm_phase() {
  LinkSpec link = link_preset("ssmf_5x100");
  link.fiber.dispersion_ps_nm_km = 0.0;
  link.fiber.length_km = 50.0;
  link.fiber.step_km = 5.0;
  link.n_spans = 1;
  link.ase_enabled = false;
  SignalFrame cw;
  cw.symbol_rate = 34.4e9;
  cw.sps = 8;
  const double p = 1e-3;
  cw.samples_x.assign(256, cplx(std::sqrt(p / 2), 0.0));
  cw.samples_y.assign(256, cplx(std::sqrt(p / 2), 0.0));
  const SignalFrame out = propagate_span(cw, link.fiber, 0.0, {});
  const double a = link.fiber.alpha_per_km();
  const double leff = (1.0 - std::exp(-a * link.fiber.length_km)) / a;
  const double expected = kManakovFactor * link.fiber.gamma_per_w_km * p * leff;
  const double err = std::abs(std::arg(out.samples_x[100]) - expected) / expected;
  return {"CW self-phase modulation", err <= 1e-6, "relative error " + num(err)};
}

SelftestResult q_factor() {
  const double q = q_factor_from_ber(1e-3).q_db;
  return {"Q(BER=1e-3)", std::abs(q - 9.80) <= 0.01, num(q) + " dB"};
}

SelftestResult mi_identities() {
  const int m = 16;
  std::vector<double> onehot(static_cast<std::size_t>(m * m), 0.0), uniform(static_cast<std::size_t>(m * m), 1.0 / m);
  std::vector<int> labels(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    onehot[static_cast<std::size_t>(i * m + i)] = 1.0;
    labels[static_cast<std::size_t>(i)] = i;
  }
  const double hi = mi_classification(onehot, labels, m).bits;
  const double lo = mi_classification(uniform, labels, m).bits;
  return {"classification MI identities", hi == 4.0 && std::abs(lo) < 1e-12, num(hi) + " / " + num(lo) + " bits"};
}

SelftestResult gradients() {
  double worst = 0.0;
  for (auto trunk : {nn::TrunkKind::Mlp, nn::TrunkKind::BiLstm}) {
    for (auto head : {nn::HeadKind::Regression, nn::HeadKind::Classification}) {
      nn::Topology t;
      t.trunk = trunk;
      t.head = head;
      t.mlp_widths = {6, 5, 4};
      t.lstm_hidden = 3;
      t.memory = 3;
      t.n_classes = 4;
      nn::Network<double> net(t, 11);
      Rng rng(5);
      nn::Matrix<double> x(3, t.input_width());
      for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1.0, 1.0);
      nn::Matrix<double> target(3, 2);
      for (Eigen::Index i = 0; i < target.size(); ++i) target.data()[i] = rng.uniform(-1.0, 1.0);
      const std::vector<int> labels{0, 3, 1};
      worst = std::max(worst, nn::check_network_gradients(net, x, [&](const nn::Matrix<double>& y) {
                         return head == nn::HeadKind::Regression ? nn::mse_loss<double>(y, target)
                                                                 : nn::cel_loss<double>(y, labels);
                       }));
    }
  }
  return {"network gradients", worst <= 1e-5, "max relative error " + num(worst)};
}

SelftestResult containers() {
  const SymbolFrame f = random_frame(32, 100, 9);
  const SymbolFrame back = to_symbol_frame(decode_frame(encode_frame(to_container(f))));
  nn::Topology t;
  t.mlp_widths = {4, 3, 2};
  t.memory = 3;
  const nn::Network<float> net(t, 3);
  nn::Checkpoint c;
  c.topology = t;
  c.params = net.params();
  c.rng_state = Rng(1).state();
  const nn::Checkpoint c2 = nn::decode_checkpoint(nn::encode_checkpoint(c));
  bool same = back.syms_x == f.syms_x && back.syms_y == f.syms_y && c2.params.size() == c.params.size();
  for (std::size_t i = 0; same && i < c.params.size(); ++i) same = c2.params[i].value == c.params[i].value;
  return {"frame and checkpoint round trip", same, same ? "lossless" : "mismatch"};
}

SelftestResult config_errors() {
  try {
    parse_config(nlohmann::json::parse(R"({"seeds": {"data_train": 1}})"), false);
  } catch (const ConfigError&) {
    try {
      parse_config(nlohmann::json::parse(
                       R"({"bogus": 1, "seeds": {"data_train":1,"data_test":2,"init":3,"noise":4,"shuffle":5}})"),
                   false);
    } catch (const ConfigError&) {
      return {"config validation", true, "missing seeds and unknown keys rejected"};
    }
  }
  return {"config validation", false, "invalid config accepted"};
}

}  // namespace

std::vector<SelftestResult> run_selftest() {
  const std::vector<std::function<SelftestResult()>> checks{gray_mapping, bit_round_trip, back_to_back, linear_link,
                                                            spm_phase,    q_factor,       mi_identities, gradients,
                                                            containers,   config_errors};
  std::vector<SelftestResult> out;
  for (const auto& c : checks) {
    try {
      out.push_back(c());
    } catch (const std::exception& e) {
      out.push_back({"(check threw)", false, e.what()});
    }
  }
  return out;
}

bool report_selftest(const std::vector<SelftestResult>& results, std::ostream& os) {
  bool ok = true;
  for (const auto& r : results) {
    os << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
    ok = ok && r.passed;
  }
  return ok;
}

}  // namespace fq
