#include "fq/metrics.hpp"

#include <algorithm>
#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "fq/nn/loss.hpp"

namespace fq {

double bit_error_rate(std::span<const std::uint8_t> decided, std::span<const std::uint8_t> reference) {
  if (decided.size() != reference.size()) throw std::invalid_argument("ber: length mismatch");
  if (decided.empty()) throw std::invalid_argument("ber: empty input");
  std::size_t e = 0;
  for (std::size_t i = 0; i < decided.size(); ++i) e += (decided[i] & 1U) != (reference[i] & 1U);
  return static_cast<double>(e) / static_cast<double>(decided.size());
}

double symbol_error_rate(std::span<const int> decided, std::span<const int> reference) {
  if (decided.size() != reference.size()) throw std::invalid_argument("ser: length mismatch");
  if (decided.empty()) throw std::invalid_argument("ser: empty input");
  std::size_t e = 0;
  for (std::size_t i = 0; i < decided.size(); ++i) e += decided[i] != reference[i];
  return static_cast<double>(e) / static_cast<double>(decided.size());
}

ErrorRates ber_ser(std::span<const std::uint8_t> decided_bits, std::span<const std::uint8_t> reference_bits,
                   std::span<const int> decided_classes, std::span<const int> reference_classes) {
  ErrorRates r;
  r.ber = bit_error_rate(decided_bits, reference_bits);
  r.ser = symbol_error_rate(decided_classes, reference_classes);
  r.bit_errors = static_cast<std::size_t>(std::llround(r.ber * static_cast<double>(decided_bits.size())));
  r.symbol_errors = static_cast<std::size_t>(std::llround(r.ser * static_cast<double>(decided_classes.size())));
  return r;
}

QFactor q_factor_from_ber(double ber) {
  if (!(ber > 0.0)) return {std::numeric_limits<double>::infinity(), QFlag::PlusInfinity};
  if (ber >= 0.5) return {-std::numeric_limits<double>::infinity(), QFlag::MinusInfinity};
  const double x = boost::math::erfc_inv(2.0 * ber);
  return {20.0 * std::log10(std::sqrt(2.0) * x), QFlag::Finite};
}

double q_db_for_table(const QFactor& q) {
  switch (q.flag) {
    case QFlag::PlusInfinity:
      return 99.99;
    case QFlag::MinusInfinity:
      return -99.99;
    default:
      return std::clamp(q.q_db, -99.99, 99.99);
  }
}

std::string q_flag_name(QFlag f) {
  switch (f) {
    case QFlag::PlusInfinity:
      return "+inf";
    case QFlag::MinusInfinity:
      return "-inf";
    default:
      return "";
  }
}

double evm_db(std::span<const cplx> received, std::span<const cplx> reference) {
  if (received.size() != reference.size()) throw std::invalid_argument("evm: length mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < received.size(); ++i) {
    num += std::norm(received[i] - reference[i]);
    den += std::norm(reference[i]);
  }
  if (!(den > 0.0)) throw std::invalid_argument("evm: zero reference power");
  if (num <= 0.0) return kEvmFloorDb;
  return std::max(kEvmFloorDb, 10.0 * std::log10(num / den));
}

namespace {

bool labels_nonuniform(std::span<const int> labels, int order) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(order), 0);
  for (int l : labels) ++counts[static_cast<std::size_t>(l)];
  const double n = static_cast<double>(labels.size());
  const double p = 1.0 / order;
  const double sigma = std::sqrt(n * p * (1.0 - p));
  for (auto c : counts) {
    if (std::abs(static_cast<double>(c) - n * p) > 5.0 * sigma) return true;
  }
  return false;
}

}  // namespace

MiEstimate mi_classification(std::span<const double> probs, std::span<const int> labels, int order) {
  if (order < 2 || probs.size() != labels.size() * static_cast<std::size_t>(order)) {
    throw std::invalid_argument("mi_classification: shape mismatch");
  }
  for (std::size_t r = 0; r < labels.size(); ++r) {
    double s = 0.0;
    for (int c = 0; c < order; ++c) s += probs[r * static_cast<std::size_t>(order) + static_cast<std::size_t>(c)];
    if (std::abs(s - 1.0) > 1e-4) throw std::invalid_argument("mi_classification: probability row not normalised");
  }
  MiEstimate m;
  m.bits = std::log2(static_cast<double>(order)) - nn::cel_from_probs(probs, labels, order);
  m.nonuniform_labels = labels_nonuniform(labels, order);
  return m;
}

MiEstimate mi_gaussian_lower_bound(std::span<const cplx> received, std::span<const int> tx_classes, int order) {
  if (received.size() != tx_classes.size() || received.empty()) {
    throw std::invalid_argument("mi_gaussian_lower_bound: length mismatch");
  }
  const auto k = static_cast<std::size_t>(order);
  struct Fit {
    std::size_t n = 0;
    double mr = 0, mi = 0;           // mean
    double srr = 0, sri = 0, sii = 0;  // covariance
    double irr = 0, iri = 0, iii = 0;  // inverse covariance
    double log_norm = 0;             // -log(2 pi) - 0.5 log det
  };
  std::vector<Fit> fit(k);
  for (std::size_t i = 0; i < received.size(); ++i) {
    const int c = tx_classes[i];
    if (c < 0 || c >= order) throw std::invalid_argument("mi_gaussian_lower_bound: class out of range");
    auto& f = fit[static_cast<std::size_t>(c)];
    ++f.n;
    f.mr += received[i].real();
    f.mi += received[i].imag();
  }
  for (auto& f : fit) {
    if (f.n > 0) {
      f.mr /= static_cast<double>(f.n);
      f.mi /= static_cast<double>(f.n);
    }
  }
  for (std::size_t i = 0; i < received.size(); ++i) {
    auto& f = fit[static_cast<std::size_t>(tx_classes[i])];
    const double dr = received[i].real() - f.mr, di = received[i].imag() - f.mi;
    f.srr += dr * dr;
    f.sri += dr * di;
    f.sii += di * di;
  }
  MiEstimate m;
  double mean_trace = 0.0;
  std::size_t populated = 0;
  for (auto& f : fit) {
    if (f.n == 0) continue;
    f.srr /= static_cast<double>(f.n);
    f.sri /= static_cast<double>(f.n);
    f.sii /= static_cast<double>(f.n);
    if (f.n >= 2) {
      mean_trace += f.srr + f.sii;
      ++populated;
    }
    if (f.n < 100) m.undersampled = true;
  }
  mean_trace = populated > 0 ? mean_trace / static_cast<double>(populated) : 1.0;
  for (auto& f : fit) {
    if (f.n == 0) {
      m.regularized = true;
      continue;
    }
    double tau = 1e-9 * (f.srr + f.sii) / 2.0;
    double det = (f.srr + tau) * (f.sii + tau) - f.sri * f.sri;
    if (f.n < 2 || !(det > 0.0) || tau == 0.0) {
      // Degenerate class: borrow the scale of the populated classes.
      m.regularized = true;
      tau = std::max(tau, 1e-9 * mean_trace / 2.0);
      if (f.n < 2) tau = std::max(tau, mean_trace / 2.0);
      tau = std::max(tau, 1e-150);  // every class identical: keep det > 0
      det = (f.srr + tau) * (f.sii + tau) - f.sri * f.sri;
    }
    f.srr += tau;
    f.sii += tau;
    f.irr = f.sii / det;
    f.iii = f.srr / det;
    f.iri = -f.sri / det;
    f.log_norm = -std::log(2.0 * kPi) - 0.5 * std::log(det);
  }

  std::vector<double> ll(k);
  double acc = 0.0;
  for (std::size_t i = 0; i < received.size(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      const auto& f = fit[c];
      if (f.n == 0) {
        ll[c] = -std::numeric_limits<double>::infinity();
        continue;
      }
      const double dr = received[i].real() - f.mr, di = received[i].imag() - f.mi;
      ll[c] = f.log_norm - 0.5 * (f.irr * dr * dr + 2.0 * f.iri * dr * di + f.iii * di * di);
      mx = std::max(mx, ll[c]);
    }
    double s = 0.0;
    for (std::size_t c = 0; c < k; ++c) s += std::exp(ll[c] - mx);
    const double log_mix = mx + std::log(s / static_cast<double>(order));
    acc += ll[static_cast<std::size_t>(tx_classes[i])] - log_mix;
  }
  m.bits = acc / static_cast<double>(received.size()) / std::log(2.0);
  if (m.bits < 0.0) {
    m.bits = 0.0;
    m.clamped = true;
  }
  m.nonuniform_labels = labels_nonuniform(tx_classes, order);
  return m;
}

MiEstimate mi_gaussian_lower_bound(const SymbolFrame& received, const SymbolFrame& transmitted) {
  const auto alphabet = QamAlphabet::build(transmitted.order);
  MiEstimate out;
  for (auto p : {Polarization::X, Polarization::Y}) {
    const auto cls = classes_of(transmitted.pol(p), alphabet);
    const auto m = mi_gaussian_lower_bound(received.pol(p), cls, alphabet.order());
    out.bits += m.bits / 2.0;
    out.clamped = out.clamped || m.clamped;
    out.regularized = out.regularized || m.regularized;
    out.undersampled = out.undersampled || m.undersampled;
    out.nonuniform_labels = out.nonuniform_labels || m.nonuniform_labels;
  }
  return out;
}

std::string mi_method_name(MiMethod m) {
  switch (m) {
    case MiMethod::HardDecision:
      return "hard-decision";
    case MiMethod::ClassificationCel:
      return "classification-CEL";
    default:
      return "gaussian-lower-bound";
  }
}

}  // namespace fq
