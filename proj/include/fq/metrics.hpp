#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fq/qam.hpp"

namespace fq {

struct ErrorRates {
  double ber = 0.0;
  double ser = 0.0;
  std::size_t bit_errors = 0;
  std::size_t symbol_errors = 0;
};

/// Throws std::invalid_argument on length mismatch or empty input.
double bit_error_rate(std::span<const std::uint8_t> decided, std::span<const std::uint8_t> reference);
double symbol_error_rate(std::span<const int> decided, std::span<const int> reference);
ErrorRates ber_ser(std::span<const std::uint8_t> decided_bits, std::span<const std::uint8_t> reference_bits,
                   std::span<const int> decided_classes, std::span<const int> reference_classes);

enum class QFlag : std::uint8_t { Finite, PlusInfinity, MinusInfinity };

struct QFactor {
  double q_db = 0.0;  // +/-infinity when flagged
  QFlag flag = QFlag::Finite;
};

/// Q = 20 log10(sqrt(2) erfc^-1(2 BER)). BER <= 0 gives +inf, BER >= 0.5
/// gives -inf, each flagged.
QFactor q_factor_from_ber(double ber);

/// Value written to tables: sentinels become +/-99.99 dB.
double q_db_for_table(const QFactor& q);
std::string q_flag_name(QFlag f);

inline constexpr double kEvmFloorDb = -100.0;

/// 10 log10(sum |y - x|^2 / sum |x|^2), floored at kEvmFloorDb.
double evm_db(std::span<const cplx> received, std::span<const cplx> reference);

struct MiEstimate {
  double bits = 0.0;
  bool clamped = false;          // raw estimate was negative and was set to 0
  bool regularized = false;      // a class had < 2 samples or singular covariance
  bool undersampled = false;     // some class had fewer than 100 samples
  bool nonuniform_labels = false;
};

/// log2(MF) - CEL(bits) for row-major probability rows (n x MF).
/// Throws std::invalid_argument if a row is not normalised (|sum - 1| > 1e-4)
/// or a label is out of range.
MiEstimate mi_classification(std::span<const double> probs, std::span<const int> labels, int order);

/// Gaussian-channel lower bound on I(X;Y): a 2-D Gaussian (mean and full
/// covariance, maximum likelihood) is fitted per transmitted class, and
/// E[log2 p(y|x_k) / sum_i p(i) p(y|x_i)] is averaged over the samples with
/// uniform priors p(i) = 1/MF.
MiEstimate mi_gaussian_lower_bound(std::span<const cplx> received, std::span<const int> tx_classes, int order);

/// Per-polarization mean of the Gaussian bound over both polarizations.
MiEstimate mi_gaussian_lower_bound(const SymbolFrame& received, const SymbolFrame& transmitted);

enum class MiMethod : std::uint8_t { HardDecision, ClassificationCel, GaussianLowerBound };

struct MetricReport {
  double ber = 0.0;
  double ser = 0.0;
  QFactor q;
  double evm_db = 0.0;
  double mi_bits = 0.0;
  std::size_t n_symbols = 0;
  MiMethod method = MiMethod::GaussianLowerBound;
};

std::string mi_method_name(MiMethod m);

}  // namespace fq
