#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fq/metrics.hpp"
#include "fq/nn/adam.hpp"
#include "fq/nn/network.hpp"
#include "fq/qam.hpp"
#include "fq/rng.hpp"

namespace fq {

/// Aligned (received window, transmitted centre symbol) pairs.
///
/// inputs has shape (rows, M, 4) with features Re x, Im x, Re y, Im y of the
/// received symbols; window k covers slots [k, k + 2N] and targets slot k + N
/// of the chosen polarization.
struct WindowedDataset {
  int neighbors = 0;
  int order = 16;
  Polarization pol = Polarization::X;
  nn::Tensor<float> inputs;       // (rows, M, 4)
  nn::Tensor<float> reg_targets;  // (rows, 2)
  std::vector<int> labels;
  CVec target_symbols;   // exact alphabet points
  CVec center_received;  // received symbol at the target slot

  int memory() const { return 2 * neighbors + 1; }
  std::size_t rows() const { return labels.size(); }
};

/// Throws std::invalid_argument if the frames differ in length, the length
/// does not exceed M, or a transmitted symbol is not an alphabet point.
WindowedDataset build_dataset(const SymbolFrame& rx, const SymbolFrame& tx, int neighbors, Polarization pol);

/// Row-wise concatenation of datasets built from separate frames, so no
/// window crosses a frame boundary.
WindowedDataset concat_datasets(std::span<const WindowedDataset> parts);

/// Maximum over lags |l| <= max_lag and both polarizations of the normalised
/// circular cross-correlation magnitude between two (mean-removed) symbol
/// sequences. Sequences must have at least 2^14 symbols; the longer one is
/// truncated to the shorter length.
double check_dataset_independence(const SymbolFrame& train, const SymbolFrame& test, int max_lag = 1000);

/// Threshold above which a train/test pair is rejected.
inline constexpr double kIndependenceThreshold = 0.02;

struct EqualizerSpec {
  nn::Topology topology;
  int batch_size = 4331;
  std::vector<double> learning_rates{1e-3, 5e-4, 1e-4, 5e-5};
  int max_epochs = 5000;
  int patience = 150;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double test_loss = 0.0;
  QFactor train_q;
  QFactor test_q;
  double train_mi = 0.0;
  double test_mi = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  double best_test_q = -std::numeric_limits<double>::infinity();
  double lr = 0.0;
  double wall_clock_s = 0.0;
  bool early_stopped = false;
  bool diverged = false;
  std::string diagnostic;
};

/// Header: epoch,train_loss,test_loss,train_q_db,test_q_db,train_mi_bits,
/// test_mi_bits,train_q_flag,test_q_flag
std::string train_report_csv(const TrainReport& r);

/// A network plus everything needed to continue training it exactly.
struct EqualizerModel {
  EqualizerSpec spec;
  nn::Network<float> net;
  nn::AdamState<float> adam;
  Rng shuffle_rng{0};
  double lr = 1e-3;
  int epoch = 0;
  int best_epoch = -1;
  double best_test_q = -std::numeric_limits<double>::infinity();
  int since_best = 0;
  bool finished = false;
  std::vector<nn::Matrix<float>> best_params;
  TrainReport report;
};

EqualizerModel build_model(const EqualizerSpec& spec, std::uint64_t init_seed);

struct TrainOptions {
  double lr = 1e-3;
  std::uint64_t shuffle_seed = 0;
  /// Return after this many epochs of this call (training can be resumed).
  std::optional<int> pause_after;
};

/// Thrown when the training loss becomes NaN; carries the partial report.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& msg, TrainReport report)
      : std::runtime_error(msg), report_(std::move(report)) {}
  const TrainReport& report() const { return report_; }

 private:
  TrainReport report_;
};

/// Epoch = one shuffled pass in minibatches; after each epoch both datasets
/// are evaluated and training stops once the test Q-factor has not improved
/// for `patience` epochs. The best-epoch parameters are restored on exit.
TrainReport train(EqualizerModel& model, const WindowedDataset& train_ds, const WindowedDataset& test_ds,
                  const TrainOptions& opts);

struct Evaluation {
  double loss = 0.0;
  MetricReport metrics;
  double mi_gaussian = 0.0;
  double mi_cel = std::numeric_limits<double>::quiet_NaN();  // classification only
  std::vector<int> classes;
  CVec soft_symbols;  // regression output, or posterior mean for classification
};

Evaluation evaluate(const nn::Network<float>& net, const WindowedDataset& ds);

struct EqualizerOutput {
  CVec symbols;                   // regression output or argmax alphabet points
  nn::Matrix<double> probs;       // (rows, MF), classification only
  std::vector<int> classes;
};

EqualizerOutput equalize(const nn::Network<float>& net, const WindowedDataset& ds);

struct SweepResult {
  EqualizerModel best;
  std::vector<TrainReport> reports;  // one per learning rate, in spec order
  std::size_t best_index = 0;
};

/// Trains one model per learning rate from the same initialisation and
/// shuffle seed; keeps the one with the highest best test Q (ties go to the
/// larger learning rate). Diverged runs are recorded and skipped.
SweepResult train_with_lr_sweep(const EqualizerSpec& spec, const WindowedDataset& train_ds,
                                const WindowedDataset& test_ds, std::uint64_t init_seed, std::uint64_t shuffle_seed);

void save_model(const std::filesystem::path& path, const EqualizerModel& model);
EqualizerModel load_model(const std::filesystem::path& path);

/// FNV-1a 64-bit hash, for fairness fingerprints.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t hash_floats(std::span<const float> v, std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t trunk_fingerprint(const nn::Network<float>& net);

/// The row order used for epoch `epoch` (0-based) given the shuffle seed.
std::vector<std::size_t> epoch_order(std::uint64_t shuffle_seed, std::size_t rows, int epoch);

}  // namespace fq
