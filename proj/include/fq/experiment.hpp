#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <json.hpp>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fq/config.hpp"
#include "fq/equalizer.hpp"
#include "fq/qam.hpp"

namespace fq {

inline constexpr const char* kArtifactVersion = "fqlab-1.0.0";

/// Thrown when train and test symbol sequences are correlated above
/// kIndependenceThreshold.
class IndependenceError : public std::runtime_error {
 public:
  explicit IndependenceError(double corr);
  double correlation() const { return corr_; }

 private:
  double corr_;
};

/// Aligned transmitted and received symbols for one dataset, concatenated
/// over simulation frames. Received symbols are normalized to the
/// transmitted reference over the whole sequence.
struct SimulatedData {
  SymbolFrame tx;
  SymbolFrame rx;
  std::vector<std::size_t> segments;  // payload length of each frame
  bool aliasing_warning = false;
};

/// Transmitted symbols only (frame payloads, guards dropped), cheap enough
/// to run the independence check before any propagation.
SymbolFrame transmitted_payload(const ExperimentConfig& cfg, int order, std::uint64_t data_seed,
                                std::size_t n_symbols);

/// Tx -> RRC -> link -> CDC -> matched filter -> normalization, framed with
/// cyclic guards that are discarded.
SimulatedData simulate_dataset(const ExperimentConfig& cfg, int order, double power_dbm, std::uint64_t data_seed,
                               std::uint64_t noise_seed, std::size_t n_symbols);

/// Windows are built per frame so none straddles a frame boundary.
WindowedDataset windowed_from(const SimulatedData& d, int neighbors, Polarization pol);

/// Verifies train/test independence from the seeds alone. Returns the
/// correlation, or a negative value when the sequences are too short to test.
double check_seeds_independent(const ExperimentConfig& cfg, int order);

struct PointData {
  int order = 16;
  double power_dbm = 0.0;
  double independence = -1.0;
  SimulatedData train;
  SimulatedData test;
};

PointData simulate_point(const ExperimentConfig& cfg, int order, double power_dbm);

void save_point(const std::filesystem::path& dir, const PointData& p);
PointData load_point(const std::filesystem::path& dir);
std::string point_dir_name(int order, double power_dbm);

struct DatasetMetrics {
  MetricReport report;
  double mi_gaussian = 0.0;
  double mi_cel = std::numeric_limits<double>::quiet_NaN();
};

struct RunResult {
  int order = 16;
  double power_dbm = 0.0;
  nn::HeadKind head = nn::HeadKind::Regression;
  double lr = 0.0;
  TrainReport report;
  bool diverged = false;
  DatasetMetrics train;
  DatasetMetrics test;
  std::uint64_t initial_trunk = 0;
  std::uint64_t first_epoch_order = 0;
};

struct BaselineResult {
  int order = 16;
  double power_dbm = 0.0;
  DatasetMetrics train;
  DatasetMetrics test;
};

struct RunRecord {
  std::string config_hash;
  std::string version = kArtifactVersion;
  nlohmann::json config;
  std::vector<RunResult> runs;          // every (order, power, head, lr), sorted
  std::vector<std::size_t> selected;    // index into runs per (order, power, head)
  std::vector<BaselineResult> baselines;
  nlohmann::json fairness;
  double wall_clock_s = 0.0;
};

nlohmann::json record_to_json(const RunRecord& r);
RunRecord record_from_json(const nlohmann::json& j);

/// Index of the run with the best test Q among non-diverged runs; ties go to
/// the larger learning rate. Returns npos when every run diverged.
std::size_t select_best_run(const std::vector<const RunResult*>& runs);

DatasetMetrics baseline_metrics(const WindowedDataset& ds);

struct ExperimentOptions {
  /// Where checkpoints of selected models are written (empty: not saved).
  std::filesystem::path models_dir;
  /// Simulated points are loaded from here when present (empty: simulate).
  std::filesystem::path cache_dir;
  std::ostream* log = nullptr;
  /// Worker count; 0 reads FQ_THREADS (default 1).
  int threads = 0;
};

/// Full pipeline over the config's (order, power) grid and heads.
RunRecord run_experiment(const ExperimentConfig& cfg, const ExperimentOptions& opts);

/// Writes results.csv, lr_sweep.csv, epochs/*.csv, record.json and
/// timing.json. Every file except timing.json is a pure function of the
/// config.
void write_outputs(const RunRecord& r, const std::filesystem::path& out_dir);

std::string results_csv(const RunRecord& r);
std::string lr_sweep_csv(const RunRecord& r);

int worker_count(int requested);

/// Runs fn(i) for i in [0, n) on a bounded pool; exceptions are rethrown
/// (the first by index) after all workers finish.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace fq
