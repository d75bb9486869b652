#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "fq/fiber.hpp"
#include "fq/nn/network.hpp"

namespace fq {

/// Raised for malformed or inconsistent experiment configs (CLI exit code 1).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SeedConfig {
  std::uint64_t data_train = 0;
  std::uint64_t data_test = 0;
  std::uint64_t init = 0;
  std::uint64_t noise = 0;
  std::uint64_t shuffle = 0;
};

/// Fully resolved experiment description. Key names in the file carry their
/// units (launch_powers_dbm, span_length_km, symbol_rate_hz, ...); see
/// configs/ for annotated examples.
struct ExperimentConfig {
  std::string link_preset = "ssmf_5x100";
  LinkSpec link;
  std::vector<int> modulation_orders{16};
  std::vector<double> launch_powers_dbm{6.0};

  nn::TrunkKind trunk = nn::TrunkKind::Mlp;
  std::vector<nn::HeadKind> heads{nn::HeadKind::Regression, nn::HeadKind::Classification};
  std::array<int, 3> mlp_widths{481, 31, 263};
  int lstm_hidden_units = 226;
  int memory_neighbors = 25;
  int batch_size = 4331;
  std::vector<double> learning_rates{1e-3, 5e-4, 1e-4, 5e-5};
  int max_epochs = 5000;
  int patience = 150;
  Polarization polarization = Polarization::X;

  SeedConfig seeds;
  std::size_t train_symbols = std::size_t{1} << 18;
  std::size_t test_symbols = std::size_t{1} << 18;
  std::size_t frame_symbols = std::size_t{1} << 16;
  std::size_t guard_symbols = 2048;

  double symbol_rate_hz = 34.4e9;
  int samples_per_symbol = 8;
  double rrc_rolloff = 0.1;
  int rrc_span_symbols = 64;

  std::string output_dir = "out";
};

/// Values --desk-scale substitutes for keys the config leaves unset.
struct DeskDefaults {
  static constexpr std::size_t kSymbols = std::size_t{1} << 16;
  static constexpr int kLstmHidden = 64;
  static constexpr std::array<int, 3> kMlpWidths{48, 16, 32};
  static constexpr int kBatchSize = 512;
  static constexpr int kMaxEpochs = 300;
  static constexpr int kPatience = 30;
};

/// Parses a JSON config tree. Unknown keys, missing seeds, unknown presets
/// and out-of-range values raise ConfigError.
ExperimentConfig parse_config(const nlohmann::json& j, bool desk_scale);
ExperimentConfig load_config(const std::filesystem::path& path, bool desk_scale);

/// Canonical JSON of the resolved config (sorted keys, output_dir omitted).
nlohmann::json config_to_json(const ExperimentConfig& c);

/// Stable hex hash of config_to_json; independent of key order in the file.
std::string config_hash(const ExperimentConfig& c);

/// Replaces every seed with one derived from `master`.
void override_seeds(ExperimentConfig& c, std::uint64_t master);

/// Memory neighbours used by the named link preset when unset (M = 2N + 1).
int default_neighbors(const std::string& preset);

}  // namespace fq
