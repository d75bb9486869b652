#include "fq/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "fq/equalizer.hpp"
#include "fq/rng.hpp"

namespace fq {
namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, v] : obj.items()) {
    if (!allowed.contains(k)) throw ConfigError(where + ": unknown key '" + k + "'");
  }
}

template <class T>
T read(const json& obj, const std::string& key, const std::string& where, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

std::uint64_t read_seed(const json& obj, const std::string& key) {
  if (!obj.contains(key)) throw ConfigError("seeds." + key + " is required (no implicit entropy)");
  const auto& v = obj.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw ConfigError("seeds." + key + " must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

}  // namespace

int default_neighbors(const std::string& preset) { return preset == "twc_9x50" ? 20 : 25; }

ExperimentConfig parse_config(const json& j, bool desk_scale) {
  reject_unknown(j, {"link", "modulation_orders", "launch_powers_dbm", "equalizer", "seeds", "dataset", "transmitter",
                     "output_dir"},
                 "config");
  ExperimentConfig c;

  const json link = j.value("link", json::object());
  reject_unknown(link, {"preset", "alpha_db_per_km", "dispersion_ps_nm_km", "gamma_per_w_km", "span_length_km",
                        "step_km", "n_spans", "amp_noise_figure_db", "center_wavelength_nm", "ase_enabled",
                        "manakov_factor"},
                 "link");
  c.link_preset = read<std::string>(link, "preset", "link", "ssmf_5x100");
  try {
    c.link = link_preset(c.link_preset);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  c.link.fiber.alpha_db_per_km = read(link, "alpha_db_per_km", "link", c.link.fiber.alpha_db_per_km);
  c.link.fiber.dispersion_ps_nm_km = read(link, "dispersion_ps_nm_km", "link", c.link.fiber.dispersion_ps_nm_km);
  c.link.fiber.gamma_per_w_km = read(link, "gamma_per_w_km", "link", c.link.fiber.gamma_per_w_km);
  c.link.fiber.length_km = read(link, "span_length_km", "link", c.link.fiber.length_km);
  c.link.fiber.step_km = read(link, "step_km", "link", c.link.fiber.step_km);
  c.link.n_spans = read(link, "n_spans", "link", c.link.n_spans);
  c.link.amp_noise_figure_db = read(link, "amp_noise_figure_db", "link", c.link.amp_noise_figure_db);
  c.link.center_wavelength_nm = read(link, "center_wavelength_nm", "link", c.link.center_wavelength_nm);
  c.link.ase_enabled = read(link, "ase_enabled", "link", c.link.ase_enabled);
  c.link.manakov_factor = read(link, "manakov_factor", "link", c.link.manakov_factor);
  try {
    c.link.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (c.link.manakov_factor != kManakovFactor && c.link.manakov_factor != 1.0) {
    throw ConfigError("link.manakov_factor must be 8/9 or 1");
  }

  c.modulation_orders = read(j, "modulation_orders", "config", c.modulation_orders);
  for (int mf : c.modulation_orders) {
    if (mf != 16 && mf != 32 && mf != 64) throw ConfigError("modulation order must be 16, 32 or 64");
  }
  c.launch_powers_dbm = read(j, "launch_powers_dbm", "config", c.launch_powers_dbm);
  if (c.modulation_orders.empty() || c.launch_powers_dbm.empty()) {
    throw ConfigError("modulation_orders and launch_powers_dbm must be non-empty");
  }

  const json eq = j.value("equalizer", json::object());
  reject_unknown(eq, {"trunk", "heads", "mlp_widths", "lstm_hidden_units", "memory_neighbors", "batch_size",
                      "learning_rates", "max_epochs", "patience", "polarization"},
                 "equalizer");
  try {
    c.trunk = nn::trunk_from_string(read<std::string>(eq, "trunk", "equalizer", "mlp"));
    const std::string heads = read<std::string>(eq, "heads", "equalizer", "both");
    if (heads == "both") {
      c.heads = {nn::HeadKind::Regression, nn::HeadKind::Classification};
    } else {
      c.heads = {nn::head_from_string(heads)};
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  c.mlp_widths = read(eq, "mlp_widths", "equalizer", desk_scale ? DeskDefaults::kMlpWidths : c.mlp_widths);
  c.lstm_hidden_units = read(eq, "lstm_hidden_units", "equalizer", desk_scale ? DeskDefaults::kLstmHidden : c.lstm_hidden_units);
  c.memory_neighbors = read(eq, "memory_neighbors", "equalizer", default_neighbors(c.link_preset));
  c.batch_size = read(eq, "batch_size", "equalizer", desk_scale ? DeskDefaults::kBatchSize : c.batch_size);
  c.learning_rates = read(eq, "learning_rates", "equalizer", c.learning_rates);
  c.max_epochs = read(eq, "max_epochs", "equalizer", desk_scale ? DeskDefaults::kMaxEpochs : c.max_epochs);
  c.patience = read(eq, "patience", "equalizer", desk_scale ? DeskDefaults::kPatience : c.patience);
  const std::string pol = read<std::string>(eq, "polarization", "equalizer", "x");
  if (pol != "x" && pol != "y") throw ConfigError("equalizer.polarization must be \"x\" or \"y\"");
  c.polarization = pol == "x" ? Polarization::X : Polarization::Y;
  if (c.memory_neighbors < 0) throw ConfigError("equalizer.memory_neighbors must be >= 0");

  if (!j.contains("seeds")) throw ConfigError("config: a 'seeds' block is required");
  const json& seeds = j.at("seeds");
  reject_unknown(seeds, {"data_train", "data_test", "init", "noise", "shuffle"}, "seeds");
  c.seeds = {read_seed(seeds, "data_train"), read_seed(seeds, "data_test"), read_seed(seeds, "init"),
             read_seed(seeds, "noise"), read_seed(seeds, "shuffle")};

  const json ds = j.value("dataset", json::object());
  reject_unknown(ds, {"train_symbols", "test_symbols", "frame_symbols", "guard_symbols"}, "dataset");
  c.train_symbols = read(ds, "train_symbols", "dataset", desk_scale ? DeskDefaults::kSymbols : c.train_symbols);
  c.test_symbols = read(ds, "test_symbols", "dataset", desk_scale ? DeskDefaults::kSymbols : c.test_symbols);
  c.frame_symbols = read(ds, "frame_symbols", "dataset", c.frame_symbols);
  c.guard_symbols = read(ds, "guard_symbols", "dataset", c.guard_symbols);

  const json tx = j.value("transmitter", json::object());
  reject_unknown(tx, {"symbol_rate_hz", "samples_per_symbol", "rrc_rolloff", "rrc_span_symbols"}, "transmitter");
  c.symbol_rate_hz = read(tx, "symbol_rate_hz", "transmitter", c.symbol_rate_hz);
  c.samples_per_symbol = read(tx, "samples_per_symbol", "transmitter", c.samples_per_symbol);
  c.rrc_rolloff = read(tx, "rrc_rolloff", "transmitter", c.rrc_rolloff);
  c.rrc_span_symbols = read(tx, "rrc_span_symbols", "transmitter", c.rrc_span_symbols);

  c.output_dir = read<std::string>(j, "output_dir", "config", c.output_dir);

  if (c.guard_symbols < static_cast<std::size_t>(c.rrc_span_symbols / 2)) {
    throw ConfigError("dataset.guard_symbols must cover half the RRC span");
  }
  if (c.frame_symbols <= 2 * c.guard_symbols + static_cast<std::size_t>(2 * c.memory_neighbors + 1)) {
    throw ConfigError("dataset.frame_symbols must exceed both guards plus the equalizer memory");
  }
  if (c.train_symbols == 0 || c.test_symbols == 0) throw ConfigError("dataset sizes must be positive");
  if (!(c.rrc_rolloff > 0.0 && c.rrc_rolloff <= 1.0) || c.rrc_span_symbols < 32 || c.rrc_span_symbols % 2 != 0) {
    throw ConfigError("transmitter: rolloff in (0,1] and an even rrc_span_symbols >= 32 are required");
  }
  if (c.samples_per_symbol < 1 || !(c.symbol_rate_hz > 0.0)) throw ConfigError("transmitter: bad rate settings");

  EqualizerSpec spec;
  spec.topology.trunk = c.trunk;
  spec.topology.mlp_widths = c.mlp_widths;
  spec.topology.lstm_hidden = c.lstm_hidden_units;
  spec.topology.memory = 2 * c.memory_neighbors + 1;
  spec.batch_size = c.batch_size;
  spec.learning_rates = c.learning_rates;
  spec.max_epochs = c.max_epochs;
  spec.patience = c.patience;
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, bool desk_scale) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(is, nullptr, true, true);  // comments allowed
  } catch (const json::parse_error& e) {
    throw ConfigError("config parse error in " + path.string() + ": " + e.what());
  }
  return parse_config(j, desk_scale);
}

json config_to_json(const ExperimentConfig& c) {
  json heads = json::array();
  for (auto h : c.heads) heads.push_back(nn::to_string(h));
  return {
      {"link",
       {{"preset", c.link_preset},
        {"alpha_db_per_km", c.link.fiber.alpha_db_per_km},
        {"dispersion_ps_nm_km", c.link.fiber.dispersion_ps_nm_km},
        {"gamma_per_w_km", c.link.fiber.gamma_per_w_km},
        {"span_length_km", c.link.fiber.length_km},
        {"step_km", c.link.fiber.step_km},
        {"n_spans", c.link.n_spans},
        {"amp_noise_figure_db", c.link.amp_noise_figure_db},
        {"center_wavelength_nm", c.link.center_wavelength_nm},
        {"ase_enabled", c.link.ase_enabled},
        {"manakov_factor", c.link.manakov_factor}}},
      {"modulation_orders", c.modulation_orders},
      {"launch_powers_dbm", c.launch_powers_dbm},
      {"equalizer",
       {{"trunk", nn::to_string(c.trunk)},
        {"heads", heads},
        {"mlp_widths", c.mlp_widths},
        {"lstm_hidden_units", c.lstm_hidden_units},
        {"memory_neighbors", c.memory_neighbors},
        {"batch_size", c.batch_size},
        {"learning_rates", c.learning_rates},
        {"max_epochs", c.max_epochs},
        {"patience", c.patience},
        {"polarization", c.polarization == Polarization::X ? "x" : "y"}}},
      {"seeds",
       {{"data_train", c.seeds.data_train},
        {"data_test", c.seeds.data_test},
        {"init", c.seeds.init},
        {"noise", c.seeds.noise},
        {"shuffle", c.seeds.shuffle}}},
      {"dataset",
       {{"train_symbols", c.train_symbols},
        {"test_symbols", c.test_symbols},
        {"frame_symbols", c.frame_symbols},
        {"guard_symbols", c.guard_symbols}}},
      {"transmitter",
       {{"symbol_rate_hz", c.symbol_rate_hz},
        {"samples_per_symbol", c.samples_per_symbol},
        {"rrc_rolloff", c.rrc_rolloff},
        {"rrc_span_symbols", c.rrc_span_symbols}}},
  };
}

std::string config_hash(const ExperimentConfig& c) {
  const std::string s = config_to_json(c).dump();
  const auto h = fnv1a64(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void override_seeds(ExperimentConfig& c, std::uint64_t master) {
  c.seeds = {mix_seed(master, 11), mix_seed(master, 12), mix_seed(master, 13), mix_seed(master, 14),
             mix_seed(master, 15)};
}

}  // namespace fq
