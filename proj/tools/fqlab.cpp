// fqlab: simulate, train, evaluate and sweep fiber-equalizer experiments.
#include <CLI11.hpp>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "fq/config.hpp"
#include "fq/equalizer.hpp"
#include "fq/experiment.hpp"
#include "fq/figures.hpp"
#include "fq/frame_io.hpp"
#include "fq/selftest.hpp"

namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kInvalid = 1, kRuntime = 2, kSelftest = 3 };

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed_override;
  std::string out;
  bool desk_scale = false;
  std::string figure;
};

fq::ExperimentConfig load(const Options& o) {
  if (o.config.empty()) throw fq::ConfigError("--config is required for this subcommand");
  fq::ExperimentConfig cfg = fq::load_config(o.config, o.desk_scale);
  if (o.seed_override) fq::override_seeds(cfg, *o.seed_override);
  return cfg;
}

fs::path out_dir(const Options& o, const fq::ExperimentConfig* cfg) {
  if (!o.out.empty()) return o.out;
  return cfg ? fs::path(cfg->output_dir) : fs::path("out");
}

fq::RunRecord read_record(const fs::path& dir) {
  const auto bytes = fq::read_file(dir / "record.json");
  return fq::record_from_json(nlohmann::json::parse(bytes.begin(), bytes.end()));
}

void write_figures(const fq::RunRecord& r, const fs::path& dir) {
  for (const char* fig : {"fig4", "fig5", "fig6"}) {
    try {
      for (const auto& p : fq::emit_figure_data(r, fig, dir / "figures")) std::cerr << "wrote " << p.string() << "\n";
    } catch (const std::invalid_argument& e) {
      std::cerr << "skipping " << fig << ": " << e.what() << "\n";
    }
  }
}

int cmd_simulate(const Options& o) {
  const auto cfg = load(o);
  const fs::path dir = out_dir(o, &cfg) / "cache";
  for (int order : cfg.modulation_orders) {
    for (double p : cfg.launch_powers_dbm) {
      const std::string name = fq::point_dir_name(order, p);
      std::cerr << "simulating " << name << "\n";
      const fq::PointData pt = fq::simulate_point(cfg, order, p);
      if (pt.train.aliasing_warning || pt.test.aliasing_warning) {
        std::cerr << "warning: " << name << " spectrum approaches the simulation band edge\n";
      }
      fq::save_point(dir / name, pt);
    }
  }
  return kOk;
}

int cmd_train(const Options& o, bool require_cache) {
  const auto cfg = load(o);
  const fs::path dir = out_dir(o, &cfg);
  if (require_cache) {
    for (int order : cfg.modulation_orders) {
      for (double p : cfg.launch_powers_dbm) {
        const auto pt = dir / "cache" / fq::point_dir_name(order, p) / "point.json";
        if (!fs::exists(pt)) throw std::runtime_error("missing cached point " + pt.string() + " (run simulate first)");
      }
    }
  }
  fs::create_directories(dir / "models");
  fq::ExperimentOptions eo;
  eo.cache_dir = dir / "cache";
  eo.models_dir = dir / "models";
  eo.log = &std::cerr;
  const fq::RunRecord r = fq::run_experiment(cfg, eo);
  fq::write_outputs(r, dir);
  if (!require_cache) write_figures(r, dir);
  std::cerr << "wrote " << (dir / "results.csv").string() << "\n";
  return kOk;
}

int cmd_evaluate(const Options& o) {
  const auto cfg = load(o);
  const fs::path dir = out_dir(o, &cfg);
  std::string csv = "mf,launch_power_dbm,head,test_q_db,test_ber,test_ser,test_evm_db,test_mi_bits,mi_method,q_flag\n";
  for (int order : cfg.modulation_orders) {
    for (double p : cfg.launch_powers_dbm) {
      const std::string name = fq::point_dir_name(order, p);
      const fq::PointData pt = fq::load_point(dir / "cache" / name);
      const auto test_ds = fq::windowed_from(pt.test, cfg.memory_neighbors, cfg.polarization);
      for (auto head : cfg.heads) {
        const auto path = dir / "models" / (name + "_" + fq::nn::to_string(head) + ".fqck");
        const fq::EqualizerModel m = fq::load_model(path);
        const fq::Evaluation ev = fq::evaluate(m.net, test_ds);
        char buf[512];
        std::snprintf(buf, sizeof buf, "%d,%g,%s,%.6f,%.6e,%.6e,%.4f,%.6f,%s,%s\n", order, p,
                      fq::nn::to_string(head).c_str(), fq::q_db_for_table(ev.metrics.q), ev.metrics.ber,
                      ev.metrics.ser, ev.metrics.evm_db, ev.metrics.mi_bits,
                      fq::mi_method_name(ev.metrics.method).c_str(), fq::q_flag_name(ev.metrics.q.flag).c_str());
        csv += buf;
        std::cout << buf;
      }
    }
  }
  fq::write_text_atomic(dir / "evaluation.csv", csv);
  return kOk;
}

int cmd_figure(const Options& o) {
  std::optional<fq::ExperimentConfig> cfg;
  if (!o.config.empty()) cfg = load(o);
  const fs::path dir = out_dir(o, cfg ? &*cfg : nullptr);
  const fq::RunRecord r = read_record(dir);
  if (o.figure.empty()) {
    write_figures(r, dir);
    return kOk;
  }
  for (const auto& p : fq::emit_figure_data(r, o.figure, dir / "figures")) std::cout << p.string() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fqlab: fiber-channel neural equalizer experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  std::uint64_t seed = 0;
  app.add_option("--config", o.config, "Experiment config file (JSON)");
  auto* seed_opt = app.add_option("--seed-override", seed, "Derive every seed from this value");
  app.add_option("--out", o.out, "Output directory (default: output_dir from the config)");
  app.add_flag("--desk-scale", o.desk_scale, "Use desk-scale defaults for keys the config leaves unset");
  auto* sim = app.add_subcommand("simulate", "Simulate Tx->Rx symbol frames into <out>/cache");
  auto* trn = app.add_subcommand("train", "Train and select models from cached frames");
  auto* evl = app.add_subcommand("evaluate", "Evaluate saved models on cached test frames");
  auto* swp = app.add_subcommand("sweep", "Run the full experiment and write CSV and plot data");
  auto* fig = app.add_subcommand("figure", "Write plot data from <out>/record.json");
  fig->add_option("--figure", o.figure, "fig4, fig5 or fig6 (default: all available)");
  auto* st = app.add_subcommand("selftest", "Run the invariant suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kInvalid;
  }
  if (seed_opt->count() > 0) o.seed_override = seed;

  try {
    if (*st) return fq::report_selftest(fq::run_selftest(), std::cout) ? kOk : kSelftest;
    if (*sim) return cmd_simulate(o);
    if (*trn) return cmd_train(o, true);
    if (*swp) return cmd_train(o, false);
    if (*evl) return cmd_evaluate(o);
    if (*fig) return cmd_figure(o);
  } catch (const fq::ConfigError& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return kInvalid;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const fq::IndependenceError& e) {
    std::cerr << "aborted: " << e.what() << "\n";
    return kRuntime;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return kRuntime;
  }
  return kInvalid;
}
