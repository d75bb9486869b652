#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fq/config.hpp"
#include "fq/experiment.hpp"
#include "fq/figures.hpp"
#include "fq/frame_io.hpp"
#include "fq/metrics.hpp"
#include "fq/rx_dsp.hpp"

using namespace fq;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json tiny_config() {
  return json::parse(R"({
    "link": {"preset": "ssmf_5x100", "n_spans": 1, "span_length_km": 20, "step_km": 2},
    "modulation_orders": [16, 32],
    "launch_powers_dbm": [-2.0, 2.0],
    "equalizer": {"trunk": "mlp", "heads": "both", "mlp_widths": [8, 4, 8], "memory_neighbors": 2,
                  "batch_size": 128, "learning_rates": [0.01, 0.003], "max_epochs": 3, "patience": 1},
    "seeds": {"data_train": 1, "data_test": 2, "init": 3, "noise": 4, "shuffle": 5},
    "dataset": {"train_symbols": 2048, "test_symbols": 2048, "frame_symbols": 2176, "guard_symbols": 64},
    "output_dir": "unused"
  })");
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("fqlab_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_config(const fs::path& dir, const json& j) {
  const fs::path p = dir / "exp.cfg";
  std::ofstream(p) << j.dump(2);
  return p;
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(FQLAB_BIN) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config parsing, validation and presets") {
  const ExperimentConfig c = parse_config(tiny_config(), false);
  CHECK(c.link.n_spans == 1);
  CHECK(c.link.fiber.length_km == 20.0);
  CHECK(c.link.fiber.gamma_per_w_km == 1.2);
  CHECK(c.memory_neighbors == 2);
  CHECK(c.heads.size() == 2);
  CHECK(c.learning_rates == std::vector<double>{0.01, 0.003});

  json bad = tiny_config();
  bad["link"]["colour"] = "blue";
  CHECK_THROWS_AS(parse_config(bad, false), ConfigError);
  bad = tiny_config();
  bad["seeds"].erase("noise");
  CHECK_THROWS_AS(parse_config(bad, false), ConfigError);
  bad = tiny_config();
  bad["link"]["preset"] = "lab_bench";
  CHECK_THROWS_AS(parse_config(bad, false), ConfigError);
  bad = tiny_config();
  bad["link"]["manakov_factor"] = 0.5;
  CHECK_THROWS_AS(parse_config(bad, false), ConfigError);
  bad = tiny_config();
  bad["equalizer"]["patience"] = 3;
  CHECK_THROWS_AS(parse_config(bad, false), ConfigError);
  bad = tiny_config();
  bad["dataset"]["guard_symbols"] = 8;
  CHECK_THROWS_AS(parse_config(bad, false), ConfigError);
}

TEST_CASE("desk scale fills only unset keys and presets pick the memory") {
  json j = tiny_config();
  j["equalizer"].erase("mlp_widths");
  j["equalizer"].erase("memory_neighbors");
  j["dataset"].erase("train_symbols");
  const ExperimentConfig c = parse_config(j, true);
  CHECK(c.mlp_widths == DeskDefaults::kMlpWidths);
  CHECK(c.train_symbols == DeskDefaults::kSymbols);
  CHECK(c.test_symbols == 2048);
  CHECK(c.memory_neighbors == 25);
  CHECK(default_neighbors("twc_9x50") == 20);
  const ExperimentConfig full = parse_config(j, false);
  CHECK(full.mlp_widths == std::array<int, 3>{481, 31, 263});
  CHECK(full.train_symbols == (std::size_t{1} << 18));
}

TEST_CASE("config hash is stable under key reordering and changes with content") {
  const json a = tiny_config();
  const json b = json::parse(R"({
    "output_dir": "elsewhere",
    "seeds": {"shuffle": 5, "noise": 4, "init": 3, "data_test": 2, "data_train": 1},
    "dataset": {"guard_symbols": 64, "frame_symbols": 2176, "test_symbols": 2048, "train_symbols": 2048},
    "equalizer": {"patience": 1, "max_epochs": 3, "learning_rates": [0.01, 0.003], "batch_size": 128,
                  "memory_neighbors": 2, "mlp_widths": [8, 4, 8], "heads": "both", "trunk": "mlp"},
    "launch_powers_dbm": [-2.0, 2.0],
    "modulation_orders": [16, 32],
    "link": {"step_km": 2, "span_length_km": 20, "n_spans": 1, "preset": "ssmf_5x100"}
  })");
  CHECK(config_hash(parse_config(a, false)) == config_hash(parse_config(b, false)));
  ExperimentConfig c = parse_config(a, false);
  override_seeds(c, 99);
  CHECK(config_hash(c) != config_hash(parse_config(a, false)));
  CHECK(c.seeds.data_train != c.seeds.data_test);
}

TEST_CASE("identical train and test seeds abort with correlation 1") {
  json j = tiny_config();
  j["seeds"]["data_test"] = 1;
  j["dataset"]["train_symbols"] = 1 << 14;
  j["dataset"]["test_symbols"] = 1 << 14;
  const ExperimentConfig c = parse_config(j, false);
  try {
    check_seeds_independent(c, 16);
    FAIL("expected IndependenceError");
  } catch (const IndependenceError& e) {
    CHECK(e.correlation() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::string(e.what()).find("1.000000") != std::string::npos);
  }
  j["seeds"]["data_test"] = 2;
  j["dataset"]["train_symbols"] = 1 << 16;
  j["dataset"]["test_symbols"] = 1 << 16;
  CHECK(check_seeds_independent(parse_config(j, false), 16) <= kIndependenceThreshold);
}

TEST_CASE("simulated datasets are aligned and normalized") {
  const ExperimentConfig c = parse_config(tiny_config(), false);
  const SimulatedData d = simulate_dataset(c, 16, 0.0, 7, 8, 4096);
  CHECK(d.tx.size() == 4096);
  CHECK(d.rx.size() == 4096);
  CHECK(d.segments == std::vector<std::size_t>{2048, 2048});
  // Short link at 0 dBm: the Regular DSP output decides without errors.
  const auto alphabet = build_alphabet(16);
  CHECK(hard_decision(d.rx, alphabet).bits == demap_frame(d.tx, alphabet));
  CHECK(evm_db(d.rx.syms_x, d.tx.syms_x) < -15.0);
  // The whole sequence is already normalized: refitting changes nothing.
  const auto again = normalize_to_reference(d.rx, d.tx);
  CHECK(std::abs(again.scale[0] - 1.0) < 1e-9);
  const WindowedDataset ds = windowed_from(d, 2, Polarization::X);
  CHECK(ds.rows() == 2 * (2048 - 4));
  CHECK(transmitted_payload(c, 16, 7, 4096).syms_x == d.tx.syms_x);
}

TEST_CASE("learning-rate selection") {
  RunResult a, b, c;
  a.report.best_epoch = b.report.best_epoch = c.report.best_epoch = 1;
  a.lr = 1e-3;
  a.report.best_test_q = 9.0;
  b.lr = 1e-4;
  b.report.best_test_q = 9.5;
  c.lr = 5e-4;
  c.report.best_test_q = 9.5;
  CHECK(select_best_run({&a, &b, &c}) == 2);
  c.diverged = true;
  CHECK(select_best_run({&a, &b, &c}) == 1);
  a.diverged = b.diverged = true;
  CHECK(select_best_run({&a, &b, &c}) == static_cast<std::size_t>(-1));
}

TEST_CASE("worker pool covers every index and rethrows") {
  std::vector<int> hit(50, 0);
  parallel_for(50, 3, [&](std::size_t i) { hit[i] += 1; });
  CHECK(std::all_of(hit.begin(), hit.end(), [](int v) { return v == 1; }));
  CHECK_THROWS_AS(parallel_for(10, 2, [](std::size_t i) { if (i == 4) throw std::runtime_error("x"); }),
                  std::runtime_error);
  CHECK(worker_count(2) == 2);
}

TEST_CASE("empty record produces no figure files") {
  RunRecord r;
  const fs::path dir = scratch("empty_fig");
  CHECK_THROWS_AS(emit_figure_data(r, "fig5", dir / "figures"), std::invalid_argument);
  CHECK_FALSE(fs::exists(dir / "figures"));
  CHECK_THROWS_AS(figure_tables(r, "fig9"), std::invalid_argument);
}

TEST_CASE("CLI: selftest, missing config and unknown flag") {
  const fs::path dir = scratch("cli_basic");
  CHECK(run_cli("selftest", dir / "log") == 0);
  CHECK(run_cli("--config " + (dir / "missing.cfg").string() + " sweep", dir / "log") == 1);
  CHECK(slurp(dir / "log").find("missing.cfg") != std::string::npos);
  CHECK(run_cli("--frobnicate selftest", dir / "log") == 1);
  CHECK(slurp(dir / "log").find("Usage") != std::string::npos);
  json j = tiny_config();
  j["equalizer"]["batch_size"] = 0;
  CHECK(run_cli("--config " + write_config(dir, j).string() + " sweep --out " + (dir / "o").string(), dir / "log") == 1);
  j = tiny_config();
  j["seeds"]["data_test"] = 1;
  j["dataset"]["train_symbols"] = 1 << 14;
  j["dataset"]["test_symbols"] = 1 << 14;
  CHECK(run_cli("--config " + write_config(dir, j).string() + " sweep --out " + (dir / "o").string(), dir / "log") == 2);
  CHECK(slurp(dir / "log").find("1.000000") != std::string::npos);
}

TEST_CASE("end-to-end sweep: outputs, figures, baseline, fairness and determinism") {
  const fs::path dir = scratch("e2e");
  const fs::path cfg = write_config(dir, tiny_config());
  REQUIRE(run_cli("--config " + cfg.string() + " sweep --out " + (dir / "a").string(), dir / "log_a") == 0);
  REQUIRE(run_cli("--config " + cfg.string() + " sweep --out " + (dir / "b").string(), dir / "log_b") == 0);

  for (const char* f : {"results.csv", "lr_sweep.csv", "record.json"}) {
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
  CHECK(fs::exists(dir / "a" / "timing.json"));
  const std::string results = slurp(dir / "a" / "results.csv");
  CHECK(results.rfind("mf,launch_power_dbm,trunk,head,lr,", 0) == 0);
  // 2 orders x 2 powers x (2 heads + baseline) rows
  CHECK(std::count(results.begin(), results.end(), '\n') == 1 + 12);
  const std::string sweep = slurp(dir / "a" / "lr_sweep.csv");
  CHECK(std::count(sweep.begin(), sweep.end(), '\n') == 1 + 16);

  for (const char* f : {"fig4_q_p-2.csv", "fig4_mi_p2.csv", "fig5_q_mf16.csv", "fig5_mi_mf32.csv"}) {
    CHECK(fs::exists(dir / "a" / "figures" / f));
  }
  const std::string fig5 = slurp(dir / "a" / "figures" / "fig5_q_mf16.csv");
  CHECK(fig5.rfind("launch_power_dbm,regression_test,classification_test,regression_train,classification_train,regular_dsp", 0) == 0);
  int fig6 = 0;
  for (const auto& e : fs::directory_iterator(dir / "a" / "figures")) fig6 += e.path().filename().string().rfind("fig6_", 0) == 0;
  CHECK(fig6 == 8);

  const auto bytes = read_file(dir / "a" / "record.json");
  const RunRecord rec = record_from_json(json::parse(bytes.begin(), bytes.end()));
  CHECK(rec.runs.size() == 16);
  CHECK(rec.selected.size() == 8);
  CHECK(rec.baselines.size() == 4);
  CHECK(json::parse(slurp(dir / "a" / "record.json")) == record_to_json(rec));

  // Paired runs: identical inputs and trunk initialisation for both heads.
  CHECK(rec.fairness.dump().find("\"paired\":true") != std::string::npos);

  // Cached simulate -> train -> evaluate path agrees with the sweep.
  const fs::path c2 = dir / "c";
  REQUIRE(run_cli("--config " + cfg.string() + " simulate --out " + c2.string(), dir / "log_c") == 0);
  REQUIRE(run_cli("--config " + cfg.string() + " train --out " + c2.string(), dir / "log_c") == 0);
  CHECK(slurp(c2 / "results.csv") == results);
  // Baseline equals metrics on the normalized CDC output recomputed from the cache.
  const ExperimentConfig c = parse_config(tiny_config(), false);
  const PointData pt = load_point(c2 / "cache" / point_dir_name(16, 2.0));
  const WindowedDataset test_ds = windowed_from(pt.test, c.memory_neighbors, c.polarization);
  const DatasetMetrics base = baseline_metrics(test_ds);
  for (const auto& b : rec.baselines) {
    if (b.order == 16 && b.power_dbm == 2.0) {
      CHECK(b.test.report.ber == base.report.ber);
      CHECK(b.test.mi_gaussian == base.mi_gaussian);
    }
  }

  REQUIRE(run_cli("--config " + cfg.string() + " evaluate --out " + c2.string(), dir / "log_c") == 0);
  const std::string eval = slurp(c2 / "evaluation.csv");
  CHECK(std::count(eval.begin(), eval.end(), '\n') == 1 + 8);
  REQUIRE(run_cli("--out " + (dir / "a").string() + " figure --figure fig5", dir / "log_f") == 0);

  // Thread count does not change any output.
  const std::string threaded = "FQ_THREADS=2 ";
  const int st = std::system((threaded + FQLAB_BIN + " --config " + cfg.string() + " sweep --out " +
                              (dir / "t").string() + " > " + (dir / "log_t").string() + " 2>&1").c_str());
  REQUIRE(WEXITSTATUS(st) == 0);
  CHECK(slurp(dir / "t" / "results.csv") == results);
  CHECK(slurp(dir / "t" / "record.json") == slurp(dir / "a" / "record.json"));
  fs::remove_all(dir);
}
