#include "fq/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <limits>
#include <map>
#include <thread>

#include "fq/fiber.hpp"
#include "fq/frame_io.hpp"
#include "fq/rx_dsp.hpp"
#include "fq/signal.hpp"

namespace fq {
namespace {

using nlohmann::json;

RrcConfig rrc_of(const ExperimentConfig& cfg) {
  return {.sps = cfg.samples_per_symbol, .rolloff = cfg.rrc_rolloff, .span_symbols = cfg.rrc_span_symbols};
}

SymbolFrame frame_symbols(const ExperimentConfig& cfg, const QamAlphabet& alphabet, std::uint64_t data_seed,
                          std::size_t f, std::size_t payload) {
  const std::size_t total = payload + 2 * cfg.guard_symbols;
  const Bits bits = generate_bits(2 * total * static_cast<std::size_t>(alphabet.bits_per_symbol()),
                                  mix_seed(data_seed, f));
  SymbolFrame tx = map_symbols(bits, alphabet);
  tx.symbol_rate = cfg.symbol_rate_hz;
  return tx;
}

void append_slice(SymbolFrame& dst, const SymbolFrame& src, std::size_t begin, std::size_t count) {
  for (auto p : {Polarization::X, Polarization::Y}) {
    const auto b = src.pol(p).begin() + static_cast<std::ptrdiff_t>(begin);
    dst.pol(p).insert(dst.pol(p).end(), b, b + static_cast<std::ptrdiff_t>(count));
  }
}

SymbolFrame slice(const SymbolFrame& src, std::size_t begin, std::size_t count) {
  SymbolFrame out;
  out.order = src.order;
  out.role = src.role;
  out.symbol_rate = src.symbol_rate;
  append_slice(out, src, begin, count);
  return out;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

QFactor q_from_table(double v, const std::string& flag) {
  if (flag == "+inf") return {std::numeric_limits<double>::infinity(), QFlag::PlusInfinity};
  if (flag == "-inf") return {-std::numeric_limits<double>::infinity(), QFlag::MinusInfinity};
  return {v, QFlag::Finite};
}

json num_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double num_from(const json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

json metrics_to_json(const DatasetMetrics& m) {
  return {{"ber", m.report.ber},
          {"ser", m.report.ser},
          {"q_db", q_db_for_table(m.report.q)},
          {"q_flag", q_flag_name(m.report.q.flag)},
          {"evm_db", num_or_null(m.report.evm_db)},
          {"mi_bits", m.report.mi_bits},
          {"mi_method", mi_method_name(m.report.method)},
          {"mi_gaussian_bits", m.mi_gaussian},
          {"mi_cel_bits", num_or_null(m.mi_cel)},
          {"n_symbols", m.report.n_symbols}};
}

DatasetMetrics metrics_from_json(const json& j) {
  DatasetMetrics m;
  m.report.ber = j.at("ber").get<double>();
  m.report.ser = j.at("ser").get<double>();
  m.report.q = q_from_table(j.at("q_db").get<double>(), j.at("q_flag").get<std::string>());
  m.report.evm_db = num_from(j.at("evm_db"));
  m.report.mi_bits = j.at("mi_bits").get<double>();
  const auto method = j.at("mi_method").get<std::string>();
  m.report.method = method == "classification-CEL" ? MiMethod::ClassificationCel
                    : method == "hard-decision"     ? MiMethod::HardDecision
                                                    : MiMethod::GaussianLowerBound;
  m.mi_gaussian = j.at("mi_gaussian_bits").get<double>();
  m.mi_cel = num_from(j.at("mi_cel_bits"));
  m.report.n_symbols = j.at("n_symbols").get<std::size_t>();
  return m;
}

DatasetMetrics from_evaluation(const Evaluation& ev) { return {ev.metrics, ev.mi_gaussian, ev.mi_cel}; }

json frame_segments_json(const SimulatedData& d) {
  return {{"segments", d.segments}, {"aliasing_warning", d.aliasing_warning}};
}

std::uint64_t hash_indices(const std::vector<std::size_t>& v) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(v.size() * 8);
  for (std::uint64_t x : v) {
    for (int b = 0; b < 8; ++b) bytes.push_back(static_cast<std::uint8_t>(x >> (8 * b)));
  }
  return fnv1a64(bytes);
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void log_line(const ExperimentOptions& o, const std::string& s) {
  if (o.log) *o.log << s << std::endl;
}

}  // namespace

IndependenceError::IndependenceError(double corr)
    : std::runtime_error("train/test sequences are correlated: max normalized cross-correlation " +
                         fmt("%.6f", corr) + " exceeds " + fmt("%.2f", kIndependenceThreshold)),
      corr_(corr) {}

SymbolFrame transmitted_payload(const ExperimentConfig& cfg, int order, std::uint64_t data_seed,
                                std::size_t n_symbols) {
  const auto alphabet = QamAlphabet::build(order);
  SymbolFrame out;
  out.order = order;
  out.symbol_rate = cfg.symbol_rate_hz;
  std::size_t left = n_symbols;
  for (std::size_t f = 0; left > 0; ++f) {
    const std::size_t payload = std::min(left, cfg.frame_symbols - 2 * cfg.guard_symbols);
    append_slice(out, frame_symbols(cfg, alphabet, data_seed, f, payload), cfg.guard_symbols, payload);
    left -= payload;
  }
  return out;
}

SimulatedData simulate_dataset(const ExperimentConfig& cfg, int order, double power_dbm, std::uint64_t data_seed,
                               std::uint64_t noise_seed, std::size_t n_symbols) {
  const auto alphabet = QamAlphabet::build(order);
  const RrcConfig rrc = rrc_of(cfg);
  const auto edge = static_cast<std::size_t>(matched_filter_edge_symbols(rrc));
  SimulatedData d;
  d.tx.order = d.rx.order = order;
  d.tx.symbol_rate = d.rx.symbol_rate = cfg.symbol_rate_hz;
  d.rx.role = FrameRole::Received;
  std::size_t left = n_symbols;
  for (std::size_t f = 0; left > 0; ++f) {
    const std::size_t payload = std::min(left, cfg.frame_symbols - 2 * cfg.guard_symbols);
    const SymbolFrame tx = frame_symbols(cfg, alphabet, data_seed, f, payload);
    const SignalFrame launched = set_launch_power(rrc_shape(tx, rrc), power_dbm);
    LinkSpec link = cfg.link;
    link.noise_seed = mix_seed(noise_seed, f);
    auto [out, trace] = propagate_link(launched, link, false);
    d.aliasing_warning = d.aliasing_warning || trace.aliasing_warning;
    const SymbolFrame rx = matched_filter_downsample(cdc(out, link.total_beta2_l()), rrc, order);
    append_slice(d.tx, tx, cfg.guard_symbols, payload);
    append_slice(d.rx, rx, cfg.guard_symbols - edge, payload);
    d.segments.push_back(payload);
    left -= payload;
  }
  d.rx = normalize_to_reference(d.rx, d.tx).frame;
  return d;
}

WindowedDataset windowed_from(const SimulatedData& d, int neighbors, Polarization pol) {
  std::vector<WindowedDataset> parts;
  std::size_t begin = 0;
  for (std::size_t len : d.segments) {
    // A trailing frame too short for one window contributes no rows.
    if (len > static_cast<std::size_t>(2 * neighbors + 1)) {
      parts.push_back(build_dataset(slice(d.rx, begin, len), slice(d.tx, begin, len), neighbors, pol));
    }
    begin += len;
  }
  if (parts.empty()) throw std::invalid_argument("dataset shorter than the equalizer memory");
  return concat_datasets(parts);
}

double check_seeds_independent(const ExperimentConfig& cfg, int order) {
  const std::size_t n = std::min(cfg.train_symbols, cfg.test_symbols);
  if (n < (std::size_t{1} << 14)) return -1.0;
  const SymbolFrame a = transmitted_payload(cfg, order, cfg.seeds.data_train, n);
  const SymbolFrame b = transmitted_payload(cfg, order, cfg.seeds.data_test, n);
  const double corr = check_dataset_independence(a, b);
  if (corr > kIndependenceThreshold) throw IndependenceError(corr);
  return corr;
}

std::string point_dir_name(int order, double power_dbm) { return "mf" + std::to_string(order) + "_p" + fmt("%g", power_dbm); }

PointData simulate_point(const ExperimentConfig& cfg, int order, double power_dbm) {
  PointData p;
  p.order = order;
  p.power_dbm = power_dbm;
  p.independence = check_seeds_independent(cfg, order);
  const std::uint64_t noise = mix_seed(cfg.seeds.noise, static_cast<std::uint64_t>(order));
  p.train = simulate_dataset(cfg, order, power_dbm, cfg.seeds.data_train, mix_seed(noise, 1), cfg.train_symbols);
  p.test = simulate_dataset(cfg, order, power_dbm, cfg.seeds.data_test, mix_seed(noise, 2), cfg.test_symbols);
  return p;
}

void save_point(const std::filesystem::path& dir, const PointData& p) {
  std::filesystem::create_directories(dir);
  save_frame(dir / "train_tx.fqsf", to_container(p.train.tx));
  save_frame(dir / "train_rx.fqsf", to_container(p.train.rx));
  save_frame(dir / "test_tx.fqsf", to_container(p.test.tx));
  save_frame(dir / "test_rx.fqsf", to_container(p.test.rx));
  const json meta = {{"order", p.order},
                     {"launch_power_dbm", p.power_dbm},
                     {"independence", p.independence},
                     {"train", frame_segments_json(p.train)},
                     {"test", frame_segments_json(p.test)}};
  write_text_atomic(dir / "point.json", meta.dump(2) + "\n");
}

PointData load_point(const std::filesystem::path& dir) {
  const auto bytes = read_file(dir / "point.json");
  const json meta = json::parse(bytes.begin(), bytes.end());
  PointData p;
  p.order = meta.at("order").get<int>();
  p.power_dbm = meta.at("launch_power_dbm").get<double>();
  p.independence = meta.at("independence").get<double>();
  auto load = [&](const std::string& name, const json& m) {
    SimulatedData d;
    d.tx = to_symbol_frame(load_frame(dir / (name + "_tx.fqsf")));
    d.rx = to_symbol_frame(load_frame(dir / (name + "_rx.fqsf")));
    d.segments = m.at("segments").get<std::vector<std::size_t>>();
    d.aliasing_warning = m.at("aliasing_warning").get<bool>();
    std::size_t total = 0;
    for (auto s : d.segments) total += s;
    if (total != d.tx.size() || d.tx.size() != d.rx.size()) throw std::runtime_error("cache: inconsistent point " + dir.string());
    return d;
  };
  p.train = load("train", meta.at("train"));
  p.test = load("test", meta.at("test"));
  return p;
}

DatasetMetrics baseline_metrics(const WindowedDataset& ds) {
  const auto alphabet = QamAlphabet::build(ds.order);
  const std::vector<int> dec = decide_classes(ds.center_received, alphabet);
  const ErrorRates er =
      ber_ser(bits_of_classes(dec, alphabet), bits_of_classes(ds.labels, alphabet), dec, ds.labels);
  DatasetMetrics m;
  m.report.ber = er.ber;
  m.report.ser = er.ser;
  m.report.q = q_factor_from_ber(er.ber);
  m.report.evm_db = evm_db(ds.center_received, ds.target_symbols);
  m.report.n_symbols = ds.rows();
  m.mi_gaussian = mi_gaussian_lower_bound(ds.center_received, ds.labels, ds.order).bits;
  m.report.mi_bits = m.mi_gaussian;
  m.report.method = MiMethod::GaussianLowerBound;
  return m;
}

std::size_t select_best_run(const std::vector<const RunResult*>& runs) {
  std::size_t best = static_cast<std::size_t>(-1);
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const RunResult& r = *runs[i];
    if (r.diverged || r.report.best_epoch < 0) continue;
    if (best == static_cast<std::size_t>(-1)) {
      best = i;
      continue;
    }
    const RunResult& b = *runs[best];
    if (r.report.best_test_q > b.report.best_test_q ||
        (r.report.best_test_q == b.report.best_test_q && r.lr > b.lr)) {
      best = i;
    }
  }
  return best;
}

int worker_count(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("FQ_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto k = static_cast<std::size_t>(std::max(1, workers));
  if (k == 1 || n <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(k, n); ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

RunRecord run_experiment(const ExperimentConfig& cfg, const ExperimentOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.config_hash = config_hash(cfg);
  rec.config = config_to_json(cfg);
  rec.fairness = json::array();
  const int workers = worker_count(opts.threads);

  for (int order : cfg.modulation_orders) {
    for (double power : cfg.launch_powers_dbm) {
      const std::string name = point_dir_name(order, power);
      PointData pt;
      const auto cached = opts.cache_dir / name;
      if (!opts.cache_dir.empty() && std::filesystem::exists(cached / "point.json")) {
        log_line(opts, "loading " + name + " from cache");
        pt = load_point(cached);
      } else {
        log_line(opts, "simulating " + name);
        pt = simulate_point(cfg, order, power);
      }
      if (pt.train.aliasing_warning || pt.test.aliasing_warning) {
        log_line(opts, "warning: " + name + " spectrum approaches the simulation band edge");
      }
      const WindowedDataset train_ds = windowed_from(pt.train, cfg.memory_neighbors, cfg.polarization);
      const WindowedDataset test_ds = windowed_from(pt.test, cfg.memory_neighbors, cfg.polarization);

      BaselineResult base{order, power, baseline_metrics(train_ds), baseline_metrics(test_ds)};
      rec.baselines.push_back(base);

      struct Job {
        nn::HeadKind head;
        double lr;
      };
      std::vector<Job> jobs;
      for (auto head : cfg.heads) {
        for (double lr : cfg.learning_rates) jobs.push_back({head, lr});
      }
      std::vector<RunResult> results(jobs.size());
      std::vector<EqualizerModel> models(jobs.size());
      parallel_for(jobs.size(), workers, [&](std::size_t i) {
        EqualizerSpec spec;
        spec.topology.trunk = cfg.trunk;
        spec.topology.mlp_widths = cfg.mlp_widths;
        spec.topology.lstm_hidden = cfg.lstm_hidden_units;
        spec.topology.head = jobs[i].head;
        spec.topology.n_classes = order;
        spec.topology.memory = 2 * cfg.memory_neighbors + 1;
        spec.batch_size = cfg.batch_size;
        spec.learning_rates = cfg.learning_rates;
        spec.max_epochs = cfg.max_epochs;
        spec.patience = cfg.patience;
        RunResult& r = results[i];
        r.order = order;
        r.power_dbm = power;
        r.head = jobs[i].head;
        r.lr = jobs[i].lr;
        EqualizerModel m = build_model(spec, cfg.seeds.init);
        r.initial_trunk = trunk_fingerprint(m.net);
        r.first_epoch_order = hash_indices(epoch_order(cfg.seeds.shuffle, train_ds.rows(), 0));
        try {
          r.report = train(m, train_ds, test_ds, {.lr = r.lr, .shuffle_seed = cfg.seeds.shuffle, .pause_after = {}});
        } catch (const TrainingDiverged& e) {
          r.report = e.report();
          r.diverged = true;
        }
        r.report.lr = r.lr;
        if (!r.diverged) {
          r.train = from_evaluation(evaluate(m.net, train_ds));
          r.test = from_evaluation(evaluate(m.net, test_ds));
        }
        models[i] = std::move(m);
      });

      std::map<std::string, json> heads_fair;
      for (auto head : cfg.heads) {
        std::vector<const RunResult*> group;
        std::vector<std::size_t> where;
        for (std::size_t i = 0; i < jobs.size(); ++i) {
          if (jobs[i].head == head) {
            group.push_back(&results[i]);
            where.push_back(i);
          }
        }
        const std::size_t b = select_best_run(group);
        for (const RunResult* r : group) {
          log_line(opts, name + " " + nn::to_string(head) + " lr=" + fmt("%g", r->lr) +
                             (r->diverged ? " diverged" : " best test Q " + fmt("%.3f", r->report.best_test_q) +
                                                              " dB at epoch " + std::to_string(r->report.best_epoch)));
        }
        if (b == static_cast<std::size_t>(-1)) {
          log_line(opts, name + " " + nn::to_string(head) + ": every learning rate diverged");
          continue;
        }
        rec.selected.push_back(rec.runs.size() + where[b]);
        if (!opts.models_dir.empty()) {
          save_model(opts.models_dir / (name + "_" + nn::to_string(head) + ".fqck"), models[where[b]]);
        }
        heads_fair[nn::to_string(head)] = {{"initial_trunk", hex64(results[where[b]].initial_trunk)},
                                           {"first_epoch_order", hex64(results[where[b]].first_epoch_order)}};
      }
      bool paired = true;
      for (std::size_t i = 1; i < results.size(); ++i) {
        paired = paired && results[i].initial_trunk == results[0].initial_trunk &&
                 results[i].first_epoch_order == results[0].first_epoch_order;
      }
      rec.fairness.push_back({{"mf", order},
                              {"launch_power_dbm", power},
                              {"independence", pt.independence},
                              {"train_inputs", hex64(hash_floats(train_ds.inputs.data))},
                              {"test_inputs", hex64(hash_floats(test_ds.inputs.data))},
                              {"heads", heads_fair},
                              {"paired", paired}});
      for (auto& r : results) rec.runs.push_back(std::move(r));
    }
  }
  rec.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

json record_to_json(const RunRecord& r) {
  json runs = json::array();
  for (const auto& x : r.runs) {
    json epochs = json::array();
    for (const auto& e : x.report.epochs) {
      epochs.push_back({e.epoch, e.train_loss, e.test_loss, q_db_for_table(e.train_q), q_db_for_table(e.test_q),
                        e.train_mi, e.test_mi});
    }
    json jr = {{"mf", x.order},
               {"launch_power_dbm", x.power_dbm},
               {"head", nn::to_string(x.head)},
               {"lr", x.lr},
               {"diverged", x.diverged},
               {"diagnostic", x.report.diagnostic},
               {"best_epoch", x.report.best_epoch},
               {"early_stopped", x.report.early_stopped},
               {"epochs", epochs}};
    if (!x.diverged) {
      jr["train"] = metrics_to_json(x.train);
      jr["test"] = metrics_to_json(x.test);
    }
    runs.push_back(jr);
  }
  json bases = json::array();
  for (const auto& b : r.baselines) {
    bases.push_back({{"mf", b.order},
                     {"launch_power_dbm", b.power_dbm},
                     {"train", metrics_to_json(b.train)},
                     {"test", metrics_to_json(b.test)}});
  }
  return {{"config_hash", r.config_hash}, {"version", r.version}, {"config", r.config},   {"runs", runs},
          {"selected", r.selected},       {"baselines", bases},   {"fairness", r.fairness}};
}

RunRecord record_from_json(const json& j) {
  RunRecord r;
  r.config_hash = j.at("config_hash").get<std::string>();
  r.version = j.at("version").get<std::string>();
  r.config = j.at("config");
  for (const auto& jr : j.at("runs")) {
    RunResult x;
    x.order = jr.at("mf").get<int>();
    x.power_dbm = jr.at("launch_power_dbm").get<double>();
    x.head = nn::head_from_string(jr.at("head").get<std::string>());
    x.lr = jr.at("lr").get<double>();
    x.diverged = jr.at("diverged").get<bool>();
    x.report.diagnostic = jr.at("diagnostic").get<std::string>();
    x.report.best_epoch = jr.at("best_epoch").get<int>();
    x.report.early_stopped = jr.at("early_stopped").get<bool>();
    x.report.lr = x.lr;
    for (const auto& e : jr.at("epochs")) {
      EpochRecord er;
      er.epoch = e[0].get<int>();
      er.train_loss = e[1].get<double>();
      er.test_loss = e[2].get<double>();
      er.train_q = {e[3].get<double>(), QFlag::Finite};
      er.test_q = {e[4].get<double>(), QFlag::Finite};
      er.train_mi = e[5].get<double>();
      er.test_mi = e[6].get<double>();
      x.report.epochs.push_back(er);
    }
    if (!x.diverged) {
      x.train = metrics_from_json(jr.at("train"));
      x.test = metrics_from_json(jr.at("test"));
      x.report.best_test_q = x.test.report.q.q_db;
    }
    r.runs.push_back(std::move(x));
  }
  r.selected = j.at("selected").get<std::vector<std::size_t>>();
  for (auto s : r.selected) {
    if (s >= r.runs.size()) throw std::runtime_error("record: selected index out of range");
  }
  for (const auto& jb : j.at("baselines")) {
    r.baselines.push_back({jb.at("mf").get<int>(), jb.at("launch_power_dbm").get<double>(),
                           metrics_from_json(jb.at("train")), metrics_from_json(jb.at("test"))});
  }
  r.fairness = j.at("fairness");
  return r;
}

namespace {

std::string metric_row(int order, double power, const std::string& trunk, const std::string& head,
                       const std::string& lr, const std::string& best_epoch, const DatasetMetrics& te,
                       const DatasetMetrics& tr) {
  char buf[1024];
  const std::string cel = std::isfinite(te.mi_cel) ? fmt("%.6f", te.mi_cel) : "";
  std::snprintf(buf, sizeof buf, "%d,%g,%s,%s,%s,%s,%.6f,%.6f,%.6e,%.6e,%.6e,%.4f,%.6f,%s,%.6f,%.6f,%s,%s\n", order,
                power, trunk.c_str(), head.c_str(), lr.c_str(), best_epoch.c_str(), q_db_for_table(te.report.q),
                q_db_for_table(tr.report.q), te.report.ber, tr.report.ber, te.report.ser, te.report.evm_db,
                te.mi_gaussian, cel.c_str(), tr.report.mi_bits, te.report.mi_bits,
                mi_method_name(te.report.method).c_str(), q_flag_name(te.report.q.flag).c_str());
  return buf;
}

std::string trunk_name(const RunRecord& r) { return r.config.at("equalizer").at("trunk").get<std::string>(); }

}  // namespace

std::string results_csv(const RunRecord& r) {
  std::string out =
      "mf,launch_power_dbm,trunk,head,lr,best_epoch,test_q_db,train_q_db,test_ber,train_ber,test_ser,test_evm_db,"
      "test_mi_gauss_bits,test_mi_cel_bits,train_mi_bits,test_mi_bits,mi_method,q_flag\n";
  for (const auto& b : r.baselines) {
    for (auto s : r.selected) {
      const RunResult& x = r.runs[s];
      if (x.order != b.order || x.power_dbm != b.power_dbm) continue;
      out += metric_row(x.order, x.power_dbm, trunk_name(r), nn::to_string(x.head), fmt("%g", x.lr),
                        std::to_string(x.report.best_epoch), x.test, x.train);
    }
    out += metric_row(b.order, b.power_dbm, "none", "regular_dsp", "", "", b.test, b.train);
  }
  return out;
}

std::string lr_sweep_csv(const RunRecord& r) {
  std::string out = "mf,launch_power_dbm,head,lr,epochs_run,best_epoch,best_test_q_db,early_stopped,diverged,selected\n";
  for (std::size_t i = 0; i < r.runs.size(); ++i) {
    const RunResult& x = r.runs[i];
    const bool sel = std::find(r.selected.begin(), r.selected.end(), i) != r.selected.end();
    char buf[512];
    std::snprintf(buf, sizeof buf, "%d,%g,%s,%g,%zu,%d,%.6f,%d,%d,%d\n", x.order, x.power_dbm,
                  nn::to_string(x.head).c_str(), x.lr, x.report.epochs.size(), x.report.best_epoch,
                  x.diverged ? std::nan("") : q_db_for_table(x.test.report.q), x.report.early_stopped ? 1 : 0,
                  x.diverged ? 1 : 0, sel ? 1 : 0);
    out += buf;
  }
  return out;
}

void write_outputs(const RunRecord& r, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir / "epochs");
  for (const auto& x : r.runs) {
    const std::string name =
        point_dir_name(x.order, x.power_dbm) + "_" + nn::to_string(x.head) + "_lr" + fmt("%g", x.lr) + ".csv";
    write_text_atomic(out_dir / "epochs" / name, train_report_csv(x.report));
  }
  write_text_atomic(out_dir / "lr_sweep.csv", lr_sweep_csv(r));
  write_text_atomic(out_dir / "record.json", record_to_json(r).dump(1) + "\n");
  const json timing = {{"wall_clock_s", r.wall_clock_s}};
  write_text_atomic(out_dir / "timing.json", timing.dump(1) + "\n");
  write_text_atomic(out_dir / "results.csv", results_csv(r));
}

}  // namespace fq
