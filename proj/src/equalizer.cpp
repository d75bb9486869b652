#include "fq/equalizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "fq/fft.hpp"
#include "fq/frame_io.hpp"
#include "fq/nn/checkpoint.hpp"
#include "fq/nn/loss.hpp"
#include "fq/rx_dsp.hpp"

namespace fq {

WindowedDataset build_dataset(const SymbolFrame& rx, const SymbolFrame& tx, int neighbors, Polarization pol) {
  if (neighbors < 0) throw std::invalid_argument("build_dataset: negative neighbour count");
  if (rx.size() != tx.size() || rx.syms_y.size() != tx.syms_y.size() || rx.syms_x.size() != rx.syms_y.size()) {
    throw std::invalid_argument("build_dataset: rx and tx frames differ in length");
  }
  const int m = 2 * neighbors + 1;
  const std::size_t len = rx.size();
  if (len <= static_cast<std::size_t>(m)) throw std::invalid_argument("build_dataset: frame not longer than memory");
  const auto alphabet = QamAlphabet::build(tx.order);
  const std::size_t rows = len - 2 * static_cast<std::size_t>(neighbors);

  WindowedDataset ds;
  ds.neighbors = neighbors;
  ds.order = tx.order;
  ds.pol = pol;
  ds.inputs = nn::Tensor<float>({rows, static_cast<std::size_t>(m), 4});
  ds.reg_targets = nn::Tensor<float>({rows, 2});
  ds.labels.resize(rows);
  ds.target_symbols.resize(rows);
  ds.center_received.resize(rows);
  const CVec& tgt = tx.pol(pol);
  const CVec& rcv = rx.pol(pol);
  for (std::size_t k = 0; k < rows; ++k) {
    float* row = ds.inputs.data.data() + k * static_cast<std::size_t>(m) * 4;
    for (int j = 0; j < m; ++j) {
      const std::size_t t = k + static_cast<std::size_t>(j);
      row[4 * j + 0] = static_cast<float>(rx.syms_x[t].real());
      row[4 * j + 1] = static_cast<float>(rx.syms_x[t].imag());
      row[4 * j + 2] = static_cast<float>(rx.syms_y[t].real());
      row[4 * j + 3] = static_cast<float>(rx.syms_y[t].imag());
    }
    const std::size_t c = k + static_cast<std::size_t>(neighbors);
    const int cls = alphabet.class_of(tgt[c]);
    if (cls < 0) throw std::invalid_argument("build_dataset: transmitted symbol is not an alphabet point");
    ds.labels[k] = cls;
    ds.target_symbols[k] = alphabet.point(cls);
    ds.reg_targets.data[2 * k] = static_cast<float>(ds.target_symbols[k].real());
    ds.reg_targets.data[2 * k + 1] = static_cast<float>(ds.target_symbols[k].imag());
    ds.center_received[k] = rcv[c];
  }
  return ds;
}

WindowedDataset concat_datasets(std::span<const WindowedDataset> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_datasets: nothing to concatenate");
  WindowedDataset out;
  out.neighbors = parts[0].neighbors;
  out.order = parts[0].order;
  out.pol = parts[0].pol;
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.neighbors != out.neighbors || p.order != out.order || p.pol != out.pol) {
      throw std::invalid_argument("concat_datasets: incompatible parts");
    }
    rows += p.rows();
  }
  out.inputs = nn::Tensor<float>({rows, static_cast<std::size_t>(out.memory()), 4});
  out.reg_targets = nn::Tensor<float>({rows, 2});
  out.inputs.data.clear();
  out.reg_targets.data.clear();
  for (const auto& p : parts) {
    out.inputs.data.insert(out.inputs.data.end(), p.inputs.data.begin(), p.inputs.data.end());
    out.reg_targets.data.insert(out.reg_targets.data.end(), p.reg_targets.data.begin(), p.reg_targets.data.end());
    out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
    out.target_symbols.insert(out.target_symbols.end(), p.target_symbols.begin(), p.target_symbols.end());
    out.center_received.insert(out.center_received.end(), p.center_received.begin(), p.center_received.end());
  }
  return out;
}

double check_dataset_independence(const SymbolFrame& train, const SymbolFrame& test, int max_lag) {
  const std::size_t n = std::min(train.size(), test.size());
  if (n < (1U << 14)) throw std::invalid_argument("check_dataset_independence: need at least 2^14 symbols");
  Fft fft(n);
  double worst = 0.0;
  for (auto p : {Polarization::X, Polarization::Y}) {
    CVec a(train.pol(p).begin(), train.pol(p).begin() + static_cast<std::ptrdiff_t>(n));
    CVec b(test.pol(p).begin(), test.pol(p).begin() + static_cast<std::ptrdiff_t>(n));
    for (CVec* v : {&a, &b}) {
      cplx mean{0.0, 0.0};
      for (auto z : *v) mean += z;
      mean /= static_cast<double>(n);
      for (auto& z : *v) z -= mean;
    }
    double ea = 0.0, eb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      ea += std::norm(a[i]);
      eb += std::norm(b[i]);
    }
    if (!(ea > 0.0 && eb > 0.0)) continue;
    // r(l) = sum_i conj(a_i) b_{i+l} via the correlation theorem.
    fft.forward(a);
    fft.forward(b);
    for (std::size_t k = 0; k < n; ++k) a[k] = std::conj(a[k]) * b[k];
    fft.inverse(a);
    const double norm = std::sqrt(ea * eb);
    for (int lag = -max_lag; lag <= max_lag; ++lag) {
      const auto idx = static_cast<std::size_t>((lag % static_cast<std::ptrdiff_t>(n) + static_cast<std::ptrdiff_t>(n)) %
                                                static_cast<std::ptrdiff_t>(n));
      worst = std::max(worst, std::abs(a[idx]) / norm);
    }
  }
  return worst;
}

void EqualizerSpec::validate() const {
  topology.validate();
  if (batch_size < 1) throw std::invalid_argument("equalizer: batch size must be >= 1");
  if (learning_rates.empty()) throw std::invalid_argument("equalizer: empty learning-rate list");
  for (double lr : learning_rates) {
    if (!(lr > 0.0)) throw std::invalid_argument("equalizer: learning rates must be positive");
  }
  if (max_epochs < 1) throw std::invalid_argument("equalizer: max_epochs must be >= 1");
  if (patience < 0 || patience >= max_epochs) throw std::invalid_argument("equalizer: need 0 <= patience < max_epochs");
}

std::string train_report_csv(const TrainReport& r) {
  std::string out =
      "epoch,train_loss,test_loss,train_q_db,test_q_db,train_mi_bits,test_mi_bits,train_q_flag,test_q_flag\n";
  char buf[512];
  for (const auto& e : r.epochs) {
    std::snprintf(buf, sizeof buf, "%d,%.8f,%.8f,%.6f,%.6f,%.6f,%.6f,%s,%s\n", e.epoch, e.train_loss, e.test_loss,
                  q_db_for_table(e.train_q), q_db_for_table(e.test_q), e.train_mi, e.test_mi,
                  q_flag_name(e.train_q.flag).c_str(), q_flag_name(e.test_q.flag).c_str());
    out += buf;
  }
  return out;
}

EqualizerModel build_model(const EqualizerSpec& spec, std::uint64_t init_seed) {
  spec.validate();
  EqualizerModel m;
  m.spec = spec;
  m.net = nn::Network<float>(spec.topology, init_seed);
  m.adam = nn::AdamState<float>(m.net.params());
  return m;
}

namespace {

constexpr std::size_t kEvalChunk = 8192;

nn::Matrix<float> gather_rows(const nn::Tensor<float>& t, std::span<const std::size_t> idx) {
  const std::size_t width = t.size() / t.dim(0);
  nn::Matrix<float> out(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(width));
  for (std::size_t r = 0; r < idx.size(); ++r) {
    std::copy_n(t.data.data() + idx[r] * width, width, out.data() + r * width);
  }
  return out;
}

nn::Matrix<float> row_range(const nn::Tensor<float>& t, std::size_t begin, std::size_t count) {
  const std::size_t width = t.size() / t.dim(0);
  nn::Matrix<float> out(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(width));
  std::copy_n(t.data.data() + begin * width, count * width, out.data());
  return out;
}

void shuffle(std::vector<std::size_t>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(idx[i - 1], idx[j]);
  }
}

std::vector<nn::Matrix<float>> snapshot(const nn::Network<float>& net) {
  std::vector<nn::Matrix<float>> out;
  for (const auto& p : net.params()) out.push_back(p.value);
  return out;
}

void restore(nn::Network<float>& net, const std::vector<nn::Matrix<float>>& vals) {
  auto& ps = net.params();
  for (std::size_t i = 0; i < ps.size(); ++i) ps[i].value = vals[i];
}

}  // namespace

EqualizerOutput equalize(const nn::Network<float>& net, const WindowedDataset& ds) {
  const auto& topo = net.topology();
  if (ds.memory() != topo.memory || ds.inputs.size() / std::max<std::size_t>(ds.rows(), 1) !=
                                        static_cast<std::size_t>(topo.input_width())) {
    throw std::invalid_argument("equalize: dataset shape does not match the model");
  }
  const auto alphabet = QamAlphabet::build(ds.order);
  if (topo.head == nn::HeadKind::Classification && topo.n_classes != alphabet.order()) {
    throw std::invalid_argument("equalize: class count does not match the modulation order");
  }
  EqualizerOutput out;
  const std::size_t rows = ds.rows();
  out.symbols.resize(rows);
  out.classes.resize(rows);
  if (topo.head == nn::HeadKind::Classification) out.probs.resize(static_cast<Eigen::Index>(rows), topo.n_classes);
  for (std::size_t b = 0; b < rows; b += kEvalChunk) {
    const std::size_t n = std::min(kEvalChunk, rows - b);
    const nn::Matrix<float> y = net.forward(row_range(ds.inputs, b, n));
    if (topo.head == nn::HeadKind::Regression) {
      for (std::size_t r = 0; r < n; ++r) {
        const cplx z(y(static_cast<Eigen::Index>(r), 0), y(static_cast<Eigen::Index>(r), 1));
        out.symbols[b + r] = z;
        out.classes[b + r] = alphabet.nearest(z);
      }
    } else {
      const nn::Matrix<double> p = nn::softmax_forward<double>(y.cast<double>());
      out.probs.middleRows(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(n)) = p;
      for (std::size_t r = 0; r < n; ++r) {
        Eigen::Index arg;
        p.row(static_cast<Eigen::Index>(r)).maxCoeff(&arg);
        out.classes[b + r] = static_cast<int>(arg);
        out.symbols[b + r] = alphabet.point(static_cast<int>(arg));
      }
    }
  }
  return out;
}

Evaluation evaluate(const nn::Network<float>& net, const WindowedDataset& ds) {
  const auto& topo = net.topology();
  const auto alphabet = QamAlphabet::build(ds.order);
  const EqualizerOutput eq = equalize(net, ds);
  Evaluation ev;
  ev.classes = eq.classes;
  const std::size_t rows = ds.rows();
  if (topo.head == nn::HeadKind::Regression) {
    ev.soft_symbols = eq.symbols;
    double se = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      const double dr = eq.symbols[r].real() - ds.reg_targets.data[2 * r];
      const double di = eq.symbols[r].imag() - ds.reg_targets.data[2 * r + 1];
      se += dr * dr + di * di;
    }
    ev.loss = se / static_cast<double>(2 * rows);
  } else {
    ev.soft_symbols.assign(rows, cplx{});
    const auto pts = alphabet.points();
    for (std::size_t r = 0; r < rows; ++r) {
      for (int c = 0; c < alphabet.order(); ++c) {
        ev.soft_symbols[r] += eq.probs(static_cast<Eigen::Index>(r), c) * pts[static_cast<std::size_t>(c)];
      }
    }
    const auto probs = std::span<const double>(eq.probs.data(), static_cast<std::size_t>(eq.probs.size()));
    ev.loss = nn::cel_from_probs(probs, ds.labels, alphabet.order());
    ev.mi_cel = std::log2(static_cast<double>(alphabet.order())) - ev.loss;
  }
  const Bits dec_bits = bits_of_classes(ev.classes, alphabet);
  const Bits ref_bits = bits_of_classes(ds.labels, alphabet);
  const ErrorRates er = ber_ser(dec_bits, ref_bits, ev.classes, ds.labels);
  ev.metrics.ber = er.ber;
  ev.metrics.ser = er.ser;
  ev.metrics.q = q_factor_from_ber(er.ber);
  ev.metrics.evm_db = evm_db(ev.soft_symbols, ds.target_symbols);
  ev.metrics.n_symbols = rows;
  ev.mi_gaussian = mi_gaussian_lower_bound(ev.soft_symbols, ds.labels, alphabet.order()).bits;
  if (topo.head == nn::HeadKind::Regression) {
    ev.metrics.mi_bits = ev.mi_gaussian;
    ev.metrics.method = MiMethod::GaussianLowerBound;
  } else {
    ev.metrics.mi_bits = ev.mi_cel;
    ev.metrics.method = MiMethod::ClassificationCel;
  }
  return ev;
}

std::vector<std::size_t> epoch_order(std::uint64_t shuffle_seed, std::size_t rows, int epoch) {
  Rng rng(shuffle_seed);
  std::vector<std::size_t> idx(rows);
  for (int e = 0; e <= epoch; ++e) {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    shuffle(idx, rng);
  }
  return idx;
}

TrainReport train(EqualizerModel& model, const WindowedDataset& train_ds, const WindowedDataset& test_ds,
                  const TrainOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& topo = model.net.topology();
  if (train_ds.memory() != topo.memory || test_ds.memory() != topo.memory) {
    throw std::invalid_argument("train: dataset memory does not match the model");
  }
  if (model.epoch == 0 && model.adam.step == 0) {
    model.lr = opts.lr;
    model.shuffle_rng = Rng(opts.shuffle_seed);
    model.report = {};
    model.report.lr = opts.lr;
  }
  const bool regression = topo.head == nn::HeadKind::Regression;
  const std::size_t rows = train_ds.rows();
  const auto batch = static_cast<std::size_t>(model.spec.batch_size);
  std::vector<std::size_t> idx(rows);
  nn::ForwardCache<float> cache;
  int run = 0;

  while (!model.finished && model.epoch < model.spec.max_epochs) {
    if (opts.pause_after && run >= *opts.pause_after) break;
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    shuffle(idx, model.shuffle_rng);
    for (std::size_t b = 0; b < rows; b += batch) {
      const std::span<const std::size_t> sel(idx.data() + b, std::min(batch, rows - b));
      const nn::Matrix<float> x = gather_rows(train_ds.inputs, sel);
      const nn::Matrix<float> y = model.net.forward(x, &cache);
      nn::LossResult<float> loss{};
      if (regression) {
        loss = nn::mse_loss<float>(y, gather_rows(train_ds.reg_targets, sel));
      } else {
        std::vector<int> lab(sel.size());
        for (std::size_t i = 0; i < sel.size(); ++i) lab[i] = train_ds.labels[sel[i]];
        loss = nn::cel_loss<float>(y, lab);
      }
      if (!std::isfinite(loss.value)) {
        model.report.diverged = true;
        model.report.diagnostic = "non-finite loss at epoch " + std::to_string(model.epoch + 1);
        if (!model.best_params.empty()) restore(model.net, model.best_params);
        model.finished = true;
        throw TrainingDiverged(model.report.diagnostic, model.report);
      }
      model.net.zero_grad();
      model.net.backward(cache, loss.grad);
      nn::adam_step(model.net.params(), model.adam, model.lr);
    }
    ++model.epoch;
    ++run;

    const Evaluation tr = evaluate(model.net, train_ds);
    const Evaluation te = evaluate(model.net, test_ds);
    EpochRecord rec;
    rec.epoch = model.epoch;
    rec.train_loss = tr.loss;
    rec.test_loss = te.loss;
    rec.train_q = tr.metrics.q;
    rec.test_q = te.metrics.q;
    rec.train_mi = tr.metrics.mi_bits;
    rec.test_mi = te.metrics.mi_bits;
    model.report.epochs.push_back(rec);
    if (te.metrics.q.q_db > model.best_test_q) {
      model.best_test_q = te.metrics.q.q_db;
      model.best_epoch = model.epoch;
      model.best_params = snapshot(model.net);
      model.since_best = 0;
    } else if (++model.since_best > model.spec.patience) {
      model.report.early_stopped = true;
      model.finished = true;
    }
  }
  if (model.epoch >= model.spec.max_epochs) model.finished = true;
  if (model.finished && !model.best_params.empty()) restore(model.net, model.best_params);
  model.report.best_epoch = model.best_epoch;
  model.report.best_test_q = model.best_test_q;
  model.report.wall_clock_s += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return model.report;
}

SweepResult train_with_lr_sweep(const EqualizerSpec& spec, const WindowedDataset& train_ds,
                                const WindowedDataset& test_ds, std::uint64_t init_seed, std::uint64_t shuffle_seed) {
  SweepResult res;
  bool have_best = false;
  for (std::size_t i = 0; i < spec.learning_rates.size(); ++i) {
    const double lr = spec.learning_rates[i];
    EqualizerModel m = build_model(spec, init_seed);
    try {
      res.reports.push_back(train(m, train_ds, test_ds, {.lr = lr, .shuffle_seed = shuffle_seed, .pause_after = std::nullopt}));
    } catch (const TrainingDiverged& e) {
      res.reports.push_back(e.report());
      continue;
    }
    const TrainReport& r = res.reports.back();
    const bool better = !have_best || r.best_test_q > res.best.best_test_q ||
                        (r.best_test_q == res.best.best_test_q && lr > res.best.lr);
    if (better) {
      res.best = std::move(m);
      res.best_index = i;
      have_best = true;
    }
  }
  if (!have_best) throw std::runtime_error("learning-rate sweep: every run diverged");
  return res;
}

namespace {

nlohmann::json report_to_json(const TrainReport& r) {
  auto j = nlohmann::json::array();
  for (const auto& e : r.epochs) {
    j.push_back({e.epoch, e.train_loss, e.test_loss, q_db_for_table(e.train_q), q_db_for_table(e.test_q), e.train_mi,
                 e.test_mi, q_flag_name(e.train_q.flag), q_flag_name(e.test_q.flag)});
  }
  return j;
}

}  // namespace

void save_model(const std::filesystem::path& path, const EqualizerModel& model) {
  nn::Checkpoint c;
  c.topology = model.net.topology();
  c.params = model.net.params();
  c.adam = model.adam;
  c.rng_state = model.shuffle_rng.state();
  c.epoch = model.epoch;
  c.extra = {{"batch_size", model.spec.batch_size},
             {"learning_rates", model.spec.learning_rates},
             {"max_epochs", model.spec.max_epochs},
             {"patience", model.spec.patience},
             {"lr", model.lr},
             {"best_epoch", model.best_epoch},
             {"best_test_q", std::isfinite(model.best_test_q) ? nlohmann::json(model.best_test_q)
                                                              : nlohmann::json(model.best_test_q > 0 ? "+inf" : "-inf")},
             {"since_best", model.since_best},
             {"finished", model.finished},
             {"report", report_to_json(model.report)},
             {"early_stopped", model.report.early_stopped}};
  c.extra_tensors = model.best_params;
  write_file_atomic(path, nn::encode_checkpoint(c));
}

namespace {

QFactor q_from_table(double v, const std::string& flag) {
  if (flag == "+inf") return {std::numeric_limits<double>::infinity(), QFlag::PlusInfinity};
  if (flag == "-inf") return {-std::numeric_limits<double>::infinity(), QFlag::MinusInfinity};
  return {v, QFlag::Finite};
}

TrainReport report_from_json(const nlohmann::json& j) {
  TrainReport r;
  for (const auto& row : j) {
    EpochRecord e;
    e.epoch = row[0].get<int>();
    e.train_loss = row[1].get<double>();
    e.test_loss = row[2].get<double>();
    e.train_q = q_from_table(row[3].get<double>(), row[7].get<std::string>());
    e.test_q = q_from_table(row[4].get<double>(), row[8].get<std::string>());
    e.train_mi = row[5].get<double>();
    e.test_mi = row[6].get<double>();
    r.epochs.push_back(e);
  }
  return r;
}

}  // namespace

EqualizerModel load_model(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  nn::Checkpoint c = nn::decode_checkpoint(bytes);
  EqualizerModel m;
  m.spec.topology = c.topology;
  m.spec.batch_size = c.extra.at("batch_size").get<int>();
  m.spec.learning_rates = c.extra.at("learning_rates").get<std::vector<double>>();
  m.spec.max_epochs = c.extra.at("max_epochs").get<int>();
  m.spec.patience = c.extra.at("patience").get<int>();
  m.net = nn::Network<float>(c.topology, 0);
  auto& ps = m.net.params();
  if (ps.size() != c.params.size()) throw std::runtime_error("checkpoint parameter count does not match topology");
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (ps[i].value.rows() != c.params[i].value.rows() || ps[i].value.cols() != c.params[i].value.cols()) {
      throw std::runtime_error("checkpoint parameter shape mismatch: " + c.params[i].name);
    }
    ps[i].value = c.params[i].value;
  }
  m.adam = c.adam;
  if (m.adam.m.empty()) m.adam = nn::AdamState<float>(ps);
  m.shuffle_rng.set_state(c.rng_state);
  m.epoch = c.epoch;
  m.lr = c.extra.at("lr").get<double>();
  m.best_epoch = c.extra.at("best_epoch").get<int>();
  const auto& bq = c.extra.at("best_test_q");
  m.best_test_q = bq.is_string() ? (bq.get<std::string>() == "+inf" ? std::numeric_limits<double>::infinity()
                                                                     : -std::numeric_limits<double>::infinity())
                                 : bq.get<double>();
  m.since_best = c.extra.at("since_best").get<int>();
  m.finished = c.extra.at("finished").get<bool>();
  m.best_params = std::move(c.extra_tensors);
  m.report = report_from_json(c.extra.at("report"));
  m.report.lr = m.lr;
  m.report.best_epoch = m.best_epoch;
  m.report.best_test_q = m.best_test_q;
  m.report.early_stopped = c.extra.at("early_stopped").get<bool>();
  return m;
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t h) {
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t hash_floats(std::span<const float> v, std::uint64_t h) {
  return fnv1a64(std::span(reinterpret_cast<const std::uint8_t*>(v.data()), v.size() * sizeof(float)), h);
}

std::uint64_t trunk_fingerprint(const nn::Network<float>& net) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto& ps = net.params();
  for (std::size_t i = 0; i < net.trunk_param_count(); ++i) {
    h = hash_floats(std::span(ps[i].value.data(), static_cast<std::size_t>(ps[i].value.size())), h);
  }
  return h;
}

}  // namespace fq
