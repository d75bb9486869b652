#include "fq/figures.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <stdexcept>

#include "fq/frame_io.hpp"

namespace fq {
namespace {

std::string num(double v, const char* f = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

const RunResult* selected_run(const RunRecord& r, int order, double power, nn::HeadKind head) {
  for (auto s : r.selected) {
    const RunResult& x = r.runs[s];
    if (x.order == order && x.power_dbm == power && x.head == head) return &x;
  }
  return nullptr;
}

const BaselineResult* baseline(const RunRecord& r, int order, double power) {
  for (const auto& b : r.baselines) {
    if (b.order == order && b.power_dbm == power) return &b;
  }
  return nullptr;
}

enum class Quantity { Q, Mi };

double value(const DatasetMetrics& m, Quantity q) { return q == Quantity::Q ? q_db_for_table(m.report.q) : m.report.mi_bits; }

constexpr nn::HeadKind kHeads[] = {nn::HeadKind::Regression, nn::HeadKind::Classification};

// One row per x value: regression/classification test, then train, then the
// Regular DSP baseline (test data).
std::string sweep_table(const RunRecord& r, const std::string& x_name, const std::vector<std::pair<int, double>>& points,
                        bool x_is_order, Quantity q) {
  std::string out = x_name + ",regression_test,classification_test,regression_train,classification_train,regular_dsp\n";
  for (const auto& [order, power] : points) {
    out += x_is_order ? std::to_string(order) : num(power, "%g");
    for (bool test : {true, false}) {
      for (auto h : kHeads) {
        const RunResult* x = selected_run(r, order, power, h);
        out += ",";
        if (x) out += num(value(test ? x->test : x->train, q));
      }
    }
    out += ",";
    if (const auto* b = baseline(r, order, power)) out += num(value(b->test, q));
    out += "\n";
  }
  return out;
}

std::vector<int> orders_of(const RunRecord& r) {
  std::set<int> s;
  for (const auto& b : r.baselines) s.insert(b.order);
  return {s.begin(), s.end()};
}

std::vector<double> powers_of(const RunRecord& r) {
  std::set<double> s;
  for (const auto& b : r.baselines) s.insert(b.power_dbm);
  return {s.begin(), s.end()};
}

}  // namespace

std::map<std::string, std::string> figure_tables(const RunRecord& r, const std::string& figure) {
  std::map<std::string, std::string> files;
  const auto orders = orders_of(r);
  const auto powers = powers_of(r);
  if (figure == "fig4") {
    if (orders.size() < 2) {
      throw std::invalid_argument("fig4 needs a modulation-order sweep; the record has " +
                                  std::to_string(orders.size()) + " order(s)");
    }
    for (double p : powers) {
      std::vector<std::pair<int, double>> pts;
      for (int o : orders) pts.emplace_back(o, p);
      files["fig4_q_p" + num(p, "%g") + ".csv"] = sweep_table(r, "mf", pts, true, Quantity::Q);
      files["fig4_mi_p" + num(p, "%g") + ".csv"] = sweep_table(r, "mf", pts, true, Quantity::Mi);
    }
  } else if (figure == "fig5") {
    if (powers.size() < 2) {
      throw std::invalid_argument("fig5 needs a launch-power sweep; the record has " +
                                  std::to_string(powers.size()) + " power(s)");
    }
    for (int o : orders) {
      std::vector<std::pair<int, double>> pts;
      for (double p : powers) pts.emplace_back(o, p);
      files["fig5_q_mf" + std::to_string(o) + ".csv"] = sweep_table(r, "launch_power_dbm", pts, false, Quantity::Q);
      files["fig5_mi_mf" + std::to_string(o) + ".csv"] = sweep_table(r, "launch_power_dbm", pts, false, Quantity::Mi);
    }
  } else if (figure == "fig6") {
    std::set<double> lrs;
    for (const auto& x : r.runs) lrs.insert(x.lr);
    if (lrs.size() < 2) {
      throw std::invalid_argument("fig6 needs a learning-rate sweep; the record has " + std::to_string(lrs.size()) +
                                  " learning rate(s)");
    }
    for (int o : orders) {
      for (double p : powers) {
        const auto* b = baseline(r, o, p);
        for (auto lr_it = lrs.rbegin(); lr_it != lrs.rend(); ++lr_it) {
          std::vector<const RunResult*> cols;
          for (auto h : kHeads) {
            const RunResult* found = nullptr;
            for (const auto& x : r.runs) {
              if (x.order == o && x.power_dbm == p && x.head == h && x.lr == *lr_it) found = &x;
            }
            cols.push_back(found);
          }
          std::size_t n = 0;
          for (const auto* c : cols) {
            if (c) n = std::max(n, c->report.epochs.size());
          }
          if (n == 0) continue;
          std::string out =
              "epoch,regression_train_mi,regression_test_mi,classification_train_mi,classification_test_mi,"
              "regular_dsp_test_mi\n";
          for (std::size_t e = 0; e < n; ++e) {
            out += std::to_string(e + 1);
            for (const auto* c : cols) {
              const bool has = c && e < c->report.epochs.size();
              out += "," + (has ? num(c->report.epochs[e].train_mi) : std::string());
              out += "," + (has ? num(c->report.epochs[e].test_mi) : std::string());
            }
            out += "," + (b ? num(b->test.report.mi_bits) : std::string()) + "\n";
          }
          files["fig6_mf" + std::to_string(o) + "_p" + num(p, "%g") + "_lr" + num(*lr_it, "%g") + ".csv"] = out;
        }
      }
    }
  } else {
    throw std::invalid_argument("unknown figure '" + figure + "' (expected fig4, fig5 or fig6)");
  }
  if (files.empty()) throw std::invalid_argument(figure + ": the record contains no runs");
  return files;
}

std::vector<std::filesystem::path> emit_figure_data(const RunRecord& record, const std::string& figure,
                                                    const std::filesystem::path& out_dir) {
  const auto tables = figure_tables(record, figure);
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  for (const auto& [name, text] : tables) {
    write_text_atomic(out_dir / name, text);
    written.push_back(out_dir / name);
  }
  return written;
}

}  // namespace fq
