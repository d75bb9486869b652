#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fq/nn/layers.hpp"
#include "fq/nn/loss.hpp"
#include "fq/rng.hpp"

namespace fq::nn {

enum class TrunkKind : std::uint8_t { Mlp = 0, BiLstm = 1 };
enum class HeadKind : std::uint8_t { Regression = 0, Classification = 1 };

std::string to_string(TrunkKind k);
std::string to_string(HeadKind k);
TrunkKind trunk_from_string(const std::string& s);
HeadKind head_from_string(const std::string& s);

/// The two fixed equalizer topologies:
///   MLP:    flatten(M*F) -> dense(N1,tanh) -> dense(N2,tanh) -> dense(N3,tanh)
///   biLSTM: biLSTM(Nh) -> flatten(M*2Nh)
/// followed by a linear dense(2) regression head or a dense(MF) head whose
/// logits feed a softmax.
struct Topology {
  TrunkKind trunk = TrunkKind::Mlp;
  std::array<int, 3> mlp_widths{481, 31, 263};
  int lstm_hidden = 226;
  HeadKind head = HeadKind::Regression;
  int n_classes = 16;
  int memory = 51;
  int features = 4;

  int input_width() const { return memory * features; }
  int trunk_width() const { return trunk == TrunkKind::Mlp ? mlp_widths[2] : memory * 2 * lstm_hidden; }
  int output_width() const { return head == HeadKind::Regression ? 2 : n_classes; }
  void validate() const;
};

template <class T>
struct Parameter {
  std::string name;
  Matrix<T> value;
  Matrix<T> grad;
};

template <class T>
struct ForwardCache {
  Matrix<T> input;
  std::vector<Matrix<T>> hidden;  // MLP post-activation outputs
  BiLstmCache<T> lstm;
  Matrix<T> trunk_out;
};

/// Parameters and the fixed forward/backward passes of one equalizer.
/// forward() is const and reentrant; backward() accumulates into the
/// parameter gradients.
template <class T>
class Network {
 public:
  Network() = default;

  /// Trunk weights come from a stream derived only from `seed`, so a
  /// regression and a classification network built from the same seed share
  /// identical trunk initialisations.
  Network(const Topology& topo, std::uint64_t seed) : topo_(topo) {
    topo_.validate();
    Rng trunk_rng(mix_seed(seed, 1));
    Rng head_rng(mix_seed(seed, 2));
    if (topo_.trunk == TrunkKind::Mlp) {
      int in = topo_.input_width();
      for (int l = 0; l < 3; ++l) {
        const int out = topo_.mlp_widths[static_cast<std::size_t>(l)];
        add_glorot("dense" + std::to_string(l + 1) + ".W", in, out, trunk_rng);
        add_zeros("dense" + std::to_string(l + 1) + ".b", 1, out);
        in = out;
      }
    } else {
      const int h = topo_.lstm_hidden;
      for (const char* dir : {"fwd", "bwd"}) {
        add_glorot(std::string("lstm.") + dir + ".Wx", topo_.features, 4 * h, trunk_rng);
        add_orthogonal(std::string("lstm.") + dir + ".Wh", h, 4 * h, trunk_rng);
        add_zeros(std::string("lstm.") + dir + ".b", 1, 4 * h);
        params_.back().value.middleCols(h, h).setOnes();  // forget gate bias
      }
    }
    add_glorot("head.W", topo_.trunk_width(), topo_.output_width(), head_rng);
    add_zeros("head.b", 1, topo_.output_width());
  }

  const Topology& topology() const { return topo_; }
  std::vector<Parameter<T>>& params() { return params_; }
  const std::vector<Parameter<T>>& params() const { return params_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
    return n;
  }

  /// Number of leading parameters that belong to the trunk.
  std::size_t trunk_param_count() const { return params_.size() - 2; }

  void zero_grad() {
    for (auto& p : params_) p.grad.setZero();
  }

  /// x is (B, M*F). Returns the head output: regression values or logits.
  Matrix<T> forward(const Matrix<T>& x, ForwardCache<T>* cache = nullptr) const {
    if (x.cols() != topo_.input_width()) throw std::invalid_argument("network: input width mismatch");
    Matrix<T> trunk = trunk_forward(x, cache);
    Matrix<T> y = dense_forward(trunk, params_[params_.size() - 2].value, params_.back().value);
    if (cache != nullptr) {
      cache->input = x;
      cache->trunk_out = std::move(trunk);
    }
    return y;
  }

  /// Trunk output only (pre-head features).
  Matrix<T> trunk_forward(const Matrix<T>& x, ForwardCache<T>* cache = nullptr) const {
    if (topo_.trunk == TrunkKind::Mlp) {
      Matrix<T> a = x;
      if (cache != nullptr) cache->hidden.clear();
      for (std::size_t l = 0; l < 3; ++l) {
        a = tanh_forward(dense_forward(a, params_[2 * l].value, params_[2 * l + 1].value));
        if (cache != nullptr) cache->hidden.push_back(a);
      }
      return a;
    }
    return bilstm_forward<T>(x, topo_.memory, topo_.features, lstm_weights(0), lstm_weights(1),
                             cache ? &cache->lstm : nullptr);
  }

  /// Accumulates parameter gradients for d loss / d output = dout.
  void backward(const ForwardCache<T>& cache, const Matrix<T>& dout) {
    auto& hw = params_[params_.size() - 2];
    auto& hb = params_.back();
    Matrix<T> dtrunk = dense_backward(cache.trunk_out, hw.value, dout, hw.grad, hb.grad);
    if (topo_.trunk == TrunkKind::Mlp) {
      Matrix<T> dy = std::move(dtrunk);
      for (int l = 2; l >= 0; --l) {
        const auto li = static_cast<std::size_t>(l);
        const Matrix<T> dz = tanh_backward(cache.hidden[li], dy);
        const Matrix<T>& in = l == 0 ? cache.input : cache.hidden[li - 1];
        dy = dense_backward(in, params_[2 * li].value, dz, params_[2 * li].grad, params_[2 * li + 1].grad, l > 0);
      }
      return;
    }
    bilstm_backward<T>(cache.input, topo_.memory, topo_.features, lstm_weights(0), lstm_weights(1), dtrunk,
                       cache.lstm, lstm_grads(0), lstm_grads(1), false);
  }

 private:
  LstmWeights<T> lstm_weights(int dir) const {
    const auto o = static_cast<std::size_t>(3 * dir);
    return {params_[o].value, params_[o + 1].value, params_[o + 2].value};
  }
  LstmGrads<T> lstm_grads(int dir) {
    const auto o = static_cast<std::size_t>(3 * dir);
    return {params_[o].grad, params_[o + 1].grad, params_[o + 2].grad};
  }

  void add_param(std::string name, Matrix<double> v) {
    Parameter<T> p{std::move(name), v.template cast<T>(), Matrix<T>::Zero(v.rows(), v.cols())};
    params_.push_back(std::move(p));
  }
  void add_zeros(std::string name, int rows, int cols) { add_param(std::move(name), Matrix<double>::Zero(rows, cols)); }
  void add_glorot(std::string name, int fan_in, int fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    Matrix<double> w(fan_in, fan_out);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-limit, limit);
    add_param(std::move(name), std::move(w));
  }
  /// Rows orthonormal (rows <= cols), via QR of a Gaussian matrix.
  void add_orthogonal(std::string name, int rows, int cols, Rng& rng) {
    Eigen::MatrixXd a(cols, rows);
    for (Eigen::Index i = 0; i < a.size(); i += 2) {
      const auto [n0, n1] = rng.normal_pair();
      a.data()[i] = n0;
      if (i + 1 < a.size()) a.data()[i + 1] = n1;
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(cols, rows);
    const Eigen::MatrixXd r = qr.matrixQR().topRows(rows).template triangularView<Eigen::Upper>();
    for (int j = 0; j < rows; ++j) {
      if (r(j, j) < 0) q.col(j) *= -1.0;
    }
    add_param(std::move(name), q.transpose());
  }

  Topology topo_;
  std::vector<Parameter<T>> params_;
};

}  // namespace fq::nn
