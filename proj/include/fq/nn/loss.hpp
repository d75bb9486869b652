#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>

#include "fq/nn/tensor.hpp"

namespace fq::nn {

template <class T>
struct LossResult {
  T value;
  Matrix<T> grad;  // d loss / d input, same shape as the input
};

template <class T>
Matrix<T> tanh_forward(const Matrix<T>& x) {
  return x.array().tanh().matrix();
}

/// d tanh given the forward output y.
template <class T>
Matrix<T> tanh_backward(const Matrix<T>& y, const Matrix<T>& dy) {
  return (dy.array() * (T(1) - y.array().square())).matrix();
}

/// Row-wise softmax with max subtraction.
template <class T>
Matrix<T> softmax_forward(const Matrix<T>& logits) {
  Matrix<T> out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const T mx = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - mx).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

/// Vector-Jacobian product of softmax: dx = y * (dy - sum(dy * y)).
template <class T>
Matrix<T> softmax_backward(const Matrix<T>& y, const Matrix<T>& dy) {
  Matrix<T> dx(y.rows(), y.cols());
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    const T s = (dy.row(r).array() * y.row(r).array()).sum();
    dx.row(r) = (y.row(r).array() * (dy.row(r).array() - s)).matrix();
  }
  return dx;
}

/// Mean over batch and components of the squared error.
template <class T>
LossResult<T> mse_loss(const Matrix<T>& pred, const Matrix<T>& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw std::invalid_argument("mse_loss: shape mismatch");
  }
  const Matrix<T> diff = pred - target;
  const T n = static_cast<T>(pred.size());
  return {diff.squaredNorm() / n, diff * (T(2) / n)};
}

/// Categorical cross-entropy in bits, fused with the softmax over `logits`:
/// -mean_b log2 softmax(logits_b)[label_b]. The gradient is taken with
/// respect to the logits: (softmax - onehot) / (B ln 2).
template <class T>
LossResult<T> cel_loss(const Matrix<T>& logits, std::span<const int> labels) {
  if (static_cast<std::size_t>(logits.rows()) != labels.size()) {
    throw std::invalid_argument("cel_loss: batch size mismatch");
  }
  const auto b = logits.rows();
  Matrix<T> grad(b, logits.cols());
  double total = 0.0;
  const double ln2 = std::log(2.0);
  for (Eigen::Index r = 0; r < b; ++r) {
    const int lab = labels[static_cast<std::size_t>(r)];
    if (lab < 0 || lab >= logits.cols()) throw std::invalid_argument("cel_loss: label out of range");
    const T mx = logits.row(r).maxCoeff();
    double z = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) z += std::exp(static_cast<double>(logits(r, c) - mx));
    const double log_z = std::log(z) + static_cast<double>(mx);
    total += log_z - static_cast<double>(logits(r, lab));
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      grad(r, c) = static_cast<T>(std::exp(static_cast<double>(logits(r, c)) - log_z));
    }
    grad(r, lab) -= T(1);
  }
  grad *= static_cast<T>(1.0 / (static_cast<double>(b) * ln2));
  return {static_cast<T>(total / static_cast<double>(b) / ln2), grad};
}

/// -mean log2 p[label] for row-major probability rows (n x order).
inline double cel_from_probs(std::span<const double> probs, std::span<const int> labels, int order) {
  if (probs.size() != labels.size() * static_cast<std::size_t>(order)) {
    throw std::invalid_argument("cel_from_probs: shape mismatch");
  }
  double acc = 0.0;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    const int lab = labels[r];
    if (lab < 0 || lab >= order) throw std::invalid_argument("cel_from_probs: label out of range");
    const double p = probs[r * static_cast<std::size_t>(order) + static_cast<std::size_t>(lab)];
    acc -= std::log2(std::max(p, std::numeric_limits<double>::min()));
  }
  return acc / static_cast<double>(labels.size());
}

}  // namespace fq::nn
