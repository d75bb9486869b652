#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "fq/nn/network.hpp"

namespace fq::nn {

template <class T>
struct AdamState {
  std::vector<Matrix<T>> m;
  std::vector<Matrix<T>> v;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  explicit AdamState(const std::vector<Parameter<T>>& params) {
    for (const auto& p : params) {
      m.push_back(Matrix<T>::Zero(p.value.rows(), p.value.cols()));
      v.push_back(Matrix<T>::Zero(p.value.rows(), p.value.cols()));
    }
  }
};

/// Bias-corrected Adam: theta -= lr * m_hat / (sqrt(v_hat) + eps).
template <class T>
void adam_step(std::vector<Parameter<T>>& params, AdamState<T>& state, double lr) {
  if (state.m.size() != params.size()) throw std::invalid_argument("adam_step: state/parameter mismatch");
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  const T b1 = static_cast<T>(state.beta1), b2 = static_cast<T>(state.beta2);
  const T step_size = static_cast<T>(lr / c1);
  const T inv_sqrt_c2 = static_cast<T>(1.0 / std::sqrt(c2));
  const T eps = static_cast<T>(state.epsilon);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) {
      throw std::invalid_argument("adam_step: gradient shape mismatch");
    }
    auto m = state.m[i].array();
    auto v = state.v[i].array();
    const auto g = p.grad.array();
    m = b1 * m + (T(1) - b1) * g;
    v = b2 * v + (T(1) - b2) * g.square();
    p.value.array() -= step_size * m / (v.sqrt() * inv_sqrt_c2 + eps);
  }
}

}  // namespace fq::nn
