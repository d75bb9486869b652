#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "fq/nn/network.hpp"

namespace fq::nn {

/// |analytic - numeric| / max(|analytic|, |numeric|, floor).
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Fourth-order central finite differences against Network::backward for
/// every entry of every parameter (stride > 1 samples a subset). Returns the
/// worst relative error.
inline double check_network_gradients(Network<double>& net, const Matrix<double>& x,
                                      const std::function<LossResult<double>(const Matrix<double>&)>& loss,
                                      double eps = 1e-4, Eigen::Index stride = 1) {
  ForwardCache<double> cache;
  const LossResult<double> base = loss(net.forward(x, &cache));
  net.zero_grad();
  net.backward(cache, base.grad);
  double worst = 0.0;
  for (auto& p : net.params()) {
    for (Eigen::Index i = 0; i < p.value.size(); i += stride) {
      double& w = p.value.data()[i];
      const double saved = w;
      auto at = [&](double offset) {
        w = saved + offset;
        return loss(net.forward(x)).value;
      };
      const double numeric = (8.0 * (at(eps) - at(-eps)) - (at(2.0 * eps) - at(-2.0 * eps))) / (12.0 * eps);
      w = saved;
      worst = std::max(worst, relative_error(p.grad.data()[i], numeric));
    }
  }
  return worst;
}

}  // namespace fq::nn
