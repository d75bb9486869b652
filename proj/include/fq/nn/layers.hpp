#pragma once

#include <array>
#include <stdexcept>
#include <vector>

#include "fq/nn/tensor.hpp"

namespace fq::nn {

/// y = x W + b with W of shape (F_in, F_out) and b of shape (1, F_out).
template <class T>
Matrix<T> dense_forward(const Matrix<T>& x, const Matrix<T>& w, const Matrix<T>& b) {
  if (x.cols() != w.rows() || b.rows() != 1 || b.cols() != w.cols()) {
    throw std::invalid_argument("dense_forward: shape mismatch");
  }
  Matrix<T> y = x * w;
  y.rowwise() += b.row(0);
  return y;
}

/// Accumulates dW, db and returns dx (when want_dx).
template <class T>
Matrix<T> dense_backward(const Matrix<T>& x, const Matrix<T>& w, const Matrix<T>& dy, Matrix<T>& dw, Matrix<T>& db,
                         bool want_dx = true) {
  dw.noalias() += x.transpose() * dy;
  db.row(0) += dy.colwise().sum();
  if (!want_dx) return {};
  return dy * w.transpose();
}

/// One direction of an LSTM: input kernel (F, 4H), recurrent kernel (H, 4H),
/// bias (1, 4H). Gate blocks are ordered input, forget, cell, output.
template <class T>
struct LstmWeights {
  const Matrix<T>& wx;
  const Matrix<T>& wh;
  const Matrix<T>& b;
};

template <class T>
struct LstmGrads {
  Matrix<T>& wx;
  Matrix<T>& wh;
  Matrix<T>& b;
};

template <class T>
struct LstmDirectionCache {
  std::vector<Matrix<T>> gates;   // post-activation i, f, g, o, per step (B, 4H)
  std::vector<Matrix<T>> cell;    // c_t
  std::vector<Matrix<T>> tanh_c;  // tanh(c_t)
  std::vector<Matrix<T>> hidden;  // h_t
};

template <class T>
struct BiLstmCache {
  std::array<LstmDirectionCache<T>, 2> dir;
};

namespace detail {

template <class T>
T sigmoid(T v) {
  return T(1) / (T(1) + std::exp(-v));
}

/// Runs one direction; step order is 0..M-1 for forward, M-1..0 for reverse.
/// Writes h_t into out columns [t*2H + dir*H, +H).
template <class T>
void lstm_direction_forward(const Matrix<T>& x, int steps, int features, const LstmWeights<T>& p, int dir,
                            Matrix<T>& out, LstmDirectionCache<T>* cache) {
  const Eigen::Index b = x.rows();
  const Eigen::Index h = p.wh.rows();
  Matrix<T> hprev = Matrix<T>::Zero(b, h);
  Matrix<T> cprev = Matrix<T>::Zero(b, h);
  if (cache != nullptr) {
    cache->gates.assign(static_cast<std::size_t>(steps), {});
    cache->cell.assign(static_cast<std::size_t>(steps), {});
    cache->tanh_c.assign(static_cast<std::size_t>(steps), {});
    cache->hidden.assign(static_cast<std::size_t>(steps), {});
  }
  Matrix<T> z(b, 4 * h);
  for (int s = 0; s < steps; ++s) {
    const int t = dir == 0 ? s : steps - 1 - s;
    z.noalias() = x.middleCols(static_cast<Eigen::Index>(t) * features, features) * p.wx;
    z.noalias() += hprev * p.wh;
    z.rowwise() += p.b.row(0);
    for (Eigen::Index r = 0; r < b; ++r) {
      for (Eigen::Index j = 0; j < h; ++j) {
        z(r, j) = sigmoid(z(r, j));
        z(r, h + j) = sigmoid(z(r, h + j));
        z(r, 2 * h + j) = std::tanh(z(r, 2 * h + j));
        z(r, 3 * h + j) = sigmoid(z(r, 3 * h + j));
      }
    }
    Matrix<T> c = (z.middleCols(h, h).array() * cprev.array() + z.leftCols(h).array() * z.middleCols(2 * h, h).array())
                      .matrix();
    Matrix<T> tc = c.array().tanh().matrix();
    Matrix<T> hcur = (z.rightCols(h).array() * tc.array()).matrix();
    out.middleCols(static_cast<Eigen::Index>(t) * 2 * h + dir * h, h) = hcur;
    if (cache != nullptr) {
      const auto ti = static_cast<std::size_t>(t);
      cache->gates[ti] = z;
      cache->cell[ti] = c;
      cache->tanh_c[ti] = tc;
      cache->hidden[ti] = hcur;
    }
    hprev = std::move(hcur);
    cprev = std::move(c);
  }
}

template <class T>
void lstm_direction_backward(const Matrix<T>& x, int steps, int features, const LstmWeights<T>& p, int dir,
                             const Matrix<T>& dout, const LstmDirectionCache<T>& cache, LstmGrads<T> g,
                             Matrix<T>* dx) {
  const Eigen::Index b = x.rows();
  const Eigen::Index h = p.wh.rows();
  Matrix<T> dh_next = Matrix<T>::Zero(b, h);
  Matrix<T> dc_next = Matrix<T>::Zero(b, h);
  Matrix<T> dz(b, 4 * h);
  const Matrix<T> zeros = Matrix<T>::Zero(b, h);
  // Walk the recurrence backwards: reverse of the forward step order.
  for (int s = steps - 1; s >= 0; --s) {
    const int t = dir == 0 ? s : steps - 1 - s;
    const int tprev = dir == 0 ? t - 1 : t + 1;
    const bool has_prev = s > 0;
    const auto ti = static_cast<std::size_t>(t);
    const Matrix<T>& gates = cache.gates[ti];
    const Matrix<T>& cprev = has_prev ? cache.cell[static_cast<std::size_t>(tprev)] : zeros;
    const Matrix<T>& hprev = has_prev ? cache.hidden[static_cast<std::size_t>(tprev)] : zeros;

    Matrix<T> dh = dout.middleCols(static_cast<Eigen::Index>(t) * 2 * h + dir * h, h) + dh_next;
    const auto i = gates.leftCols(h).array();
    const auto f = gates.middleCols(h, h).array();
    const auto gg = gates.middleCols(2 * h, h).array();
    const auto o = gates.rightCols(h).array();
    const auto tc = cache.tanh_c[ti].array();
    Matrix<T> dc = (dh.array() * o * (T(1) - tc.square()) + dc_next.array()).matrix();
    dz.leftCols(h) = (dc.array() * gg * i * (T(1) - i)).matrix();
    dz.middleCols(h, h) = (dc.array() * cprev.array() * f * (T(1) - f)).matrix();
    dz.middleCols(2 * h, h) = (dc.array() * i * (T(1) - gg.square())).matrix();
    dz.rightCols(h) = (dh.array() * tc * o * (T(1) - o)).matrix();
    dc_next = (dc.array() * f).matrix();

    const auto xt = x.middleCols(static_cast<Eigen::Index>(t) * features, features);
    g.wx.noalias() += xt.transpose() * dz;
    if (has_prev) g.wh.noalias() += hprev.transpose() * dz;
    g.b.row(0) += dz.colwise().sum();
    dh_next.noalias() = dz * p.wh.transpose();
    if (dx != nullptr) dx->middleCols(static_cast<Eigen::Index>(t) * features, features).noalias() += dz * p.wx.transpose();
  }
}

}  // namespace detail

/// Bidirectional LSTM over x of logical shape (B, M, F), given as a (B, M*F)
/// matrix. Returns (B, M*2H): per time step the forward hidden state followed
/// by the backward one. Initial states are zero.
template <class T>
Matrix<T> bilstm_forward(const Matrix<T>& x, int steps, int features, const LstmWeights<T>& fwd,
                         const LstmWeights<T>& bwd, BiLstmCache<T>* cache = nullptr) {
  if (x.cols() != static_cast<Eigen::Index>(steps) * features || fwd.wx.rows() != features ||
      bwd.wx.rows() != features || fwd.wh.cols() != 4 * fwd.wh.rows() || bwd.wh.rows() != fwd.wh.rows()) {
    throw std::invalid_argument("bilstm_forward: shape mismatch");
  }
  const Eigen::Index h = fwd.wh.rows();
  Matrix<T> out(x.rows(), static_cast<Eigen::Index>(steps) * 2 * h);
  detail::lstm_direction_forward(x, steps, features, fwd, 0, out, cache ? &cache->dir[0] : nullptr);
  detail::lstm_direction_forward(x, steps, features, bwd, 1, out, cache ? &cache->dir[1] : nullptr);
  return out;
}

/// Backpropagation through time for both directions. Accumulates parameter
/// gradients and returns dx (B, M*F) when want_dx.
template <class T>
Matrix<T> bilstm_backward(const Matrix<T>& x, int steps, int features, const LstmWeights<T>& fwd,
                          const LstmWeights<T>& bwd, const Matrix<T>& dout, const BiLstmCache<T>& cache,
                          LstmGrads<T> gfwd, LstmGrads<T> gbwd, bool want_dx = true) {
  Matrix<T> dx;
  if (want_dx) dx = Matrix<T>::Zero(x.rows(), x.cols());
  detail::lstm_direction_backward(x, steps, features, fwd, 0, dout, cache.dir[0], gfwd, want_dx ? &dx : nullptr);
  detail::lstm_direction_backward(x, steps, features, bwd, 1, dout, cache.dir[1], gbwd, want_dx ? &dx : nullptr);
  return dx;
}

}  // namespace fq::nn
