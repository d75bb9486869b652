#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace fq::nn {

template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

/// Dense row-major tensor. A (B, M, F) tensor is laid out so that row b of
/// as_matrix(B, M*F) is the flattened window of sample b.
template <class T>
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)), data(element_count(shape), T(0)) {}

  static std::size_t element_count(const std::vector<std::size_t>& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
  }
  std::size_t size() const { return data.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }

  Eigen::Map<Matrix<T>> as_matrix(std::size_t rows, std::size_t cols) {
    if (rows * cols != data.size()) throw std::invalid_argument("tensor view: shape mismatch");
    return {data.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
  }
  Eigen::Map<const Matrix<T>> as_matrix(std::size_t rows, std::size_t cols) const {
    if (rows * cols != data.size()) throw std::invalid_argument("tensor view: shape mismatch");
    return {data.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
  }
  /// First dimension as rows, the rest flattened.
  Eigen::Map<const Matrix<T>> rows_view() const { return as_matrix(shape.at(0), data.size() / shape.at(0)); }
};

/// Throws std::domain_error if any entry is NaN or infinite.
template <class Derived>
void check_finite(const Eigen::MatrixBase<Derived>& m, const char* where) {
  if (!m.allFinite()) throw std::domain_error(std::string("non-finite values at ") + where);
}

}  // namespace fq::nn
