#pragma once

#include <cstddef>
#include <vector>

namespace blvt::nn {

// Dense row-major matrix of doubles. Deliberately minimal: the engine needs
// storage, shape checks and a handful of kernels, not a linear-algebra
// library.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::size_t size() const { return data.size(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  bool empty() const { return data.empty(); }

  static Matrix zeros(std::size_t r, std::size_t c) { return Matrix(r, c, 0.0); }
};

// out = a * b, accumulation over the inner index in ascending order (the
// fixed order the determinism contract documents).
Matrix matmul(const Matrix& a, const Matrix& b);

bool all_finite(const Matrix& m);

}  // namespace blvt::nn
