#pragma once

#include <cstddef>
#include <vector>

#include "edna/error.hpp"

namespace edna {

/// Dense row-major float64 matrix. Deliberately minimal: the built-in
/// models need matmul, bias broadcast, and elementwise relu, nothing more.
class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  const double* row(std::size_t r) const { return data_.data() + r * cols_; }

  bool operator==(const Matrix& o) const = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// a (m x k) times b (k x n).
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw Error("matmul dimension mismatch: " + std::to_string(a.cols()) +
                " vs " + std::to_string(b.rows()));
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a.at(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) {
        out.at(i, j) += aik * b.at(k, j);
      }
    }
  }
  return out;
}

/// a^T (k x m)^T times b (k x n) -> (m x n); avoids materializing transposes.
inline Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw Error("matmul_at_b dimension mismatch");
  }
  Matrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a.at(k, i);
      if (aki == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) {
        out.at(i, j) += aki * b.at(k, j);
      }
    }
  }
  return out;
}

/// a (m x k) times b^T where b is (n x k) -> (m x n).
inline Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw Error("matmul_a_bt dimension mismatch");
  }
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) {
        s += a.at(i, k) * b.at(j, k);
      }
      out.at(i, j) = s;
    }
  }
  return out;
}

inline void add_row_inplace(Matrix& m, const std::vector<double>& bias) {
  if (bias.size() != m.cols()) {
    throw Error("bias length does not match matrix columns");
  }
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      m.at(i, j) += bias[j];
    }
  }
}

inline std::vector<double> column_sums(const Matrix& m) {
  std::vector<double> out(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      out[j] += m.at(i, j);
    }
  }
  return out;
}

inline Matrix relu(const Matrix& m) {
  Matrix out = m;
  for (double& v : out.data()) {
    if (v < 0.0) v = 0.0;
  }
  return out;
}

} // namespace edna
