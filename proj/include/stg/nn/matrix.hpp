#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace stg::nn {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dense row-major matrix.
template <class T>
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, T fill = T(0)) : rows(r), cols(c), data(r * c, fill) {}

  T& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  const T& operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  std::span<T> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const T> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  std::size_t size() const { return data.size(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  bool operator==(const Matrix&) const = default;
};

template <class To, class From>
Matrix<To> cast(const Matrix<From>& m) {
  Matrix<To> out(m.rows, m.cols);
  for (std::size_t k = 0; k < m.data.size(); ++k) out.data[k] = static_cast<To>(m.data[k]);
  return out;
}

std::string shape_string(std::size_t rows, std::size_t cols);

// C = A * B, C += A^T * B, C += A * B^T. The accumulate forms back the
// matmul gradient. Every output element is reduced in a fixed order, so the
// parallel and serial versions agree bitwise.
template <class T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b);
template <class T>
void matmul_tn_accumulate(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c);
template <class T>
void matmul_nt_accumulate(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c);

namespace reference {
template <class T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b);
template <class T>
void matmul_tn_accumulate(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c);
template <class T>
void matmul_nt_accumulate(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c);
}  // namespace reference

}  // namespace stg::nn
