#include "stg/nn/matrix.hpp"

namespace stg::nn {

std::string shape_string(std::size_t rows, std::size_t cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

namespace {

template <class T>
void check_mm(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.cols != b.rows) {
    throw ShapeError("matmul: cannot multiply " + shape_string(a.rows, a.cols) + " by " +
                     shape_string(b.rows, b.cols));
  }
}

// Below this many multiply-adds the thread start-up dominates.
constexpr std::size_t kParallelWork = 1 << 15;

}  // namespace

template <class T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
  check_mm(a, b);
  Matrix<T> c(a.rows, b.cols);
  const long long m = static_cast<long long>(a.rows);
  const std::size_t kk = a.cols, n = b.cols;
  const bool par = a.rows * kk * n > kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (long long i = 0; i < m; ++i) {
    T* crow = c.data.data() + static_cast<std::size_t>(i) * n;
    const T* arow = a.data.data() + static_cast<std::size_t>(i) * kk;
    for (std::size_t k = 0; k < kk; ++k) {
      const T aik = arow[k];
      const T* brow = b.data.data() + k * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

template <class T>
void matmul_tn_accumulate(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c) {
  if (a.rows != b.rows || c.rows != a.cols || c.cols != b.cols) {
    throw ShapeError("matmul_tn: incompatible " + shape_string(a.rows, a.cols) + "^T * " +
                     shape_string(b.rows, b.cols) + " into " + shape_string(c.rows, c.cols));
  }
  const long long kk = static_cast<long long>(a.cols);
  const std::size_t m = a.rows, n = b.cols;
  const bool par = a.rows * a.cols * n > kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (long long k = 0; k < kk; ++k) {
    T* crow = c.data.data() + static_cast<std::size_t>(k) * n;
    for (std::size_t r = 0; r < m; ++r) {
      const T ark = a.data[r * a.cols + static_cast<std::size_t>(k)];
      const T* brow = b.data.data() + r * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += ark * brow[j];
    }
  }
}

template <class T>
void matmul_nt_accumulate(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c) {
  if (a.cols != b.cols || c.rows != a.rows || c.cols != b.rows) {
    throw ShapeError("matmul_nt: incompatible " + shape_string(a.rows, a.cols) + " * " +
                     shape_string(b.rows, b.cols) + "^T into " + shape_string(c.rows, c.cols));
  }
  // Transposing b turns the inner dot product into a contiguous axpy; the
  // per-entry summation order over k is unchanged.
  const std::size_t kk = a.cols, n = b.rows;
  std::vector<T> bt(kk * n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < kk; ++k) bt[k * n + j] = b.data[j * kk + k];
  }
  const long long m = static_cast<long long>(a.rows);
  const bool par = a.rows * kk * n > kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (long long i = 0; i < m; ++i) {
    const T* arow = a.data.data() + static_cast<std::size_t>(i) * kk;
    T* crow = c.data.data() + static_cast<std::size_t>(i) * n;
    for (std::size_t k = 0; k < kk; ++k) {
      const T aik = arow[k];
      const T* brow = bt.data() + k * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
}

namespace reference {

template <class T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
  check_mm(a, b);
  Matrix<T> c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < b.cols; ++j) {
      T s = 0;
      for (std::size_t k = 0; k < a.cols; ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  }
  return c;
}

template <class T>
void matmul_tn_accumulate(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c) {
  for (std::size_t k = 0; k < a.cols; ++k) {
    for (std::size_t j = 0; j < b.cols; ++j) {
      T s = c(k, j);
      for (std::size_t r = 0; r < a.rows; ++r) s += a(r, k) * b(r, j);
      c(k, j) = s;
    }
  }
}

template <class T>
void matmul_nt_accumulate(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c) {
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < b.rows; ++j) {
      T s = c(i, j);
      for (std::size_t k = 0; k < a.cols; ++k) s += a(i, k) * b(j, k);
      c(i, j) = s;
    }
  }
}

template Matrix<float> matmul(const Matrix<float>&, const Matrix<float>&);
template Matrix<double> matmul(const Matrix<double>&, const Matrix<double>&);
template void matmul_tn_accumulate(const Matrix<float>&, const Matrix<float>&, Matrix<float>&);
template void matmul_tn_accumulate(const Matrix<double>&, const Matrix<double>&, Matrix<double>&);
template void matmul_nt_accumulate(const Matrix<float>&, const Matrix<float>&, Matrix<float>&);
template void matmul_nt_accumulate(const Matrix<double>&, const Matrix<double>&, Matrix<double>&);

}  // namespace reference

template Matrix<float> matmul(const Matrix<float>&, const Matrix<float>&);
template Matrix<double> matmul(const Matrix<double>&, const Matrix<double>&);
template void matmul_tn_accumulate(const Matrix<float>&, const Matrix<float>&, Matrix<float>&);
template void matmul_tn_accumulate(const Matrix<double>&, const Matrix<double>&, Matrix<double>&);
template void matmul_nt_accumulate(const Matrix<float>&, const Matrix<float>&, Matrix<float>&);
template void matmul_nt_accumulate(const Matrix<double>&, const Matrix<double>&, Matrix<double>&);

}  // namespace stg::nn
