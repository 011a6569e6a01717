#include "stg/nn/tape.hpp"

#include <algorithm>
#include <cmath>

namespace stg::nn {

namespace {

template <class T>
void require_same(const Matrix<T>& a, const Matrix<T>& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.rows, a.cols) + " vs " +
                     shape_string(b.rows, b.cols));
  }
}

template <class T>
T softplus_neg_abs(T x) {
  return std::log1p(std::exp(-std::abs(x)));
}

}  // namespace

template <class T>
LossAndGrad<T> bce_with_logits(const Matrix<T>& logits, const Matrix<T>& targets) {
  require_same(logits, targets, "bce_with_logits");
  LossAndGrad<T> out;
  out.grad = Matrix<T>(logits.rows, logits.cols);
  if (logits.size() == 0) return out;
  const T inv_n = T(1) / static_cast<T>(logits.size());
  double total = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    const T x = logits.data[k];
    const T y = targets.data[k];
    if (y != T(0) && y != T(1)) throw std::invalid_argument("bce_with_logits: targets must be 0 or 1");
    total += static_cast<double>(std::max(x, T(0)) - x * y + softplus_neg_abs(x));
    const T sig = x >= 0 ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
    out.grad.data[k] = (sig - y) * inv_n;
  }
  out.loss = static_cast<T>(total / static_cast<double>(logits.size()));
  return out;
}

template <class T>
LossAndGrad<T> softmax_cross_entropy(const Matrix<T>& logits, std::span<const int> class_ids) {
  if (class_ids.size() != logits.rows) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(class_ids.size()) + " labels for " +
                     std::to_string(logits.rows) + " rows");
  }
  LossAndGrad<T> out;
  out.grad = Matrix<T>(logits.rows, logits.cols);
  if (logits.rows == 0) return out;
  const T inv_n = T(1) / static_cast<T>(logits.rows);
  double total = 0.0;
  for (std::size_t r = 0; r < logits.rows; ++r) {
    const int c = class_ids[r];
    if (c < 0 || static_cast<std::size_t>(c) >= logits.cols) {
      throw std::out_of_range("softmax_cross_entropy: class id " + std::to_string(c) + " out of range for " +
                              std::to_string(logits.cols) + " classes");
    }
    const auto row = logits.row(r);
    const T mx = *std::max_element(row.begin(), row.end());
    T z = 0;
    for (T x : row) z += std::exp(x - mx);
    const T log_z = mx + std::log(z);
    total += static_cast<double>(log_z - row[static_cast<std::size_t>(c)]);
    for (std::size_t j = 0; j < logits.cols; ++j) {
      const T p = std::exp(row[j] - log_z);
      out.grad(r, j) = (p - (static_cast<int>(j) == c ? T(1) : T(0))) * inv_n;
    }
  }
  out.loss = static_cast<T>(total / static_cast<double>(logits.rows));
  return out;
}

template <class T>
void Tape<T>::check_finite(const Matrix<T>& m, const char* op) const {
  for (T x : m.data) {
    if (!std::isfinite(x)) throw std::runtime_error(std::string(op) + ": non-finite value produced");
  }
}

template <class T>
Var Tape<T>::push(Matrix<T> value, std::function<void(Tape&)> backward) {
  Entry e;
  e.value = std::move(value);
  e.backward = std::move(backward);
  entries_.push_back(std::move(e));
  return Var{entries_.size() - 1};
}

template <class T>
Matrix<T>& Tape<T>::grad_buffer(Var v) {
  auto& e = entries_[v.id];
  if (!e.has_grad) {
    e.grad = Matrix<T>(e.value.rows, e.value.cols);
    e.has_grad = true;
  }
  return e.grad;
}

template <class T>
Var Tape<T>::constant(Matrix<T> value) {
  check_finite(value, "constant");
  return push(std::move(value));
}

template <class T>
Var Tape<T>::parameter(Param<T>& param) {
  Var v = push(param.value);
  entries_[v.id].param = &param;
  return v;
}

template <class T>
Var Tape<T>::matmul(Var a, Var b) {
  const std::size_t self = entries_.size();
  Matrix<T> out = nn::matmul(value(a), value(b));
  check_finite(out, "matmul");
  return push(std::move(out), [a, b, self](Tape& t) {
    const Matrix<T>& g = t.entries_[self].grad;
    // dA += G * B^T, dB += A^T * G
    matmul_nt_accumulate(g, t.value(b), t.grad_buffer(a));
    matmul_tn_accumulate(t.value(a), g, t.grad_buffer(b));
  });
}

template <class T>
Var Tape<T>::add(Var a, Var b) {
  require_same(value(a), value(b), "add");
  const std::size_t self = entries_.size();
  Matrix<T> out = value(a);
  const auto& vb = value(b);
  for (std::size_t k = 0; k < out.size(); ++k) out.data[k] += vb.data[k];
  return push(std::move(out), [a, b, self](Tape& t) {
    const Matrix<T>& g = t.entries_[self].grad;
    for (Var v : {a, b}) {
      auto& dv = t.grad_buffer(v);
      for (std::size_t k = 0; k < g.size(); ++k) dv.data[k] += g.data[k];
    }
  });
}

template <class T>
Var Tape<T>::add_row(Var x, Var row) {
  const auto& vx = value(x);
  const auto& vr = value(row);
  if (vr.rows != 1 || vr.cols != vx.cols) {
    throw ShapeError("add_row: row " + shape_string(vr.rows, vr.cols) + " incompatible with " +
                     shape_string(vx.rows, vx.cols));
  }
  const std::size_t self = entries_.size();
  Matrix<T> out = vx;
  for (std::size_t r = 0; r < out.rows; ++r) {
    for (std::size_t c = 0; c < out.cols; ++c) out(r, c) += vr.data[c];
  }
  return push(std::move(out), [x, row, self](Tape& t) {
    const Matrix<T>& g = t.entries_[self].grad;
    auto& dx = t.grad_buffer(x);
    auto& dr = t.grad_buffer(row);
    for (std::size_t r = 0; r < g.rows; ++r) {
      for (std::size_t c = 0; c < g.cols; ++c) {
        dx(r, c) += g(r, c);
        dr.data[c] += g(r, c);
      }
    }
  });
}

template <class T>
Var Tape<T>::relu(Var x) {
  const std::size_t self = entries_.size();
  Matrix<T> out = value(x);
  for (T& v : out.data) v = v > T(0) ? v : T(0);
  return push(std::move(out), [x, self](Tape& t) {
    const Matrix<T>& g = t.entries_[self].grad;
    const Matrix<T>& in = t.value(x);
    auto& dx = t.grad_buffer(x);
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (in.data[k] > T(0)) dx.data[k] += g.data[k];
    }
  });
}

template <class T>
Var Tape<T>::dropout(Var x, double p, std::mt19937_64& rng) {
  if (!training_ || p <= 0.0) return x;
  if (p >= 1.0) throw std::invalid_argument("dropout: p must be < 1");
  const std::size_t self = entries_.size();
  const auto& vx = value(x);
  Matrix<T> mask(vx.rows, vx.cols);
  std::bernoulli_distribution keep(1.0 - p);
  const T scale_up = static_cast<T>(1.0 / (1.0 - p));
  for (T& m : mask.data) m = keep(rng) ? scale_up : T(0);
  Matrix<T> out = vx;
  for (std::size_t k = 0; k < out.size(); ++k) out.data[k] *= mask.data[k];
  return push(std::move(out), [x, self, mask = std::move(mask)](Tape& t) {
    const Matrix<T>& g = t.entries_[self].grad;
    auto& dx = t.grad_buffer(x);
    for (std::size_t k = 0; k < g.size(); ++k) dx.data[k] += g.data[k] * mask.data[k];
  });
}

template <class T>
Var Tape<T>::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t rows = value(parts[0]).rows;
  std::size_t cols = 0;
  for (Var p : parts) {
    if (value(p).rows != rows) throw ShapeError("concat_cols: row count mismatch");
    cols += value(p).cols;
  }
  Matrix<T> out(rows, cols);
  std::size_t off = 0;
  for (Var p : parts) {
    const auto& v = value(p);
    for (std::size_t r = 0; r < rows; ++r) std::copy(v.row(r).begin(), v.row(r).end(), out.row(r).begin() + off);
    off += v.cols;
  }
  const std::size_t self = entries_.size();
  std::vector<Var> inputs(parts.begin(), parts.end());
  return push(std::move(out), [inputs = std::move(inputs), self](Tape& t) {
    const Matrix<T>& g = t.entries_[self].grad;
    std::size_t off = 0;
    for (Var p : inputs) {
      auto& dp = t.grad_buffer(p);
      for (std::size_t r = 0; r < g.rows; ++r) {
        for (std::size_t c = 0; c < dp.cols; ++c) dp(r, c) += g(r, off + c);
      }
      off += dp.cols;
    }
  });
}

template <class T>
Var Tape<T>::concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t cols = value(parts[0]).cols;
  std::size_t rows = 0;
  for (Var p : parts) {
    if (value(p).cols != cols) throw ShapeError("concat_rows: column count mismatch");
    rows += value(p).rows;
  }
  Matrix<T> out(rows, cols);
  auto it = out.data.begin();
  for (Var p : parts) it = std::copy(value(p).data.begin(), value(p).data.end(), it);
  const std::size_t self = entries_.size();
  std::vector<Var> inputs(parts.begin(), parts.end());
  return push(std::move(out), [inputs = std::move(inputs), self](Tape& t) {
    const Matrix<T>& g = t.entries_[self].grad;
    std::size_t off = 0;
    for (Var p : inputs) {
      auto& dp = t.grad_buffer(p);
      for (std::size_t k = 0; k < dp.size(); ++k) dp.data[k] += g.data[off + k];
      off += dp.size();
    }
  });
}

template <class T>
Var Tape<T>::slice_cols(Var x, std::size_t begin, std::size_t end) {
  const auto& vx = value(x);
  if (begin > end || end > vx.cols) throw ShapeError("slice_cols: range out of bounds");
  Matrix<T> out(vx.rows, end - begin);
  for (std::size_t r = 0; r < vx.rows; ++r) {
    for (std::size_t c = begin; c < end; ++c) out(r, c - begin) = vx(r, c);
  }
  const std::size_t self = entries_.size();
  return push(std::move(out), [x, begin, self](Tape& t) {
    const Matrix<T>& g = t.entries_[self].grad;
    auto& dx = t.grad_buffer(x);
    for (std::size_t r = 0; r < g.rows; ++r) {
      for (std::size_t c = 0; c < g.cols; ++c) dx(r, begin + c) += g(r, c);
    }
  });
}

template <class T>
Var Tape<T>::slice_rows(Var x, std::size_t begin, std::size_t end) {
  const auto& vx = value(x);
  if (begin > end || end > vx.rows) throw ShapeError("slice_rows: range out of bounds");
  Matrix<T> out(end - begin, vx.cols);
  std::copy(vx.data.begin() + static_cast<std::ptrdiff_t>(begin * vx.cols),
            vx.data.begin() + static_cast<std::ptrdiff_t>(end * vx.cols), out.data.begin());
  const std::size_t self = entries_.size();
  return push(std::move(out), [x, begin, self](Tape& t) {
    const Matrix<T>& g = t.entries_[self].grad;
    auto& dx = t.grad_buffer(x);
    const std::size_t off = begin * dx.cols;
    for (std::size_t k = 0; k < g.size(); ++k) dx.data[off + k] += g.data[k];
  });
}

template <class T>
Var Tape<T>::mean_rows(Var x) {
  const auto& vx = value(x);
  Matrix<T> out(1, vx.cols);
  if (vx.rows > 0) {
    for (std::size_t r = 0; r < vx.rows; ++r) {
      for (std::size_t c = 0; c < vx.cols; ++c) out.data[c] += vx(r, c);
    }
    for (T& v : out.data) v /= static_cast<T>(vx.rows);
  }
  const std::size_t self = entries_.size();
  return push(std::move(out), [x, self](Tape& t) {
    const Matrix<T>& g = t.entries_[self].grad;
    auto& dx = t.grad_buffer(x);
    if (dx.rows == 0) return;
    const T inv = T(1) / static_cast<T>(dx.rows);
    for (std::size_t r = 0; r < dx.rows; ++r) {
      for (std::size_t c = 0; c < dx.cols; ++c) dx(r, c) += g.data[c] * inv;
    }
  });
}

template <class T>
Var Tape<T>::scale(Var x, T factor) {
  Matrix<T> out = value(x);
  for (T& v : out.data) v *= factor;
  const std::size_t self = entries_.size();
  return push(std::move(out), [x, factor, self](Tape& t) {
    const Matrix<T>& g = t.entries_[self].grad;
    auto& dx = t.grad_buffer(x);
    for (std::size_t k = 0; k < g.size(); ++k) dx.data[k] += g.data[k] * factor;
  });
}

template <class T>
Var Tape<T>::gather_rows(Var x, std::span<const int> index) {
  const auto& vx = value(x);
  Matrix<T> out(index.size(), vx.cols);
  for (std::size_t r = 0; r < index.size(); ++r) {
    const int src = index[r];
    if (src < 0 || static_cast<std::size_t>(src) >= vx.rows) throw ShapeError("gather_rows: index out of range");
    std::copy(vx.row(static_cast<std::size_t>(src)).begin(), vx.row(static_cast<std::size_t>(src)).end(),
              out.row(r).begin());
  }
  const std::size_t self = entries_.size();
  std::vector<int> idx(index.begin(), index.end());
  return push(std::move(out), [x, idx = std::move(idx), self](Tape& t) {
    const Matrix<T>& g = t.entries_[self].grad;
    auto& dx = t.grad_buffer(x);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      auto dst = dx.row(static_cast<std::size_t>(idx[r]));
      auto src = g.row(r);
      for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
    }
  });
}

template <class T>
Var Tape<T>::segment_mean(Var x, std::span<const int> segment, std::size_t num_segments) {
  const auto& vx = value(x);
  if (segment.size() != vx.rows) throw ShapeError("segment_mean: one segment id per row required");
  std::vector<T> count(num_segments, T(0));
  Matrix<T> out(num_segments, vx.cols);
  for (std::size_t r = 0; r < vx.rows; ++r) {
    const int s = segment[r];
    if (s < 0 || static_cast<std::size_t>(s) >= num_segments) throw ShapeError("segment_mean: segment out of range");
    count[static_cast<std::size_t>(s)] += T(1);
    auto dst = out.row(static_cast<std::size_t>(s));
    auto src = vx.row(r);
    for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
  }
  for (std::size_t s = 0; s < num_segments; ++s) {
    if (count[s] > T(0)) {
      for (T& v : out.row(s)) v /= count[s];
    }
  }
  const std::size_t self = entries_.size();
  std::vector<int> seg(segment.begin(), segment.end());
  return push(std::move(out), [x, seg = std::move(seg), count = std::move(count), self](Tape& t) {
    const Matrix<T>& g = t.entries_[self].grad;
    auto& dx = t.grad_buffer(x);
    for (std::size_t r = 0; r < seg.size(); ++r) {
      const auto s = static_cast<std::size_t>(seg[r]);
      auto src = g.row(s);
      auto dst = dx.row(r);
      for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c] / count[s];
    }
  });
}

template <class T>
Var Tape<T>::scale_rows(Var x, std::span<const T> factors) {
  const auto& vx = value(x);
  if (factors.size() != vx.rows) throw ShapeError("scale_rows: one factor per row required");
  Matrix<T> out = vx;
  for (std::size_t r = 0; r < out.rows; ++r) {
    for (T& v : out.row(r)) v *= factors[r];
  }
  const std::size_t self = entries_.size();
  std::vector<T> f(factors.begin(), factors.end());
  return push(std::move(out), [x, f = std::move(f), self](Tape& t) {
    const Matrix<T>& g = t.entries_[self].grad;
    auto& dx = t.grad_buffer(x);
    for (std::size_t r = 0; r < g.rows; ++r) {
      for (std::size_t c = 0; c < g.cols; ++c) dx(r, c) += g(r, c) * f[r];
    }
  });
}

template <class T>
Var Tape<T>::shift_rows(Var x, std::size_t shift) {
  const auto& vx = value(x);
  Matrix<T> out(vx.rows, vx.cols);
  for (std::size_t r = shift; r < vx.rows; ++r) {
    std::copy(vx.row(r - shift).begin(), vx.row(r - shift).end(), out.row(r).begin());
  }
  const std::size_t self = entries_.size();
  return push(std::move(out), [x, shift, self](Tape& t) {
    const Matrix<T>& g = t.entries_[self].grad;
    auto& dx = t.grad_buffer(x);
    for (std::size_t r = shift; r < g.rows; ++r) {
      auto src = g.row(r);
      auto dst = dx.row(r - shift);
      for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
    }
  });
}

template <class T>
Var Tape<T>::elementwise(Var x, std::function<T(T)> f, std::function<T(T)> df) {
  Matrix<T> out = value(x);
  for (T& v : out.data) v = f(v);
  check_finite(out, "elementwise");
  const std::size_t self = entries_.size();
  return push(std::move(out), [x, df = std::move(df), self](Tape& t) {
    const Matrix<T>& g = t.entries_[self].grad;
    const Matrix<T>& in = t.value(x);
    auto& dx = t.grad_buffer(x);
    for (std::size_t k = 0; k < g.size(); ++k) dx.data[k] += g.data[k] * df(in.data[k]);
  });
}

template <class T>
Var Tape<T>::bce_with_logits(Var logits, const Matrix<T>& targets) {
  auto lg = nn::bce_with_logits(value(logits), targets);
  check_finite(lg.grad, "bce_with_logits");
  const std::size_t self = entries_.size();
  Matrix<T> out(1, 1, lg.loss);
  return push(std::move(out), [logits, self, grad = std::move(lg.grad)](Tape& t) {
    const T g = t.entries_[self].grad.data[0];
    auto& dx = t.grad_buffer(logits);
    for (std::size_t k = 0; k < grad.size(); ++k) dx.data[k] += g * grad.data[k];
  });
}

template <class T>
Var Tape<T>::softmax_cross_entropy(Var logits, std::span<const int> class_ids) {
  auto lg = nn::softmax_cross_entropy(value(logits), class_ids);
  check_finite(lg.grad, "softmax_cross_entropy");
  const std::size_t self = entries_.size();
  Matrix<T> out(1, 1, lg.loss);
  return push(std::move(out), [logits, self, grad = std::move(lg.grad)](Tape& t) {
    const T g = t.entries_[self].grad.data[0];
    auto& dx = t.grad_buffer(logits);
    for (std::size_t k = 0; k < grad.size(); ++k) dx.data[k] += g * grad.data[k];
  });
}

template <class T>
void Tape<T>::backward(Var loss) {
  const auto& lv = value(loss);
  if (lv.rows != 1 || lv.cols != 1) throw ShapeError("backward: loss must be 1x1");
  grad_buffer(loss).data[0] = T(1);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    auto& e = entries_[i];
    if (!e.has_grad) continue;
    if (e.backward) e.backward(*this);
    if (e.param) {
      auto& pg = e.param->grad;
      for (std::size_t k = 0; k < pg.size(); ++k) pg.data[k] += e.grad.data[k];
    }
  }
}

template struct LossAndGrad<float>;
template struct LossAndGrad<double>;
template LossAndGrad<float> bce_with_logits(const Matrix<float>&, const Matrix<float>&);
template LossAndGrad<double> bce_with_logits(const Matrix<double>&, const Matrix<double>&);
template LossAndGrad<float> softmax_cross_entropy(const Matrix<float>&, std::span<const int>);
template LossAndGrad<double> softmax_cross_entropy(const Matrix<double>&, std::span<const int>);
template class Tape<float>;
template class Tape<double>;

}  // namespace stg::nn
