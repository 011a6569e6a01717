#pragma once

#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "stg/nn/matrix.hpp"
#include "stg/nn/params.hpp"

namespace stg::nn {

/// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = 0;
};

template <class T>
struct LossAndGrad {
  T loss = 0;
  Matrix<T> grad;
};

/// Mean binary cross-entropy over all entries, stable form
/// max(x,0) - x*y + log(1 + exp(-|x|)).
template <class T>
LossAndGrad<T> bce_with_logits(const Matrix<T>& logits, const Matrix<T>& targets);

/// Mean over rows of -log softmax(row)[class_ids[row]].
template <class T>
LossAndGrad<T> softmax_cross_entropy(const Matrix<T>& logits, std::span<const int> class_ids);

/// Records primitive operations and replays them backwards. One tape per
/// forward pass; parameter gradients are accumulated into their ParamStore
/// when backward() runs.
template <class T>
class Tape {
 public:
  explicit Tape(bool training = false) : training_(training) {}

  bool training() const { return training_; }

  Var constant(Matrix<T> value);
  Var parameter(Param<T>& param);

  const Matrix<T>& value(Var v) const { return entries_[v.id].value; }
  const Matrix<T>& grad(Var v) const { return entries_[v.id].grad; }
  std::size_t size() const { return entries_.size(); }

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  /// Adds a 1xC row to every row of x.
  Var add_row(Var x, Var row);
  Var relu(Var x);
  /// Inverted dropout; identity when the tape is not in training mode or p == 0.
  Var dropout(Var x, double p, std::mt19937_64& rng);
  Var concat_cols(std::span<const Var> parts);
  Var concat_rows(std::span<const Var> parts);
  Var slice_cols(Var x, std::size_t begin, std::size_t end);
  Var slice_rows(Var x, std::size_t begin, std::size_t end);
  Var mean_rows(Var x);
  Var scale(Var x, T factor);
  /// out[r] = x[index[r]]
  Var gather_rows(Var x, std::span<const int> index);
  /// out[s] = mean of x[r] over rows with segment[r] == s; zero for empty segments.
  Var segment_mean(Var x, std::span<const int> segment, std::size_t num_segments);
  /// out[r] = x[r] * mask[r] for a constant per-row factor.
  Var scale_rows(Var x, std::span<const T> factors);
  /// out[t] = x[t - shift], zero for t < shift (causal delay along rows).
  Var shift_rows(Var x, std::size_t shift);

  /// Elementwise f with caller-supplied derivative df (evaluated at the input).
  Var elementwise(Var x, std::function<T(T)> f, std::function<T(T)> df);

  Var bce_with_logits(Var logits, const Matrix<T>& targets);
  Var softmax_cross_entropy(Var logits, std::span<const int> class_ids);

  /// Seeds d(loss)/d(loss) = 1 for a 1x1 value and propagates.
  void backward(Var loss);

 private:
  struct Entry {
    Matrix<T> value;
    Matrix<T> grad;
    std::function<void(Tape&)> backward;
    Param<T>* param = nullptr;
    bool has_grad = false;
  };

  Var push(Matrix<T> value, std::function<void(Tape&)> backward = {});
  Matrix<T>& grad_buffer(Var v);
  void check_finite(const Matrix<T>& m, const char* op) const;

  bool training_;
  std::vector<Entry> entries_;
};

}  // namespace stg::nn
