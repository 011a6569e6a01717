#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>

#include "stg/nn/matrix.hpp"

namespace stg::nn {

template <class T>
struct Param {
  Matrix<T> value;
  Matrix<T> grad;
  Matrix<T> m;  // Adam first moment
  Matrix<T> v;  // Adam second moment
};

/// Named parameters with gradient and optimizer buffers. Iteration order is
/// the name order, which fixes every reduction over parameters.
template <class T>
class ParamStore {
 public:
  Param<T>& add(const std::string& name, std::size_t rows, std::size_t cols);
  /// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)).
  Param<T>& add_glorot(const std::string& name, std::size_t rows, std::size_t cols, std::mt19937_64& rng);

  Param<T>& at(const std::string& name);
  const Param<T>& at(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.contains(name); }

  std::map<std::string, Param<T>>& entries() { return params_; }
  const std::map<std::string, Param<T>>& entries() const { return params_; }

  void zero_grad();
  std::size_t num_values() const;
  double grad_norm() const;
  /// Rescales gradients so their global L2 norm is at most max_norm.
  void clip_grad_norm(double max_norm);
  void scale_grad(T factor);

  /// Copy of values (and optionally optimizer state) converted to U.
  template <class U>
  ParamStore<U> converted() const {
    ParamStore<U> out;
    for (const auto& [name, p] : params_) {
      auto& q = out.add(name, p.value.rows, p.value.cols);
      q.value = cast<U>(p.value);
      q.m = cast<U>(p.m);
      q.v = cast<U>(p.v);
    }
    return out;
  }

 private:
  std::map<std::string, Param<T>> params_;
};

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam update for step number `step` (1-based); zeroes
/// gradients afterwards.
template <class T>
void adam_step(ParamStore<T>& store, const AdamConfig& config, std::int64_t step);

}  // namespace stg::nn
