#include "stg/nn/params.hpp"

#include <cmath>

namespace stg::nn {

template <class T>
Param<T>& ParamStore<T>::add(const std::string& name, std::size_t rows, std::size_t cols) {
  if (params_.contains(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
  Param<T> p{Matrix<T>(rows, cols), Matrix<T>(rows, cols), Matrix<T>(rows, cols), Matrix<T>(rows, cols)};
  return params_.emplace(name, std::move(p)).first->second;
}

template <class T>
Param<T>& ParamStore<T>::add_glorot(const std::string& name, std::size_t rows, std::size_t cols,
                                     std::mt19937_64& rng) {
  auto& p = add(name, rows, cols);
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& x : p.value.data) x = static_cast<T>(dist(rng));
  return p;
}

template <class T>
Param<T>& ParamStore<T>::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return it->second;
}

template <class T>
const Param<T>& ParamStore<T>::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return it->second;
}

template <class T>
void ParamStore<T>::zero_grad() {
  for (auto& [_, p] : params_) std::fill(p.grad.data.begin(), p.grad.data.end(), T(0));
}

template <class T>
std::size_t ParamStore<T>::num_values() const {
  std::size_t n = 0;
  for (const auto& [_, p] : params_) n += p.value.size();
  return n;
}

template <class T>
double ParamStore<T>::grad_norm() const {
  double s = 0.0;
  for (const auto& [_, p] : params_) {
    for (T g : p.grad.data) s += static_cast<double>(g) * g;
  }
  return std::sqrt(s);
}

template <class T>
void ParamStore<T>::scale_grad(T factor) {
  for (auto& [_, p] : params_) {
    for (T& g : p.grad.data) g *= factor;
  }
}

template <class T>
void ParamStore<T>::clip_grad_norm(double max_norm) {
  const double norm = grad_norm();
  if (max_norm > 0.0 && norm > max_norm) scale_grad(static_cast<T>(max_norm / norm));
}

template <class T>
void adam_step(ParamStore<T>& store, const AdamConfig& c, std::int64_t step) {
  if (step < 1) throw std::invalid_argument("adam_step: step must be >= 1");
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(step));
  for (auto& [_, p] : store.entries()) {
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = p.grad.data[k];
      const double m = c.beta1 * p.m.data[k] + (1.0 - c.beta1) * g;
      const double v = c.beta2 * p.v.data[k] + (1.0 - c.beta2) * g * g;
      p.m.data[k] = static_cast<T>(m);
      p.v.data[k] = static_cast<T>(v);
      const double update = c.lr * (m / bc1) / (std::sqrt(v / bc2) + c.eps);
      p.value.data[k] = static_cast<T>(p.value.data[k] - update);
    }
  }
  store.zero_grad();
}

template class ParamStore<float>;
template class ParamStore<double>;
template void adam_step(ParamStore<float>&, const AdamConfig&, std::int64_t);
template void adam_step(ParamStore<double>&, const AdamConfig&, std::int64_t);

}  // namespace stg::nn
