#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "edngtm/autodiff.hpp"
#include "edngtm/rng.hpp"
#include "edngtm/tensor.hpp"

namespace edngtm {

template <typename T>
struct AdamMoments {
  Tensor<T> first;
  Tensor<T> second;
  std::int64_t step = 0;
};

template <typename T>
using GradMap = std::map<std::string, Tensor<T>>;

/// Named learnable tensors plus their Adam state. Iteration is lexicographic by name.
template <typename T>
class ParamStore {
 public:
  /// Adds a parameter with zeroed moments. Names must be unique.
  void add(const std::string& name, Tensor<T> value);

  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  Tensor<T>& at(const std::string& name);
  const Tensor<T>& at(const std::string& name) const;

  AdamMoments<T>& moments(const std::string& name);
  const AdamMoments<T>& moments(const std::string& name) const;

  const std::map<std::string, Tensor<T>>& tensors() const noexcept { return params_; }
  std::size_t size() const noexcept { return params_.size(); }

  /// Total number of scalar parameters.
  std::size_t parameter_count() const;

  bool all_finite() const;

  /// Converts values and optimizer state to another real type.
  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& [name, value] : params_) {
      out.add(name, value.template cast<U>());
      const auto& m = moments_.at(name);
      auto& dst = out.moments(name);
      dst.first = m.first.template cast<U>();
      dst.second = m.second.template cast<U>();
      dst.step = m.step;
    }
    return out;
  }

  friend bool operator==(const ParamStore& a, const ParamStore& b) {
    if (a.params_ != b.params_) return false;
    for (const auto& [name, m] : a.moments_) {
      const auto& o = b.moments_.at(name);
      if (m.step != o.step || !(m.first == o.first) || !(m.second == o.second)) return false;
    }
    return true;
  }

 private:
  std::map<std::string, Tensor<T>> params_;
  std::map<std::string, AdamMoments<T>> moments_;
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam update applied in place to every parameter named in `grads`.
/// Each updated parameter's step counter advances by one.
template <typename T>
void adam_step(ParamStore<T>& params, const GradMap<T>& grads, const AdamConfig& config);

/// Clamps every parameter value to [-limit, limit].
template <typename T>
void clip_weights(ParamStore<T>& params, T limit);

/// Records every parameter as a tape leaf.
template <typename T>
Bindings bind(Tape<T>& tape, const ParamStore<T>& params, bool requires_grad);

/// Gathers gradients for every bound parameter after Tape::backward().
template <typename T>
GradMap<T> collect_grads(const Tape<T>& tape, const Bindings& bindings);

/// He-normal initialization: N(0, 2 / fan_in).
template <typename T>
Tensor<T> kaiming_normal(const Shape& shape, int fan_in, Rng& rng);

}  // namespace edngtm
