#include "edngtm/params.hpp"

#include <algorithm>
#include <cmath>

namespace edngtm {

template <typename T>
void ParamStore<T>::add(const std::string& name, Tensor<T> value) {
  require(!contains(name), "ParamStore: duplicate parameter name '", name, "'");
  AdamMoments<T> m{Tensor<T>(value.shape()), Tensor<T>(value.shape()), 0};
  moments_.emplace(name, std::move(m));
  params_.emplace(name, std::move(value));
}

template <typename T>
Tensor<T>& ParamStore<T>::at(const std::string& name) {
  auto it = params_.find(name);
  require(it != params_.end(), "ParamStore: no parameter named '", name, "'");
  return it->second;
}

template <typename T>
const Tensor<T>& ParamStore<T>::at(const std::string& name) const {
  auto it = params_.find(name);
  require(it != params_.end(), "ParamStore: no parameter named '", name, "'");
  return it->second;
}

template <typename T>
AdamMoments<T>& ParamStore<T>::moments(const std::string& name) {
  auto it = moments_.find(name);
  require(it != moments_.end(), "ParamStore: no parameter named '", name, "'");
  return it->second;
}

template <typename T>
const AdamMoments<T>& ParamStore<T>::moments(const std::string& name) const {
  auto it = moments_.find(name);
  require(it != moments_.end(), "ParamStore: no parameter named '", name, "'");
  return it->second;
}

template <typename T>
std::size_t ParamStore<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, value] : params_) n += value.size();
  return n;
}

template <typename T>
bool ParamStore<T>::all_finite() const {
  return std::all_of(params_.begin(), params_.end(), [](const auto& kv) { return kv.second.all_finite(); });
}

template <typename T>
void adam_step(ParamStore<T>& params, const GradMap<T>& grads, const AdamConfig& config) {
  for (const auto& [name, g] : grads) {
    require(params.contains(name), "adam_step: gradient for unknown parameter '", name, "'");
    require(params.at(name).shape() == g.shape(), "adam_step: gradient for '", name, "' has shape ",
            to_string(g.shape()), " but parameter has ", to_string(params.at(name).shape()));
  }
  const T b1 = static_cast<T>(config.beta1), b2 = static_cast<T>(config.beta2);
  for (const auto& [name, g] : grads) {
    Tensor<T>& p = params.at(name);
    AdamMoments<T>& m = params.moments(name);
    ++m.step;
    const double t = static_cast<double>(m.step);
    const T c1 = static_cast<T>(1.0 - std::pow(config.beta1, t));
    const T c2 = static_cast<T>(1.0 - std::pow(config.beta2, t));
    const T lr = static_cast<T>(config.lr), eps = static_cast<T>(config.eps);
    for (std::size_t i = 0; i < p.size(); ++i) {
      m.first[i] = b1 * m.first[i] + (T(1) - b1) * g[i];
      m.second[i] = b2 * m.second[i] + (T(1) - b2) * g[i] * g[i];
      const T m_hat = m.first[i] / c1;
      const T v_hat = m.second[i] / c2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

template <typename T>
void clip_weights(ParamStore<T>& params, T limit) {
  for (const auto& [name, value] : params.tensors()) {
    Tensor<T>& p = params.at(name);
    for (T& v : p.values()) v = std::clamp(v, -limit, limit);
  }
}

template <typename T>
Bindings bind(Tape<T>& tape, const ParamStore<T>& params, bool requires_grad) {
  Bindings out;
  for (const auto& [name, value] : params.tensors()) out.emplace(name, tape.leaf(value, requires_grad));
  return out;
}

template <typename T>
GradMap<T> collect_grads(const Tape<T>& tape, const Bindings& bindings) {
  GradMap<T> grads;
  for (const auto& [name, var] : bindings)
    if (tape.requires_grad(var)) grads.emplace(name, tape.grad(var));
  return grads;
}

template <typename T>
Tensor<T> kaiming_normal(const Shape& shape, int fan_in, Rng& rng) {
  require(fan_in > 0, "kaiming_normal: fan_in must be positive");
  Tensor<T> out(shape);
  const double stddev = std::sqrt(2.0 / fan_in);
  for (T& v : out.values()) v = static_cast<T>(rng.normal() * stddev);
  return out;
}

#define EDNGTM_INSTANTIATE_PARAMS(T)                                           \
  template class ParamStore<T>;                                                \
  template void adam_step(ParamStore<T>&, const GradMap<T>&, const AdamConfig&); \
  template void clip_weights(ParamStore<T>&, T);                               \
  template Bindings bind(Tape<T>&, const ParamStore<T>&, bool);                \
  template GradMap<T> collect_grads(const Tape<T>&, const Bindings&);          \
  template Tensor<T> kaiming_normal(const Shape&, int, Rng&);

EDNGTM_INSTANTIATE_PARAMS(float)
EDNGTM_INSTANTIATE_PARAMS(double)

#undef EDNGTM_INSTANTIATE_PARAMS

}  // namespace edngtm
