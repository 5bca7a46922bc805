#include "edngtm/autodiff.hpp"

#include <cmath>
#include <memory>

#include "edngtm/ops.hpp"

namespace edngtm {

template <typename T>
typename Tape<T>::Node& Tape<T>::node(Var v) {
  require(v.id < nodes_.size(), "tape: invalid variable handle ", v.id);
  return nodes_[v.id];
}

template <typename T>
const typename Tape<T>::Node& Tape<T>::node(Var v) const {
  require(v.id < nodes_.size(), "tape: invalid variable handle ", v.id);
  return nodes_[v.id];
}

template <typename T>
Var Tape<T>::leaf(Tensor<T> value, bool requires_grad) {
  nodes_.push_back(Node{std::move(value), requires_grad, {}});
  return Var{nodes_.size() - 1};
}

template <typename T>
Var Tape<T>::record(Tensor<T> value, bool requires_grad, Backward backward) {
  nodes_.push_back(Node{std::move(value), requires_grad, requires_grad ? std::move(backward) : Backward{}});
  return Var{nodes_.size() - 1};
}

template <typename T>
Tensor<T> Tape<T>::grad(Var v) const {
  const Node& n = node(v);
  if (!n.value.has_grad()) return Tensor<T>(n.value.shape());
  const auto g = n.value.grad();
  return Tensor<T>(n.value.shape(), std::vector<T>(g.begin(), g.end()));
}

template <typename T>
void Tape<T>::accumulate(Var v, std::span<const T> delta) {
  Node& n = node(v);
  if (!n.requires_grad) return;
  auto slot = n.value.ensure_grad();
  require(slot.size() == delta.size(), "tape: gradient size ", delta.size(), " does not match value shape ",
          to_string(n.value.shape()));
  for (std::size_t i = 0; i < slot.size(); ++i) slot[i] += delta[i];
}

template <typename T>
void Tape<T>::backward(Var target) {
  Node& t = node(target);
  require(t.value.size() == 1, "tape: backward target must be a scalar, got shape ", to_string(t.value.shape()));
  require(t.requires_grad, "tape: backward target does not depend on any gradient-requiring value");
  t.value.ensure_grad()[0] += T(1);
  for (std::size_t i = target.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.requires_grad && n.backward && n.value.has_grad()) n.backward(*this, Var{i});
  }
}

namespace {

template <typename T>
bool any_requires(const Tape<T>& tape, std::initializer_list<Var> vars) {
  for (Var v : vars)
    if (tape.requires_grad(v)) return true;
  return false;
}

template <typename T>
Var scalar(Tape<T>& tape, T value, bool requires_grad, typename Tape<T>::Backward backward) {
  return tape.record(Tensor<T>({1}, value), requires_grad, std::move(backward));
}

}  // namespace

template <typename T>
Var conv2d(Tape<T>& tape, Var input, Var kernel, Var bias, int stride) {
  Tensor<T> out = ops::conv2d(tape.value(input), tape.value(kernel), tape.value(bias), stride);
  return tape.record(std::move(out), any_requires(tape, {input, kernel, bias}),
                     [input, kernel, bias, stride](Tape<T>& t, Var self) {
                       const bool want_params = t.requires_grad(kernel) || t.requires_grad(bias);
                       auto g = ops::conv2d_backward(t.value(input), t.value(kernel), t.grad_view(self), stride,
                                                     t.requires_grad(input), want_params);
                       if (t.requires_grad(input)) t.accumulate(input, g.input.values());
                       if (want_params) {
                         t.accumulate(kernel, g.kernel.values());
                         t.accumulate(bias, g.bias.values());
                       }
                     });
}

template <typename T>
Var conv_transpose2x2(Tape<T>& tape, Var input, Var kernel, Var bias) {
  Tensor<T> out = ops::conv_transpose2x2(tape.value(input), tape.value(kernel), tape.value(bias));
  return tape.record(std::move(out), any_requires(tape, {input, kernel, bias}),
                     [input, kernel, bias](Tape<T>& t, Var self) {
                       const bool want_params = t.requires_grad(kernel) || t.requires_grad(bias);
                       auto g = ops::conv_transpose2x2_backward(t.value(input), t.value(kernel), t.grad_view(self),
                                                                t.requires_grad(input), want_params);
                       if (t.requires_grad(input)) t.accumulate(input, g.input.values());
                       if (want_params) {
                         t.accumulate(kernel, g.kernel.values());
                         t.accumulate(bias, g.bias.values());
                       }
                     });
}

template <typename T>
Var maxpool2d(Tape<T>& tape, Var input, int kernel, int stride) {
  auto pooled = ops::maxpool2d(tape.value(input), kernel, stride);
  if (tape.tracking_kinks()) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (std::int64_t a : pooled.argmax) h = (h ^ static_cast<std::uint64_t>(a)) * 0x100000001B3ull;
    tape.note_kinks(h);
  }
  auto argmax = std::make_shared<std::vector<std::int64_t>>(std::move(pooled.argmax));
  return tape.record(std::move(pooled.output), tape.requires_grad(input), [input, argmax](Tape<T>& t, Var self) {
    auto g = ops::maxpool2d_backward<T>(t.value(input).shape(), *argmax, t.grad_view(self));
    t.accumulate(input, g.values());
  });
}

template <typename T>
Var upsample_nearest2x(Tape<T>& tape, Var input) {
  return tape.record(ops::upsample_nearest2x(tape.value(input)), tape.requires_grad(input),
                     [input](Tape<T>& t, Var self) {
                       auto g = ops::upsample_nearest2x_backward<T>(t.value(input).shape(), t.grad_view(self));
                       t.accumulate(input, g.values());
                     });
}

template <typename T>
Var swish(Tape<T>& tape, Var input) {
  return tape.record(ops::swish(tape.value(input)), tape.requires_grad(input), [input](Tape<T>& t, Var self) {
    auto g = ops::swish_backward(t.value(input), t.grad_view(self));
    t.accumulate(input, g.values());
  });
}

template <typename T>
Var relu(Tape<T>& tape, Var input) {
  const Tensor<T>& x = tape.value(input);
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
  if (tape.tracking_kinks()) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (std::size_t i = 0; i < x.size(); ++i) h = (h ^ (x[i] > T(0) ? i : ~i)) * 0x100000001B3ull;
    tape.note_kinks(h);
  }
  return tape.record(std::move(out), tape.requires_grad(input), [input](Tape<T>& t, Var self) {
    const Tensor<T>& xv = t.value(input);
    auto gy = t.grad_view(self);
    std::vector<T> g(gy.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = xv[i] > T(0) ? gy[i] : T(0);
    t.accumulate(input, g);
  });
}

template <typename T>
Var sigmoid(Tape<T>& tape, Var input) {
  const Tensor<T>& x = tape.value(input);
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = ops::sigmoid(x[i]);
  return tape.record(std::move(out), tape.requires_grad(input), [input](Tape<T>& t, Var self) {
    const Tensor<T>& y = t.value(self);
    auto gy = t.grad_view(self);
    std::vector<T> g(gy.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = gy[i] * y[i] * (T(1) - y[i]);
    t.accumulate(input, g);
  });
}

template <typename T>
Var concat_channels(Tape<T>& tape, std::span<const Var> parts) {
  std::vector<const Tensor<T>*> values;
  std::vector<Var> inputs(parts.begin(), parts.end());
  std::vector<int> channels;
  bool needs_grad = false;
  for (Var v : parts) {
    values.push_back(&tape.value(v));
    channels.push_back(tape.value(v).rank() == 4 ? tape.value(v).dim(1) : 0);
    needs_grad = needs_grad || tape.requires_grad(v);
  }
  Tensor<T> out = ops::concat_channels<T>(values);
  return tape.record(std::move(out), needs_grad, [inputs, channels](Tape<T>& t, Var self) {
    auto pieces = ops::split_channels<T>(t.value(self).shape(), t.grad_view(self), channels);
    for (std::size_t k = 0; k < inputs.size(); ++k)
      if (t.requires_grad(inputs[k])) t.accumulate(inputs[k], pieces[k].values());
  });
}

template <typename T>
Var instance_norm(Tape<T>& tape, Var input, T eps) {
  return tape.record(ops::instance_norm(tape.value(input), eps), tape.requires_grad(input),
                     [input, eps](Tape<T>& t, Var self) {
                       auto g = ops::instance_norm_backward(t.value(input), t.grad_view(self), eps);
                       t.accumulate(input, g.values());
                     });
}

template <typename T>
Var global_avg_pool(Tape<T>& tape, Var input) {
  const Tensor<T>& x = tape.value(input);
  require(x.rank() == 4, "global_avg_pool: input must be N x C x H x W, got ", to_string(x.shape()));
  const int batch = x.dim(0), channels = x.dim(1);
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  Tensor<T> out({batch, channels});
  for (int p = 0; p < batch * channels; ++p) {
    T acc = 0;
    for (std::size_t i = 0; i < plane; ++i) acc += x[p * plane + i];
    out[p] = acc / static_cast<T>(plane);
  }
  return tape.record(std::move(out), tape.requires_grad(input), [input, plane](Tape<T>& t, Var self) {
    auto gy = t.grad_view(self);
    std::vector<T> g(t.value(input).size());
    for (std::size_t p = 0; p < gy.size(); ++p)
      std::fill_n(g.begin() + static_cast<std::ptrdiff_t>(p * plane), plane, gy[p] / static_cast<T>(plane));
    t.accumulate(input, g);
  });
}

template <typename T>
Var linear(Tape<T>& tape, Var input, Var weight, Var bias) {
  const Tensor<T>& x = tape.value(input);
  const Tensor<T>& w = tape.value(weight);
  const Tensor<T>& b = tape.value(bias);
  require(x.rank() == 2 && w.rank() == 2 && w.dim(1) == x.dim(1), "linear: input ", to_string(x.shape()),
          " incompatible with weight ", to_string(w.shape()));
  require(b.rank() == 1 && b.dim(0) == w.dim(0), "linear: bias ", to_string(b.shape()), " does not match weight ",
          to_string(w.shape()));
  const int batch = x.dim(0), features = x.dim(1), outputs = w.dim(0);
  Tensor<T> out({batch, outputs});
  for (int n = 0; n < batch; ++n)
    for (int o = 0; o < outputs; ++o) {
      T acc = b[o];
      for (int f = 0; f < features; ++f) acc += x[n * features + f] * w[o * features + f];
      out[n * outputs + o] = acc;
    }
  return tape.record(std::move(out), any_requires(tape, {input, weight, bias}),
                     [input, weight, bias, batch, features, outputs](Tape<T>& t, Var self) {
                       const Tensor<T>& xv = t.value(input);
                       const Tensor<T>& wv = t.value(weight);
                       auto gy = t.grad_view(self);
                       if (t.requires_grad(input)) {
                         std::vector<T> gx(xv.size(), T(0));
                         for (int n = 0; n < batch; ++n)
                           for (int o = 0; o < outputs; ++o)
                             for (int f = 0; f < features; ++f)
                               gx[n * features + f] += gy[n * outputs + o] * wv[o * features + f];
                         t.accumulate(input, gx);
                       }
                       if (t.requires_grad(weight) || t.requires_grad(bias)) {
                         std::vector<T> gw(wv.size(), T(0)), gb(outputs, T(0));
                         for (int n = 0; n < batch; ++n)
                           for (int o = 0; o < outputs; ++o) {
                             gb[o] += gy[n * outputs + o];
                             for (int f = 0; f < features; ++f)
                               gw[o * features + f] += gy[n * outputs + o] * xv[n * features + f];
                           }
                         t.accumulate(weight, gw);
                         t.accumulate(bias, gb);
                       }
                     });
}

template <typename T>
Var mean(Tape<T>& tape, Var input) {
  const Tensor<T>& x = tape.value(input);
  double acc = 0;
  for (T v : x.values()) acc += v;
  const auto count = static_cast<T>(x.size());
  return scalar<T>(tape, static_cast<T>(acc / x.size()), tape.requires_grad(input),
                   [input, count](Tape<T>& t, Var self) {
                     std::vector<T> g(t.value(input).size(), t.grad_view(self)[0] / count);
                     t.accumulate(input, g);
                   });
}

template <typename T>
Var sum(Tape<T>& tape, Var input) {
  double acc = 0;
  for (T v : tape.value(input).values()) acc += v;
  return scalar<T>(tape, static_cast<T>(acc), tape.requires_grad(input), [input](Tape<T>& t, Var self) {
    std::vector<T> g(t.value(input).size(), t.grad_view(self)[0]);
    t.accumulate(input, g);
  });
}

template <typename T>
Var sum_squares(Tape<T>& tape, Var input) {
  double acc = 0;
  for (T v : tape.value(input).values()) acc += static_cast<double>(v) * v;
  return scalar<T>(tape, static_cast<T>(acc), tape.requires_grad(input), [input](Tape<T>& t, Var self) {
    const Tensor<T>& x = t.value(input);
    const T gy = t.grad_view(self)[0];
    std::vector<T> g(x.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = T(2) * x[i] * gy;
    t.accumulate(input, g);
  });
}

template <typename T>
Var mean_squared_error(Tape<T>& tape, Var a, Var b) {
  const Tensor<T>& x = tape.value(a);
  const Tensor<T>& y = tape.value(b);
  require(x.shape() == y.shape(), "mean_squared_error: shape mismatch ", to_string(x.shape()), " vs ",
          to_string(y.shape()));
  double acc = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x[i]) - y[i];
    acc += d * d;
  }
  const auto count = static_cast<T>(x.size());
  return scalar<T>(tape, static_cast<T>(acc / x.size()), any_requires(tape, {a, b}),
                   [a, b, count](Tape<T>& t, Var self) {
                     const Tensor<T>& xv = t.value(a);
                     const Tensor<T>& yv = t.value(b);
                     const T k = T(2) * t.grad_view(self)[0] / count;
                     std::vector<T> g(xv.size());
                     for (std::size_t i = 0; i < g.size(); ++i) g[i] = k * (xv[i] - yv[i]);
                     t.accumulate(a, g);
                     if (t.requires_grad(b)) {
                       for (T& v : g) v = -v;
                       t.accumulate(b, g);
                     }
                   });
}

template <typename T>
Var scale(Tape<T>& tape, Var input, T factor) {
  const Tensor<T>& x = tape.value(input);
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * factor;
  return tape.record(std::move(out), tape.requires_grad(input), [input, factor](Tape<T>& t, Var self) {
    auto gy = t.grad_view(self);
    std::vector<T> g(gy.begin(), gy.end());
    for (T& v : g) v *= factor;
    t.accumulate(input, g);
  });
}

template <typename T>
Var add(Tape<T>& tape, Var a, Var b, T alpha) {
  const Tensor<T>& x = tape.value(a);
  const Tensor<T>& y = tape.value(b);
  require(x.shape() == y.shape(), "add: shape mismatch ", to_string(x.shape()), " vs ", to_string(y.shape()));
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + alpha * y[i];
  return tape.record(std::move(out), any_requires(tape, {a, b}), [a, b, alpha](Tape<T>& t, Var self) {
    auto gy = t.grad_view(self);
    std::vector<T> g(gy.begin(), gy.end());
    t.accumulate(a, g);
    for (T& v : g) v *= alpha;
    t.accumulate(b, g);
  });
}

#define EDNGTM_INSTANTIATE_TAPE(T)                                      \
  template class Tape<T>;                                               \
  template Var conv2d(Tape<T>&, Var, Var, Var, int);                    \
  template Var conv_transpose2x2(Tape<T>&, Var, Var, Var);              \
  template Var maxpool2d(Tape<T>&, Var, int, int);                      \
  template Var upsample_nearest2x(Tape<T>&, Var);                       \
  template Var swish(Tape<T>&, Var);                                    \
  template Var relu(Tape<T>&, Var);                                     \
  template Var sigmoid(Tape<T>&, Var);                                  \
  template Var concat_channels(Tape<T>&, std::span<const Var>);         \
  template Var instance_norm(Tape<T>&, Var, T);                         \
  template Var global_avg_pool(Tape<T>&, Var);                          \
  template Var linear(Tape<T>&, Var, Var, Var);                         \
  template Var mean(Tape<T>&, Var);                                     \
  template Var sum(Tape<T>&, Var);                                      \
  template Var sum_squares(Tape<T>&, Var);                              \
  template Var mean_squared_error(Tape<T>&, Var, Var);                  \
  template Var scale(Tape<T>&, Var, T);                                 \
  template Var add(Tape<T>&, Var, Var, T);

EDNGTM_INSTANTIATE_TAPE(float)
EDNGTM_INSTANTIATE_TAPE(double)

#undef EDNGTM_INSTANTIATE_TAPE

}  // namespace edngtm
