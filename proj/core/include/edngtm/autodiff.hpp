#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "edngtm/tensor.hpp"

namespace edngtm {

/// Handle to a value recorded on a Tape.
struct Var {
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::size_t id = kNone;
  bool valid() const noexcept { return id != kNone; }
};

/// Reverse-mode recording of the ops in ops.hpp.
///
/// Every recorded value owns its Tensor; gradients accumulate in that tensor's
/// grad slot during backward(). Values that do not require gradients never get
/// a slot, and ops skip work for inputs that do not need one.
template <typename T>
class Tape {
 public:
  using Backward = std::function<void(Tape&, Var self)>;

  Var leaf(Tensor<T> value, bool requires_grad);

  /// Records an op result. `backward` reads this node's gradient and accumulates
  /// into its inputs; it is only stored when `requires_grad` holds.
  Var record(Tensor<T> value, bool requires_grad, Backward backward);

  const Tensor<T>& value(Var v) const { return node(v).value; }
  bool requires_grad(Var v) const { return node(v).requires_grad; }

  /// Gradient of the last backward() target w.r.t. `v`; zeros if nothing flowed into it.
  Tensor<T> grad(Var v) const;

  /// Adds `delta` into v's gradient slot (allocating it on first use).
  void accumulate(Var v, std::span<const T> delta);
  /// Direct access to v's gradient slot, allocating it zeroed.
  std::span<T> grad_slot(Var v) { return node(v).value.ensure_grad(); }
  std::span<const T> grad_view(Var v) const { return node(v).value.grad(); }

  /// Seeds d(target)/d(target) = 1 and runs recorded backward closures in reverse.
  /// `target` must hold a single element.
  void backward(Var target);

  std::size_t size() const noexcept { return nodes_.size(); }

  /// When enabled, non-smooth ops (max pooling, ReLU) fold their branch choices
  /// (argmax positions, sign masks) into kink_pattern(). Two evaluations with the
  /// same pattern lie on the same smooth piece of the function.
  void track_kinks(bool on) noexcept { track_kinks_ = on; }
  bool tracking_kinks() const noexcept { return track_kinks_; }
  void note_kinks(std::uint64_t digest) noexcept { kink_pattern_ = (kink_pattern_ ^ digest) * 0x100000001B3ull + 1; }
  std::uint64_t kink_pattern() const noexcept { return kink_pattern_; }

 private:
  struct Node {
    Tensor<T> value;
    bool requires_grad = false;
    Backward backward;
  };

  Node& node(Var v);
  const Node& node(Var v) const;

  std::deque<Node> nodes_;
  bool track_kinks_ = false;
  std::uint64_t kink_pattern_ = 0xCBF29CE484222325ull;
};

/// Parameter name -> tape handle.
using Bindings = std::map<std::string, Var>;

// Differentiable ops recorded on a tape. Shapes follow ops.hpp.

template <typename T>
Var conv2d(Tape<T>& tape, Var input, Var kernel, Var bias, int stride = 1);

template <typename T>
Var conv_transpose2x2(Tape<T>& tape, Var input, Var kernel, Var bias);

template <typename T>
Var maxpool2d(Tape<T>& tape, Var input, int kernel, int stride);

template <typename T>
Var upsample_nearest2x(Tape<T>& tape, Var input);

template <typename T>
Var swish(Tape<T>& tape, Var input);

template <typename T>
Var relu(Tape<T>& tape, Var input);

template <typename T>
Var sigmoid(Tape<T>& tape, Var input);

template <typename T>
Var concat_channels(Tape<T>& tape, std::span<const Var> parts);

template <typename T>
Var instance_norm(Tape<T>& tape, Var input, T eps = T(1e-5));

/// N x C x H x W -> N x C.
template <typename T>
Var global_avg_pool(Tape<T>& tape, Var input);

/// input N x F, weight O x F, bias O -> N x O.
template <typename T>
Var linear(Tape<T>& tape, Var input, Var weight, Var bias);

// Scalar reductions produce shape {1}.

template <typename T>
Var mean(Tape<T>& tape, Var input);

template <typename T>
Var sum(Tape<T>& tape, Var input);

template <typename T>
Var sum_squares(Tape<T>& tape, Var input);

/// Mean of squared differences over all elements.
template <typename T>
Var mean_squared_error(Tape<T>& tape, Var a, Var b);

template <typename T>
Var scale(Tape<T>& tape, Var input, T factor);

/// Elementwise a + alpha * b for equal shapes.
template <typename T>
Var add(Tape<T>& tape, Var a, Var b, T alpha = T(1));

}  // namespace edngtm
