#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "edngtm/autodiff.hpp"
#include "edngtm/params.hpp"

namespace edngtm {

/// Builds a scalar loss on `tape` from bound parameters and the input handle.
template <typename T>
using LossBuilder = std::function<Var(Tape<T>& tape, const Bindings& params, Var input)>;

struct GradCheckOptions {
  double step = 1e-3;        ///< central-difference half width h
  double tolerance = 1e-3;   ///< pass threshold on relative error
  int samples_per_tensor = 12;
  std::uint64_t seed = 1;
  bool check_input = true;
  /// Relative error is |a - n| / max(|a|, |n|, floor); keeps exact zeros comparable.
  double floor = 1e-7;
  /// Discard probes whose +-h evaluations change a max-pool or ReLU branch (the
  /// loss is not differentiable across that interval) and draw another index.
  bool skip_kinks = true;
  /// Before discarding a kink-straddling probe, retry it this many times with h
  /// divided by 10 each time; a narrower interval usually clears the kink.
  int kink_refinements = 3;
};

struct GradCheckEntry {
  std::string name;  ///< parameter name, or "<input>"
  std::size_t checked = 0;
  std::size_t kinks_skipped = 0;  ///< probes discarded for crossing a non-smooth point
  std::size_t narrowed = 0;       ///< checked probes that needed a reduced h
  double max_relative_error = 0.0;
  double max_abs_analytic = 0.0;
};

struct GradCheckReport {
  double loss = 0.0;
  std::vector<GradCheckEntry> entries;

  double worst() const;
  bool passed(double tolerance) const { return worst() < tolerance; }
};

/// Compares analytic gradients against (f(x+h) - f(x-h)) / 2h on a sampled subset
/// of each parameter tensor, starting with its largest-magnitude gradient.
/// Throws NumericError if the loss is not finite.
template <typename T>
GradCheckReport grad_check(const LossBuilder<T>& build, const ParamStore<T>& params, const Tensor<T>& input,
                           const GradCheckOptions& options = {});

}  // namespace edngtm
