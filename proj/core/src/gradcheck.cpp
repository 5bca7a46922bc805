#include "edngtm/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "edngtm/rng.hpp"

namespace edngtm {

double GradCheckReport::worst() const {
  double w = 0.0;
  for (const auto& e : entries) w = std::max(w, e.max_relative_error);
  return w;
}

namespace {

struct Probe {
  double value;
  std::uint64_t pattern;
};

template <typename T>
Probe evaluate(const LossBuilder<T>& build, const ParamStore<T>& params, const Tensor<T>& input) {
  Tape<T> tape;
  tape.track_kinks(true);
  const Bindings b = bind(tape, params, false);
  const Var x = tape.leaf(input, false);
  const Var loss = build(tape, b, x);
  const double value = static_cast<double>(tape.value(loss)[0]);
  if (!std::isfinite(value)) throw NumericError("grad_check: loss is not finite during finite differencing");
  return {value, tape.kink_pattern()};
}

// Largest-gradient index first, then the rest in seeded random order.
std::vector<std::size_t> candidate_order(std::size_t size, std::size_t first, Rng& rng) {
  std::vector<std::size_t> order(size);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::swap(order[0], order[first]);
  for (std::size_t i = size - 1; i > 1; --i) std::swap(order[i], order[1 + rng.below(i)]);
  return order;
}

template <typename T>
GradCheckEntry compare(const std::string& name, Tensor<T>& target, const Tensor<T>& analytic,
                       const GradCheckOptions& options, std::uint64_t base_pattern, Rng& rng,
                       const std::function<Probe()>& eval) {
  GradCheckEntry entry{name, 0, 0, 0, 0.0, 0.0};
  std::size_t biggest = 0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = std::abs(static_cast<double>(analytic[i]));
    if (a > entry.max_abs_analytic) {
      entry.max_abs_analytic = a;
      biggest = i;
    }
  }
  const int attempts = options.skip_kinks ? 1 + std::max(0, options.kink_refinements) : 1;
  const std::size_t wanted = std::min<std::size_t>(target.size(), static_cast<std::size_t>(options.samples_per_tensor));
  for (std::size_t idx : candidate_order(target.size(), biggest, rng)) {
    if (entry.checked == wanted || entry.checked + entry.kinks_skipped == 10 * wanted) break;
    const T original = target[idx];
    double h = options.step;
    bool smooth = false;
    double numeric = 0.0;
    for (int attempt = 0; attempt < attempts && !smooth; ++attempt, h /= 10) {
      const T plus = static_cast<T>(original + h);
      const T minus = static_cast<T>(original - h);
      target[idx] = plus;
      const Probe f_plus = eval();
      target[idx] = minus;
      const Probe f_minus = eval();
      target[idx] = original;
      smooth = !options.skip_kinks || (f_plus.pattern == base_pattern && f_minus.pattern == base_pattern);
      numeric = (f_plus.value - f_minus.value) / (static_cast<double>(plus) - static_cast<double>(minus));
      if (smooth && attempt > 0) ++entry.narrowed;
    }
    if (!smooth) {
      ++entry.kinks_skipped;
      continue;
    }
    const double a = static_cast<double>(analytic[idx]);
    const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
    entry.max_relative_error = std::max(entry.max_relative_error, std::abs(a - numeric) / denom);
    ++entry.checked;
  }
  return entry;
}

}  // namespace

template <typename T>
GradCheckReport grad_check(const LossBuilder<T>& build, const ParamStore<T>& params, const Tensor<T>& input,
                           const GradCheckOptions& options) {
  require(options.step > 0, "grad_check: step h must be positive");
  GradCheckReport report;
  Tape<T> tape;
  tape.track_kinks(true);
  const Bindings b = bind(tape, params, true);
  const Var x = tape.leaf(input, options.check_input);
  const Var loss = build(tape, b, x);
  require(tape.value(loss).size() == 1, "grad_check: loss builder must return a scalar");
  report.loss = static_cast<double>(tape.value(loss)[0]);
  if (!std::isfinite(report.loss)) throw NumericError("grad_check: loss is not finite");
  if (tape.requires_grad(loss)) tape.backward(loss);
  const GradMap<T> analytic = collect_grads(tape, b);

  Rng rng(options.seed);
  ParamStore<T> probe = params;
  Tensor<T> probe_input = input;
  const auto eval = [&] { return evaluate(build, probe, probe_input); };
  const std::uint64_t base = tape.kink_pattern();
  for (const auto& [name, g] : analytic)
    report.entries.push_back(compare(name, probe.at(name), g, options, base, rng, eval));
  if (options.check_input)
    report.entries.push_back(compare(std::string("<input>"), probe_input, tape.grad(x), options, base, rng, eval));
  return report;
}

template GradCheckReport grad_check(const LossBuilder<float>&, const ParamStore<float>&, const Tensor<float>&,
                                    const GradCheckOptions&);
template GradCheckReport grad_check(const LossBuilder<double>&, const ParamStore<double>&, const Tensor<double>&,
                                    const GradCheckOptions&);

}  // namespace edngtm
