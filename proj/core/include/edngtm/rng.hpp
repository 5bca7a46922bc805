#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace edngtm {

/// Seedable generator used everywhere randomness is needed.
///
/// Engine is std::mt19937_64. Real-valued draws are derived from the raw 64-bit
/// output by this class (not by std:: distributions, whose algorithms are
/// implementation-defined), so sequences are identical across standard libraries:
///   uniform() = (next() >> 11) * 2^-53, in [0, 1)
///   normal()  = Box-Muller on two uniforms, no cached spare
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi]; returns `lo` exactly when lo == hi.
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal();

  /// Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  /// Engine state as text (std::mt19937_64 stream format).
  std::string serialize() const;
  static Rng deserialize(const std::string& state);

  bool operator==(const Rng& other) const { return engine_ == other.engine_; }

  /// SplitMix64 finalizer; decorrelates (seed, stream) pairs for sub-generators.
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream);

 private:
  std::mt19937_64 engine_;
};

}  // namespace edngtm
