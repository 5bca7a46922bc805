#pragma once

#include <cstdint>
#include <optional>
#include <utility>

#include "edngtm/image.hpp"
#include "edngtm/rng.hpp"

namespace edngtm::haze {

struct HazeParams {
  std::pair<double, double> beta_range{1.0, 3.0};
  std::optional<double> beta;  ///< fixed scattering coefficient; overrides beta_range
  Airlight airlight{0.9f, 0.9f, 0.9f};
  std::uint64_t seed = 0;

  void validate() const;
};

/// Uniform draw in [lo, hi].
double sample_beta(std::pair<double, double> range, Rng& rng);

/// t(x) = exp(-beta * d(x)).
TransmissionMap depth_to_transmission(const DepthMap& depth, double beta);

/// I = J * t + A * (1 - t) per channel.
ImageBuf apply_haze(const ImageBuf& clear, const TransmissionMap& transmission, const Airlight& airlight);

/// Scales depth so its maximum is 1; an all-zero map is returned unchanged.
DepthMap normalize_depth(const DepthMap& depth);

struct SynthesizedPair {
  ImageBuf hazy;
  TransmissionMap transmission;
  double beta = 0.0;
};

/// Normalizes depth, draws beta (seeded by params.seed ^ index), then hazes `clear`.
SynthesizedPair synthesize_pair(const ImageBuf& clear, const DepthMap& depth, const HazeParams& params,
                                std::uint64_t index = 0);

}  // namespace edngtm::haze
