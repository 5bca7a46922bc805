#pragma once

#include "edngtm/image.hpp"

namespace edngtm::dcp {

/// Dark-channel-prior knobs. Defaults follow the classic DCP recipe.
struct DcpParams {
  int patch = 15;                   ///< odd window for the dark channel
  double omega = 0.95;              ///< fraction of haze removed
  double airlight_fraction = 0.001; ///< brightest dark-channel fraction searched for A
  double t0 = 0.1;                  ///< transmission floor
  int gf_radius = 40;
  double gf_eps = 1e-3;

  void validate() const;
};

/// Floor applied to every airlight component.
inline constexpr float kAirlightFloor = 0.05f;

/// min over the (clamped) patch window of the per-pixel channel minimum.
ImageBuf dark_channel(const ImageBuf& image, int patch);

/// Among the ceil(fraction * H * W) pixels with the highest dark channel, returns the
/// color of the one with the largest channel sum (ties: lowest row-major index).
Airlight estimate_airlight(const ImageBuf& image, const ImageBuf& dark, double fraction);

/// Raw transmission 1 - omega * dark_channel(I / A), clamped to [0, 1].
TransmissionMap estimate_transmission(const ImageBuf& image, const Airlight& airlight, const DcpParams& params);

/// Mean over the (2r+1)^2 window clamped to the image, for single-channel input.
ImageBuf box_filter(const ImageBuf& image, int radius);

/// Edge-preserving guided filter q = mean(a) * I + mean(b) (single channel).
ImageBuf guided_filter(const ImageBuf& guide, const ImageBuf& source, int radius, double eps);

/// J = (I - A) / max(t, t0) + A, clamped to [0, 1].
ImageBuf recover_radiance(const ImageBuf& image, const TransmissionMap& transmission, const Airlight& airlight,
                          double t0);

struct DehazeResult {
  ImageBuf radiance;
  TransmissionMap transmission;  ///< guided-filter refined, clamped to [t0, 1]
  Airlight airlight{};
};

DehazeResult dcp_dehaze(const ImageBuf& image, const DcpParams& params = {});

/// Which form of the refined transmission the network sees.
enum class GuidanceMode { Transmission, OneMinusTransmission };

TransmissionMap to_guidance(const TransmissionMap& refined, GuidanceMode mode);

}  // namespace edngtm::dcp
