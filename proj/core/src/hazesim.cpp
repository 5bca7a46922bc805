#include "edngtm/hazesim.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

namespace edngtm::haze {

void HazeParams::validate() const {
  require(beta_range.first > 0.0 && beta_range.first <= beta_range.second, "haze: beta range must satisfy 0 < lo <= hi, got [",
          beta_range.first, ", ", beta_range.second, "]");
  if (beta) require(*beta > 0.0, "haze: beta must be positive, got ", *beta);
  for (float a : airlight) require(a >= 0.0f && a <= 1.0f, "haze: airlight components must lie in [0, 1]");
}

double sample_beta(std::pair<double, double> range, Rng& rng) {
  require(range.first > 0.0 && range.first <= range.second, "sample_beta: range must satisfy 0 < lo <= hi, got [",
          range.first, ", ", range.second, "]");
  return rng.uniform(range.first, range.second);
}

TransmissionMap depth_to_transmission(const DepthMap& depth, double beta) {
  require(beta > 0.0, "depth_to_transmission: beta must be positive, got ", beta);
  TransmissionMap t(depth.height(), depth.width());
  for (std::size_t i = 0; i < depth.size(); ++i) {
    require(depth[i] >= 0.0f, "depth_to_transmission: negative depth ", depth[i], " at index ", i);
    t[i] = static_cast<float>(std::exp(-beta * depth[i]));
  }
  return t;
}

ImageBuf apply_haze(const ImageBuf& clear, const TransmissionMap& transmission, const Airlight& airlight) {
  require(clear.channels() == 3, "apply_haze: expected a 3-channel image");
  require(transmission.height() == clear.height() && transmission.width() == clear.width(), "apply_haze: image ",
          clear.height(), "x", clear.width(), " and transmission ", transmission.height(), "x", transmission.width(),
          " differ in extent");
  ImageBuf out(clear.height(), clear.width(), 3);
  for (std::size_t i = 0; i < clear.pixel_count(); ++i) {
    const double t = transmission[i];
    for (int c = 0; c < 3; ++c)
      out.values()[3 * i + c] = static_cast<float>(clear.values()[3 * i + c] * t + airlight[c] * (1.0 - t));
  }
  return out;
}

DepthMap normalize_depth(const DepthMap& depth) {
  const float peak = *std::max_element(depth.values().begin(), depth.values().end());
  if (peak <= 0.0f) return depth;
  DepthMap out = depth;
  for (float& v : out.values()) v /= peak;
  return out;
}

SynthesizedPair synthesize_pair(const ImageBuf& clear, const DepthMap& depth, const HazeParams& params,
                                std::uint64_t index) {
  params.validate();
  require(depth.height() == clear.height() && depth.width() == clear.width(), "synthesize_pair: depth ",
          depth.height(), "x", depth.width(), " does not match image ", clear.height(), "x", clear.width());
  for (float d : depth.values()) require(d >= 0.0f, "synthesize_pair: depth map has negative values");
  const DepthMap normalized = normalize_depth(depth);
  Rng rng(params.seed ^ index);
  const double beta = params.beta ? *params.beta : sample_beta(params.beta_range, rng);
  if (std::all_of(normalized.values().begin(), normalized.values().end(), [](float v) { return v == 0.0f; }))
    spdlog::warn("synthesize_pair: depth map is all zero; output is haze-free (t = 1)");
  TransmissionMap t = depth_to_transmission(normalized, beta);
  return {apply_haze(clear, t, params.airlight), std::move(t), beta};
}

}  // namespace edngtm::haze
