#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "edngtm/autodiff.hpp"
#include "edngtm/params.hpp"

namespace edngtm::net {

enum class UpsampleMode {
  NearestConv,  ///< nearest-neighbour x2 followed by a 3x3 conv
  Transposed,   ///< 2x2 stride-2 transposed conv
};

/// Architecture of the encoder-decoder generator and its encoder-style critic.
struct NetSpec {
  int in_channels = 4;   ///< RGB + guidance; 3 when guidance is off
  int out_channels = 3;
  int depth = 4;         ///< number of 2x downscaling stages
  int base_width = 64;   ///< channels of the first stage, doubled per stage
  std::vector<int> spp_kernels{5, 9, 13};
  bool use_spp = true;
  bool guidance = true;
  bool instance_norm = false;
  UpsampleMode upsample = UpsampleMode::NearestConv;

  /// Depth 3, base width 8: the small configuration used by tests.
  static NetSpec toy();

  void validate() const;
  int stage_width(int stage) const { return base_width << stage; }
  int bottleneck_width() const { return base_width << depth; }
  int required_multiple() const { return 1 << depth; }

  std::string serialize() const;
  static NetSpec parse(const std::string& text);

  friend bool operator==(const NetSpec&, const NetSpec&) = default;
};

template <typename T>
struct GeneratorState {
  NetSpec spec;
  ParamStore<T> params;
};

template <typename T>
struct DiscriminatorState {
  NetSpec spec;
  ParamStore<T> params;
};

/// He-initialized generator; identical (spec, seed) give identical parameters.
GeneratorState<float> build_generator(const NetSpec& spec, std::uint64_t seed);

/// Critic sharing the generator's encoder stage schedule (3-channel input),
/// followed by global average pooling and a linear map to one unbounded score.
DiscriminatorState<float> build_discriminator(const NetSpec& spec, std::uint64_t seed);

/// Input concatenated with stride-1 max pools of each kernel size, then a 1x1 conv
/// and Swish back to the input channel count. `bindings` must hold
/// `<prefix>.weight` / `<prefix>.bias`.
template <typename T>
Var spp_block(Tape<T>& tape, Var input, std::span<const int> kernels, const Bindings& bindings,
              const std::string& prefix, bool instance_norm = false);

/// N x 3 x H x W (+ N x 1 x H x W guidance) -> N x 3 x H x W in (0, 1).
/// Pass an invalid Var for `guidance` when spec.guidance is false.
template <typename T>
Var generator_forward(Tape<T>& tape, const NetSpec& spec, const Bindings& params, Var rgb, Var guidance);

/// N x 3 x H x W -> N x 1 scores.
template <typename T>
Var discriminator_forward(Tape<T>& tape, const NetSpec& spec, const Bindings& params, Var image);

/// Gradient-free convenience wrappers.
Tensor<float> generate(const GeneratorState<float>& generator, const Tensor<float>& rgb,
                       const Tensor<float>* guidance);
Tensor<float> score(const DiscriminatorState<float>& discriminator, const Tensor<float>& image);

/// Output channels of each encoder stage, read back from parameter shapes.
std::vector<int> encoder_widths(const ParamStore<float>& params, int depth);

}  // namespace edngtm::net
