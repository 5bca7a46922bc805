#include "edngtm/losses.hpp"

#include <array>

#include "edngtm/checkpoint.hpp"
#include "edngtm/rng.hpp"

namespace edngtm::loss {

void LossWeights::validate() const {
  require(adversarial >= 0 && mse >= 0 && perceptual >= 0 && critic >= 0, "loss weights must be non-negative");
}

namespace {

struct VggLayer {
  const char* name;
  int in;
  int out;
  bool pool_before;
};

constexpr std::array<VggLayer, 7> kLayers{{
    {"conv1_1", 3, 64, false},
    {"conv1_2", 64, 64, false},
    {"conv2_1", 64, 128, true},
    {"conv2_2", 128, 128, false},
    {"conv3_1", 128, 256, true},
    {"conv3_2", 256, 256, false},
    {"conv3_3", 256, 256, false},
}};

Var lookup(const Bindings& b, const std::string& name) {
  auto it = b.find(name);
  require(it != b.end(), "feature extractor: missing parameter '", name, "'");
  return it->second;
}

}  // namespace

Shape FeatureExtractor::output_shape(const Shape& input) const {
  require(input.size() == 4 && input[1] == 3, "feature extractor expects N x 3 x H x W, got ", to_string(input));
  return {input[0], 256, (input[2] / 2) / 2, (input[3] / 2) / 2};
}

FeatureExtractor build_feature_extractor(std::uint64_t seed) {
  Rng rng(Rng::mix(seed, 0xFE));
  FeatureExtractor fe;
  for (const auto& l : kLayers) {
    fe.params.add(std::string(l.name) + ".weight", kaiming_normal<float>({l.out, l.in, 3, 3}, l.in * 9, rng));
    fe.params.add(std::string(l.name) + ".bias", Tensor<float>({l.out}));
  }
  return fe;
}

FeatureExtractor load_feature_extractor(const std::string& path) {
  const CheckpointFile file = read_checkpoint(path);
  FeatureExtractor fe;
  for (const auto& l : kLayers) {
    for (const char* part : {".weight", ".bias"}) {
      const std::string name = std::string(l.name) + part;
      auto it = file.tensors.find(name);
      require(it != file.tensors.end(), "feature weights '", path, "' lack tensor '", name, "'");
      const Shape want = part[1] == 'w' ? Shape{l.out, l.in, 3, 3} : Shape{l.out};
      require(it->second.shape() == want, "feature weights: '", name, "' has shape ", to_string(it->second.shape()),
              ", expected ", to_string(want));
      fe.params.add(name, it->second);
    }
  }
  return fe;
}

template <typename T>
Var extract_features(Tape<T>& tape, const Bindings& extractor, Var image) {
  const auto& x = tape.value(image);
  require(x.rank() == 4 && x.dim(1) == 3 && x.dim(2) >= 4 && x.dim(3) >= 4,
          "feature extractor expects N x 3 x H x W with H, W >= 4, got ", to_string(x.shape()));
  Var h = image;
  for (const auto& l : kLayers) {
    if (l.pool_before) h = maxpool2d(tape, h, 2, 2);
    const std::string name(l.name);
    h = relu(tape, conv2d(tape, h, lookup(extractor, name + ".weight"), lookup(extractor, name + ".bias"), 1));
  }
  return h;
}

template <typename T>
Var adversarial_loss(Tape<T>& tape, Var fake_scores) {
  require(tape.value(fake_scores).size() >= 1, "adversarial_loss: empty batch");
  return scale(tape, mean(tape, fake_scores), T(-1));
}

template <typename T>
Var mse_loss(Tape<T>& tape, Var generated, Var truth) {
  return mean_squared_error(tape, generated, truth);
}

template <typename T>
Var perceptual_loss(Tape<T>& tape, Var generated, Var truth, const Bindings& extractor) {
  require(tape.value(generated).shape() == tape.value(truth).shape(), "perceptual_loss: shape mismatch ",
          to_string(tape.value(generated).shape()), " vs ", to_string(tape.value(truth).shape()));
  const Var fg = extract_features(tape, extractor, generated);
  const Tensor<T> truth_features = [&] {
    Tape<T> side;
    Bindings frozen;
    for (const auto& [name, v] : extractor) frozen.emplace(name, side.leaf(tape.value(v), false));
    return side.value(extract_features(side, frozen, side.leaf(tape.value(truth), false)));
  }();
  return mean_squared_error(tape, fg, tape.leaf(truth_features, false));
}

template <typename T>
Var integral_loss(Tape<T>& tape, Var adversarial, Var mse, Var perceptual, const LossWeights& w) {
  Var total = scale(tape, adversarial, static_cast<T>(w.adversarial));
  total = add(tape, total, mse, static_cast<T>(w.mse));
  return add(tape, total, perceptual, static_cast<T>(w.perceptual));
}

template <typename T>
Var critic_loss(Tape<T>& tape, Var real_scores, Var fake_scores, double w4, SignMode mode) {
  require(tape.value(real_scores).shape() == tape.value(fake_scores).shape(), "critic_loss: batch mismatch ",
          to_string(tape.value(real_scores).shape()), " vs ", to_string(tape.value(fake_scores).shape()));
  const Var diff = mode == SignMode::PaperVerbatim ? add(tape, real_scores, fake_scores, T(-1))
                                                   : add(tape, fake_scores, real_scores, T(-1));
  return scale(tape, mean(tape, diff), static_cast<T>(w4));
}

#define EDNGTM_INSTANTIATE_LOSSES(T)                                                  \
  template Var extract_features(Tape<T>&, const Bindings&, Var);                      \
  template Var adversarial_loss(Tape<T>&, Var);                                       \
  template Var mse_loss(Tape<T>&, Var, Var);                                          \
  template Var perceptual_loss(Tape<T>&, Var, Var, const Bindings&);                  \
  template Var integral_loss(Tape<T>&, Var, Var, Var, const LossWeights&);            \
  template Var critic_loss(Tape<T>&, Var, Var, double, SignMode);

EDNGTM_INSTANTIATE_LOSSES(float)
EDNGTM_INSTANTIATE_LOSSES(double)

#undef EDNGTM_INSTANTIATE_LOSSES

}  // namespace edngtm::loss
