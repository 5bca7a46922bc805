#pragma once

#include <cstdint>
#include <string>

#include "edngtm/autodiff.hpp"
#include "edngtm/params.hpp"

namespace edngtm::loss {

/// Weights of the generator objective (w1..w3) and the critic objective (w4).
struct LossWeights {
  double adversarial = 100.0;  // w1
  double mse = 100.0;          // w2
  double perceptual = 100.0;   // w3
  double critic = 1.0;         // w4

  void validate() const;
};

/// Sign convention of the critic loss.
enum class SignMode {
  Functional,     ///< w4 * mean(D(G(z)) - D(I)): minimizing it opposes the adversarial loss
  PaperVerbatim,  ///< w4 * mean(D(I) - D(G(z)))
};

/// Frozen VGG16-style stack truncated after conv3_3 (+ReLU):
/// 64,64 | pool | 128,128 | pool | 256,256,256. Never trained.
struct FeatureExtractor {
  ParamStore<float> params;

  /// Feature map shape for an N x 3 x H x W input.
  Shape output_shape(const Shape& input) const;
};

FeatureExtractor build_feature_extractor(std::uint64_t seed);

/// Loads externally converted weights stored in the checkpoint format
/// (names conv1_1.weight ... conv3_3.bias). Throws ParseError on malformed files
/// and ContractViolation on missing or misshaped tensors.
FeatureExtractor load_feature_extractor(const std::string& path);

/// Extractor parameters are bound without gradients.
template <typename T>
Var extract_features(Tape<T>& tape, const Bindings& extractor, Var image);

/// mean(-scores) over the batch.
template <typename T>
Var adversarial_loss(Tape<T>& tape, Var fake_scores);

/// Mean squared difference over every element.
template <typename T>
Var mse_loss(Tape<T>& tape, Var generated, Var truth);

/// MSE between extracted features; gradients flow into `generated` only.
template <typename T>
Var perceptual_loss(Tape<T>& tape, Var generated, Var truth, const Bindings& extractor);

/// w1 * adv + w2 * mse + w3 * per.
template <typename T>
Var integral_loss(Tape<T>& tape, Var adversarial, Var mse, Var perceptual, const LossWeights& weights);

template <typename T>
Var critic_loss(Tape<T>& tape, Var real_scores, Var fake_scores, double w4, SignMode mode);

/// Plain-number form of the generator objective, used for reporting.
inline double integral_loss(double adversarial, double mse, double perceptual, const LossWeights& w) {
  return w.adversarial * adversarial + w.mse * mse + w.perceptual * perceptual;
}

}  // namespace edngtm::loss
