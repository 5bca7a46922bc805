#pragma once

#include <cstdint>

#include "edngtm/gradcheck.hpp"
#include "edngtm/losses.hpp"
#include "edngtm/net.hpp"

namespace edngtm {

struct ModelGradCheckConfig {
  net::NetSpec spec = net::NetSpec::toy();
  int size = 16;  ///< square input extent
  std::uint64_t seed = 1;
  loss::LossWeights weights;
  loss::SignMode sign_mode = loss::SignMode::Functional;
  GradCheckOptions options;
};

/// Finite-difference checks, all in double precision, of
///   generator: integral loss w.r.t. every generator tensor and the hazy input,
///   critic:    critic loss w.r.t. every critic tensor and the real image,
///   losses:    integral loss w.r.t. the generated image (adversarial, MSE and
///              perceptual paths together, critic and extractor frozen).
struct ModelGradCheckResult {
  GradCheckReport generator;
  GradCheckReport critic;
  GradCheckReport losses;

  double worst() const;
};

ModelGradCheckResult model_grad_check(const ModelGradCheckConfig& config);

}  // namespace edngtm
