#include "edngtm/model_gradcheck.hpp"

#include <algorithm>

#include "edngtm/rng.hpp"

namespace edngtm {

double ModelGradCheckResult::worst() const {
  return std::max({generator.worst(), critic.worst(), losses.worst()});
}

namespace {

Tensor<double> uniform_tensor(const Shape& shape, Rng& rng, double lo, double hi) {
  Tensor<double> t(shape);
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace

ModelGradCheckResult model_grad_check(const ModelGradCheckConfig& cfg) {
  cfg.spec.validate();
  require(cfg.size % cfg.spec.required_multiple() == 0 && cfg.size % 4 == 0, "model_grad_check: size ", cfg.size,
          " must be a multiple of ", std::max(4, cfg.spec.required_multiple()));
  const net::NetSpec spec = cfg.spec;
  const ParamStore<double> g_params = net::build_generator(spec, cfg.seed).params.cast<double>();
  ParamStore<double> d_params = net::build_discriminator(spec, cfg.seed).params.cast<double>();
  const ParamStore<double> fe_params = loss::build_feature_extractor(cfg.seed).params.cast<double>();

  Rng rng(Rng::mix(cfg.seed, 0x6C));
  const int n = 1, s = cfg.size;
  const Tensor<double> hazy = uniform_tensor({n, 3, s, s}, rng, 0.0, 1.0);
  const Tensor<double> guidance = uniform_tensor({n, 1, s, s}, rng, 0.1, 1.0);
  const Tensor<double> clear = uniform_tensor({n, 3, s, s}, rng, 0.0, 1.0);
  const Tensor<double> fake = uniform_tensor({n, 3, s, s}, rng, 0.0, 1.0);

  // Stack of frozen critic + extractor on top of a generated image.
  auto loss_stack = [&](Tape<double>& tape, Var generated) {
    const Bindings d = bind(tape, d_params, false);
    const Bindings fe = bind(tape, fe_params, false);
    const Var truth = tape.leaf(clear, false);
    const Var adv = loss::adversarial_loss(tape, net::discriminator_forward(tape, spec, d, generated));
    const Var mse = loss::mse_loss(tape, generated, truth);
    const Var per = loss::perceptual_loss(tape, generated, truth, fe);
    return loss::integral_loss(tape, adv, mse, per, cfg.weights);
  };

  ModelGradCheckResult result;
  result.generator = grad_check<double>(
      [&](Tape<double>& tape, const Bindings& g, Var input) {
        const Var gd = spec.guidance ? tape.leaf(guidance, false) : Var{};
        return loss_stack(tape, net::generator_forward(tape, spec, g, input, gd));
      },
      g_params, hazy, cfg.options);

  result.critic = grad_check<double>(
      [&](Tape<double>& tape, const Bindings& d, Var real) {
        const Var real_scores = net::discriminator_forward(tape, spec, d, real);
        const Var fake_scores = net::discriminator_forward(tape, spec, d, tape.leaf(fake, false));
        return loss::critic_loss(tape, real_scores, fake_scores, cfg.weights.critic, cfg.sign_mode);
      },
      d_params, clear, cfg.options);

  result.losses = grad_check<double>([&](Tape<double>& tape, const Bindings&, Var generated) {
    return loss_stack(tape, generated);
  }, ParamStore<double>{}, fake, cfg.options);
  return result;
}

}  // namespace edngtm
