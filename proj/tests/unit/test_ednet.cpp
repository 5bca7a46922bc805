#include <doctest.h>

#include <cmath>

#include "edngtm/autodiff.hpp"
#include "edngtm/gradcheck.hpp"
#include "edngtm/net.hpp"
#include "edngtm/ops.hpp"
#include "oracles.hpp"
#include "scenes.hpp"

using namespace edngtm;
using namespace edngtm::net;
using testing_support::random_tensor;

namespace {

NetSpec tiny(int depth, int base) {
  NetSpec s;
  s.depth = depth;
  s.base_width = base;
  return s;
}

std::size_t conv_count(int in, int out, int k) { return static_cast<std::size_t>(in * out * k * k + out); }

double swish(double x) { return x / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("generator parameter count matches the layer list") {
  // depth 1, base 1: stage width 1, bottleneck width 2, four-channel input.
  const std::size_t encoder = conv_count(4, 1, 3) + conv_count(1, 1, 3) + conv_count(1, 1, 3);
  const std::size_t bottleneck = conv_count(1, 2, 3) + conv_count(2, 2, 3);
  const std::size_t spp = conv_count(8, 2, 1);
  const std::size_t decoder = conv_count(2, 2, 3) + conv_count(2, 1, 3) + conv_count(2, 1, 3) + conv_count(1, 1, 3);
  const std::size_t head = conv_count(1, 3, 1);
  CHECK(encoder + bottleneck + spp + decoder + head == 225);

  NetSpec spec = tiny(1, 1);
  CHECK(build_generator(spec, 1).params.parameter_count() == 225);

  SUBCASE("removing the pyramid drops exactly its 1x1 conv") {
    for (int base : {1, 3, 8}) {
      NetSpec with = tiny(2, base), without = tiny(2, base);
      without.use_spp = false;
      const std::size_t c = static_cast<std::size_t>(with.bottleneck_width());
      CHECK(build_generator(with, 1).params.parameter_count() -
                build_generator(without, 1).params.parameter_count() ==
            4 * c * c + c);
    }
  }
  SUBCASE("transposed upsampling swaps a 3x3 conv for a 2x2 transposed kernel") {
    spec.upsample = UpsampleMode::Transposed;
    CHECK(build_generator(spec, 1).params.parameter_count() == 225 - conv_count(2, 1, 3) + (2 * 1 * 4 + 1));
  }
}

TEST_CASE("initialization is seeded") {
  const NetSpec spec = NetSpec::toy();
  CHECK(build_generator(spec, 5).params == build_generator(spec, 5).params);
  CHECK_FALSE(build_generator(spec, 5).params == build_generator(spec, 6).params);
  CHECK(build_discriminator(spec, 5).params == build_discriminator(spec, 5).params);
  const auto g = build_generator(spec, 5);
  for (const auto& [name, t] : g.params.tensors()) {
    if (name.ends_with(".bias")) {
      for (float v : t.values()) CHECK(v == 0.0f);
    }
  }
}

TEST_CASE("spec contract") {
  NetSpec spec = NetSpec::toy();
  CHECK_NOTHROW(spec.validate());
  spec.guidance = false;
  CHECK_THROWS_AS(spec.validate(), ContractViolation);
  spec.in_channels = 3;
  CHECK_NOTHROW(spec.validate());
  spec.guidance = true;
  CHECK_THROWS_AS(build_generator(spec, 1), ContractViolation);

  spec = NetSpec::toy();
  spec.spp_kernels = {5, 4};
  CHECK_THROWS_AS(build_generator(spec, 1), ContractViolation);
  spec.spp_kernels = {5, 5};
  CHECK_THROWS_AS(build_discriminator(spec, 1), ContractViolation);
  spec = NetSpec::toy();
  spec.depth = 0;
  CHECK_THROWS_AS(spec.validate(), ContractViolation);
  spec = NetSpec::toy();
  spec.base_width = 0;
  CHECK_THROWS_AS(spec.validate(), ContractViolation);

  spec = NetSpec::toy();
  spec.upsample = UpsampleMode::Transposed;
  spec.instance_norm = true;
  CHECK(NetSpec::parse(spec.serialize()) == spec);
  CHECK_THROWS_AS(NetSpec::parse("depth=3"), ContractViolation);
}

TEST_CASE("spp block") {
  SUBCASE("each branch matches the pooling oracle") {
    Rng rng(11);
    const std::vector<int> kernels{5, 9, 13};
    Tensor<double> x = random_tensor<double>({1, 2, 8, 8}, rng);
    const std::vector<Tensor<double>> branches{x, oracle::maxpool(x, 5, 1), oracle::maxpool(x, 9, 1),
                                               oracle::maxpool(x, 13, 1)};
    for (int b = 0; b < 4; ++b) {
      // 1x1 weights that copy concat channels (2b, 2b+1) straight through.
      Tensor<double> w({2, 8, 1, 1});
      w.at(0, 2 * b, 0, 0) = 1.0;
      w.at(1, 2 * b + 1, 0, 0) = 1.0;
      Tape<double> tape;
      const Bindings bind{{"spp.weight", tape.leaf(w, false)}, {"spp.bias", tape.leaf(Tensor<double>({2}), false)}};
      const auto& y = tape.value(spp_block(tape, tape.leaf(x, false), kernels, bind, "spp"));
      REQUIRE(y.shape() == Shape{1, 2, 8, 8});
      const auto want = branches[static_cast<std::size_t>(b)].values();
      for (std::size_t i = 0; i < want.size(); ++i) CHECK(y.values()[i] == doctest::Approx(swish(want[i])).epsilon(1e-12));
    }
  }
  SUBCASE("constant input gives a spatially constant output") {
    Rng rng(2);
    Tensor<double> x({1, 3, 9, 7});
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < 63; ++i) x.values()[static_cast<std::size_t>(c * 63 + i)] = 0.1 * (c + 1);
    Tape<double> tape;
    const Bindings bind{{"p.weight", tape.leaf(random_tensor<double>({3, 12, 1, 1}, rng), false)},
                        {"p.bias", tape.leaf(random_tensor<double>({3}, rng), false)}};
    const std::vector<int> kernels{5, 9, 13};
    const auto& y = tape.value(spp_block(tape, tape.leaf(x, false), kernels, bind, "p"));
    REQUIRE(y.shape() == x.shape());
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < 63; ++i)
        CHECK(y.values()[static_cast<std::size_t>(c * 63 + i)] == y.values()[static_cast<std::size_t>(c * 63)]);
  }
  SUBCASE("three kernels quadruple the merged channels") {
    NetSpec spec = tiny(4, 16);
    spec.guidance = false;
    spec.in_channels = 3;
    const auto g = build_generator(spec, 1);
    CHECK(g.params.at("bottleneck.spp.weight").shape() == Shape{256, 1024, 1, 1});
  }
  SUBCASE("even kernels are rejected") {
    Tape<double> tape;
    const Bindings bind{{"p.weight", tape.leaf(Tensor<double>({1, 2, 1, 1}), false)},
                        {"p.bias", tape.leaf(Tensor<double>({1}), false)}};
    const std::vector<int> kernels{4};
    CHECK_THROWS_AS(spp_block(tape, tape.leaf(Tensor<double>({1, 1, 4, 4}), false), kernels, bind, "p"),
                    ContractViolation);
  }
}

TEST_CASE("generator forward shapes and range") {
  const NetSpec spec = NetSpec::toy();
  const auto g = build_generator(spec, 3);
  Rng rng(4);
  const Tensor<float> rgb = random_tensor<float>({1, 3, 64, 64}, rng, 1.0);
  Tensor<float> x = rgb, t({1, 1, 64, 64});
  for (auto& v : x.values()) v = std::abs(v);
  for (auto& v : t.values()) v = static_cast<float>(rng.uniform());
  const Tensor<float> y = generate(g, x, &t);
  REQUIRE(y.shape() == Shape{1, 3, 64, 64});
  for (float v : y.values()) {
    CHECK(v > 0.0f);
    CHECK(v < 1.0f);
  }

  SUBCASE("extents must be multiples of 2^depth") {
    Tensor<float> bad({1, 3, 60, 64}), bad_t({1, 1, 60, 64});
    CHECK_THROWS_WITH_AS(generate(g, bad, &bad_t), doctest::Contains("multiples of 8"), ContractViolation);
  }
  SUBCASE("guidance presence must match the spec") {
    CHECK_THROWS_AS(generate(g, x, nullptr), ContractViolation);
    NetSpec plain = spec;
    plain.guidance = false;
    plain.in_channels = 3;
    const auto g3 = build_generator(plain, 3);
    CHECK(generate(g3, x, nullptr).shape() == Shape{1, 3, 64, 64});
    CHECK_THROWS_AS(generate(g3, x, &t), ContractViolation);
  }
  SUBCASE("non-square batched inputs keep their extents") {
    Tensor<float> wide({2, 3, 16, 40}), wide_t({2, 1, 16, 40}, 0.5f);
    CHECK(generate(g, wide, &wide_t).shape() == Shape{2, 3, 16, 40});
  }
  SUBCASE("transposed upsampling and instance norm") {
    NetSpec alt = spec;
    alt.upsample = UpsampleMode::Transposed;
    alt.instance_norm = true;
    const Tensor<float> z = generate(build_generator(alt, 3), x, &t);
    CHECK(z.shape() == Shape{1, 3, 64, 64});
    for (float v : z.values()) CHECK(std::isfinite(v));
  }
}

TEST_CASE("discriminator") {
  const NetSpec spec = NetSpec::toy();
  const auto d = build_discriminator(spec, 9);
  Rng rng(5);

  const Tensor<float> zero = score(d, Tensor<float>({1, 3, 32, 32}));
  REQUIRE(zero.shape() == Shape{1, 1});
  CHECK(std::isfinite(zero.values()[0]));

  SUBCASE("no coupling across the batch") {
    Tensor<float> a = random_tensor<float>({1, 3, 32, 32}, rng), b = random_tensor<float>({1, 3, 32, 32}, rng);
    Tensor<float> both({2, 3, 32, 32});
    std::copy(a.values().begin(), a.values().end(), both.values().begin());
    std::copy(b.values().begin(), b.values().end(), both.values().begin() + static_cast<long>(a.size()));
    const Tensor<float> s = score(d, both);
    REQUIRE(s.shape() == Shape{2, 1});
    CHECK(s.values()[0] == doctest::Approx(score(d, a).values()[0]).epsilon(1e-6));
    CHECK(s.values()[1] == doctest::Approx(score(d, b).values()[0]).epsilon(1e-6));
  }
  SUBCASE("score responds to brightness") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const auto dn = build_discriminator(spec, seed);
      Tensor<float> img(Shape{1, 3, 32, 32});
      for (auto& v : img.values()) v = static_cast<float>(rng.uniform(0.0, 0.5));
      Tensor<float> bright = img;
      for (auto& v : bright.values()) v *= 2.0f;
      CHECK(std::abs(score(dn, bright).values()[0] - score(dn, img).values()[0]) > 0.0f);
    }
  }
  SUBCASE("stage widths mirror the generator encoder") {
    const auto g = build_generator(spec, 9);
    const std::vector<int> want{8, 16, 32};
    CHECK(encoder_widths(g.params, spec.depth) == want);
    CHECK(encoder_widths(d.params, spec.depth) == want);
    for (int s = 0; s < spec.depth; ++s) CHECK(spec.stage_width(s) == 8 << s);
    CHECK(d.params.at("enc0.conv1.weight").shape() == Shape{8, 3, 3, 3});
    CHECK(g.params.at("enc0.conv1.weight").shape() == Shape{8, 4, 3, 3});
    CHECK(d.params.at("head.weight").shape() == Shape{1, 32});
  }
  SUBCASE("rejects indivisible extents") {
    CHECK_THROWS_AS(score(d, Tensor<float>({1, 3, 12, 32})), ContractViolation);
  }
}

TEST_CASE("network gradients agree with finite differences") {
  NetSpec spec = tiny(2, 2);
  spec.spp_kernels = {3, 5};
  Rng rng(8);
  Tensor<double> rgb({1, 3, 8, 8});
  for (auto& v : rgb.values()) v = rng.uniform();
  Tensor<double> guide({1, 1, 8, 8});
  for (auto& v : guide.values()) v = rng.uniform(0.1, 1.0);
  GradCheckOptions opt;
  opt.samples_per_tensor = 6;

  SUBCASE("generator, sum of outputs") {
    const auto g = build_generator(spec, 2).params.cast<double>();
    const LossBuilder<double> build = [&](Tape<double>& t, const Bindings& p, Var x) {
      return sum(t, generator_forward(t, spec, p, x, t.leaf(guide, false)));
    };
    const auto report = grad_check(build, g, rgb, opt);
    CHECK(report.entries.size() == g.size() + 1);
    for (const auto& e : report.entries) CHECK(e.checked > 0);
    CHECK(report.worst() < 1e-3);
  }
  SUBCASE("discriminator score") {
    const auto d = build_discriminator(spec, 2).params.cast<double>();
    const LossBuilder<double> build = [&](Tape<double>& t, const Bindings& p, Var x) {
      return sum(t, discriminator_forward(t, spec, p, x));
    };
    const auto report = grad_check(build, d, rgb, opt);
    CHECK(report.entries.size() == d.size() + 1);
    for (const auto& e : report.entries) CHECK(e.checked > 0);
    CHECK(report.worst() < 1e-3);
  }
}

TEST_CASE("forward and backward are deterministic") {
  const NetSpec spec = NetSpec::toy();
  Rng rng(12);
  const Tensor<float> x = random_tensor<float>({1, 3, 16, 16}, rng);
  const Tensor<float> t = random_tensor<float>({1, 1, 16, 16}, rng);
  auto run = [&] {
    const auto g = build_generator(spec, 77);
    Tape<float> tape;
    const Bindings b = bind(tape, g.params, true);
    const Var out = generator_forward(tape, spec, b, tape.leaf(x, false), tape.leaf(t, false));
    tape.backward(sum_squares(tape, out));
    std::vector<float> flat(tape.value(out).values().begin(), tape.value(out).values().end());
    for (const auto& [name, v] : b) {
      const auto grad = tape.grad(v);
      flat.insert(flat.end(), grad.values().begin(), grad.values().end());
    }
    return flat;
  };
  CHECK(run() == run());
}
