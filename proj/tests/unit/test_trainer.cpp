#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "edngtm/png_io.hpp"
#include "edngtm/trainer.hpp"
#include "scenes.hpp"
#include "toy_data.hpp"

using namespace edngtm;
using namespace edngtm::train;
using testing_support::TempDir;
using testing_support::toy_config;
using testing_support::toy_pair;
using testing_support::toy_set;

namespace {

std::vector<std::vector<std::string>> read_tsv(const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(path);
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> fields;
    std::istringstream ls(line);
    for (std::string f; std::getline(ls, f, '\t');) fields.push_back(f);
    rows.push_back(fields);
  }
  return rows;
}

bool same_params(const ParamStore<float>& a, const ParamStore<float>& b) { return a == b; }

}  // namespace

TEST_CASE("learning rate schedule") {
  TrainConfig cfg;
  CHECK(lr_at(0, cfg) == 1e-4);
  CHECK(lr_at(199, cfg) == 1e-4);
  CHECK(lr_at(200, cfg) == 1e-4);
  CHECK(lr_at(300, cfg) == doctest::Approx(0.5e-4).epsilon(1e-12));
  CHECK(lr_at(399, cfg) == doctest::Approx(1e-4 / 200).epsilon(1e-12));
  CHECK(lr_at(399, cfg) > 0.0);
  CHECK_THROWS_AS(lr_at(400, cfg), ContractViolation);
  CHECK_THROWS_AS(lr_at(-1, cfg), ContractViolation);

  for (int epochs : {1, 2, 7, 400}) {
    for (int start : {1, epochs / 2, epochs}) {
      if (start < 1) continue;
      cfg.epochs = epochs;
      cfg.decay_start_epoch = start;
      double prev = cfg.lr0;
      for (int e = 0; e < epochs; ++e) {
        const double lr = lr_at(e, cfg);
        if (e < start) CHECK(lr == cfg.lr0);
        CHECK(lr <= prev);
        CHECK(lr > 0.0);
        prev = lr;
      }
    }
  }
}

TEST_CASE("config validation") {
  TrainConfig cfg = toy_config();
  CHECK_NOTHROW(cfg.validate());
  cfg.input_size = 18;
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("multiple of 2^depth"), ContractViolation);
  cfg = toy_config();
  cfg.decay_start_epoch = 3;
  CHECK_THROWS_AS(cfg.validate(), ContractViolation);
  cfg.decay_start_epoch = 0;
  CHECK_THROWS_AS(cfg.validate(), ContractViolation);
  cfg = toy_config();
  cfg.lr0 = 0;
  CHECK_THROWS_AS(Trainer{cfg}, ContractViolation);
  cfg = toy_config();
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), ContractViolation);
  cfg.epochs = 1;
  CHECK_NOTHROW(cfg.validate());
  CHECK(lr_at(0, cfg) == cfg.lr0);
}

TEST_CASE("augmentation") {
  Rng rng(3);
  const int H = 30, W = 45, size = 16;
  // Channels 0 and 1 encode the source column and row; bilinear sampling reproduces linear ramps exactly.
  SamplePair pair{ImageBuf(H, W, 3), ImageBuf(H, W, 3), TransmissionMap(H, W)};
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      pair.hazy.at(y, x, 0) = static_cast<float>(x) / W;
      pair.hazy.at(y, x, 1) = static_cast<float>(y) / H;
      pair.hazy.at(y, x, 2) = 0.5f;
      for (int c = 0; c < 3; ++c) pair.clear.at(y, x, c) = pair.hazy.at(y, x, c) * 0.5f;
      pair.guidance.at(y, x) = static_cast<float>(x) / W;
    }
  const auto out = augment(pair, size, rng);
  REQUIRE(out.size() == 10);

  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& a = out[i];
    CHECK(a.flipped == (i % 2 == 1));
    const Rect& r = a.crop;
    CHECK(r.height >= std::lround(0.8 * H) - 1);
    CHECK(r.width <= W);
    CHECK(r.x >= 0);
    CHECK(r.y >= 0);
    CHECK(r.x + r.width <= W);
    CHECK(r.y + r.height <= H);
    CHECK(std::abs(r.height - static_cast<double>(r.width) * H / W) <= 0.5 + 1e-9);
    CHECK(std::abs(r.width - static_cast<double>(r.height) * W / H) <= 0.5 + 1e-9);
    REQUIRE(a.pair.hazy.height() == size);
    REQUIRE(a.pair.hazy.width() == size);
    REQUIRE(a.pair.guidance.height() == size);

    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const int sx = a.flipped ? size - 1 - x : x;
        const double src_x = r.x + (sx + 0.5) * r.width / size - 0.5;
        const double src_y = r.y + (y + 0.5) * r.height / size - 0.5;
        CHECK(a.pair.hazy.at(y, x, 0) == doctest::Approx(src_x / W).epsilon(1e-5));
        CHECK(a.pair.hazy.at(y, x, 1) == doctest::Approx(src_y / H).epsilon(1e-5));
        CHECK(a.pair.guidance.at(y, x) == a.pair.hazy.at(y, x, 0));
        CHECK(a.pair.clear.at(y, x, 0) == doctest::Approx(0.5 * a.pair.hazy.at(y, x, 0)).epsilon(1e-5));
      }
  }
  SUBCASE("mirrored entries are exact flips of their partners") {
    for (std::size_t i = 0; i < out.size(); i += 2) {
      CHECK(flip_horizontal(out[i + 1].pair.hazy) == out[i].pair.hazy);
      CHECK(flip_horizontal(flip_horizontal(out[i].pair.hazy)) == out[i].pair.hazy);
      CHECK(out[i].crop.x == out[i + 1].crop.x);
    }
  }
  SUBCASE("portrait and landscape keep both sides within half a pixel") {
    for (int trial = 0; trial < 40; ++trial) {
      const int h = 8 + static_cast<int>(rng.below(90)), w = 8 + static_cast<int>(rng.below(90));
      const SamplePair p{ImageBuf(h, w, 3), ImageBuf(h, w, 3), {}};
      for (const auto& a : augment(p, 8, rng)) {
        CHECK(std::abs(a.crop.height - static_cast<double>(a.crop.width) * h / w) <= 0.5 + 1e-9);
        CHECK(std::abs(a.crop.width - static_cast<double>(a.crop.height) * w / h) <= 0.5 + 1e-9);
      }
    }
  }
  SUBCASE("seeded") {
    Rng a(9), b(9);
    const auto x = augment(pair, size, a), y = augment(pair, size, b);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(x[i].pair.hazy == y[i].pair.hazy);
  }
  SUBCASE("degenerate images are skipped") {
    SamplePair tiny{ImageBuf(1, 5, 3), ImageBuf(1, 5, 3), {}};
    CHECK(augment(tiny, size, rng).empty());
  }
  SUBCASE("mismatched rasters are rejected") {
    SamplePair bad{ImageBuf(8, 8, 3), ImageBuf(8, 9, 3), {}};
    CHECK_THROWS_AS(augment(bad, size, rng), ContractViolation);
  }
}

TEST_CASE("training step") {
  const TrainConfig cfg = toy_config();
  const std::vector<SamplePair> batch{testing_support::toy_pair(1, 16, 16)};

  SUBCASE("substeps freeze the other network") {
    Trainer t(cfg);
    const auto g0 = t.generator().params;
    t.critic_update(batch, 1e-3);
    CHECK(same_params(t.generator().params, g0));
    const auto d1 = t.discriminator().params;
    CHECK_FALSE(same_params(d1, net::build_discriminator(cfg.net, cfg.seed).params));
    t.generator_update(batch, 1e-3);
    CHECK(same_params(t.discriminator().params, d1));
    CHECK_FALSE(same_params(t.generator().params, g0));
    CHECK(t.step() == 0);
  }
  SUBCASE("reported losses are consistent and finite") {
    Trainer t(cfg);
    const auto fe = t.feature_extractor().params;
    for (int i = 0; i < 5; ++i) {
      const StepReport r = t.train_step(batch, 1e-4);
      CHECK(r.l_I == doctest::Approx(100 * r.l_adv + 100 * r.l_mse + 100 * r.l_per).epsilon(1e-5));
      for (double v : {r.l_adv, r.l_mse, r.l_per, r.l_I, r.l_D}) CHECK(std::isfinite(v));
      CHECK(r.l_mse >= 0.0);
      CHECK(r.l_per >= 0.0);
      CHECK(r.lr == 1e-4);
    }
    CHECK(t.step() == 5);
    CHECK(same_params(t.feature_extractor().params, fe));
    CHECK(t.generator().params.all_finite());
  }
  SUBCASE("mse-only training steadily lowers the reconstruction error") {
    TrainConfig mse = toy_config(3, 8, 32);
    mse.weights = {0, 1, 0, 1};
    const std::vector<SamplePair> one{testing_support::toy_pair(2, 32, 32)};
    Trainer t(mse);
    std::vector<double> curve;
    for (int i = 0; i < 200; ++i) curve.push_back(t.train_step(one, 1e-3).l_mse);
    for (std::size_t i = 0; i + 50 < curve.size(); ++i) CHECK(curve[i + 50] < curve[i]);
    CHECK(curve.back() < 0.5 * curve.front());
  }
  SUBCASE("zero-weight terms are still reported") {
    TrainConfig mse = cfg;
    mse.weights = {0, 1, 0, 1};
    Trainer t(mse);
    const StepReport r = t.train_step(batch, 1e-4);
    CHECK(r.l_per > 0.0);
    CHECK(r.l_I == doctest::Approx(r.l_mse));
  }
  SUBCASE("weight clipping bounds the critic") {
    TrainConfig clipped = cfg;
    clipped.weight_clip = 0.01;
    Trainer t(clipped);
    t.train_step(batch, 1e-4);
    for (const auto& [name, v] : t.discriminator().params.tensors())
      for (float x : v.values()) CHECK(std::abs(x) <= 0.01f);
  }
  SUBCASE("non-finite inputs are named") {
    Trainer t(cfg);
    auto poisoned = batch;
    poisoned[0].hazy.at(3, 3, 1) = std::nanf("");
    CHECK_THROWS_WITH_AS(t.train_step(poisoned, 1e-4), doctest::Contains("non-finite l_D"), NumericError);
  }
  SUBCASE("malformed batches") {
    Trainer t(cfg);
    CHECK_THROWS_AS(t.train_step({}, 1e-4), ContractViolation);
    auto no_guidance = batch;
    no_guidance[0].guidance = {};
    CHECK_THROWS_AS(t.train_step(no_guidance, 1e-4), ContractViolation);
    std::vector<SamplePair> mixed{batch[0], toy_pair(3, 32, 32)};
    CHECK_THROWS_AS(t.train_step(mixed, 1e-4), ContractViolation);
    CHECK_THROWS_AS(t.train_step(batch, -1.0), ContractViolation);
  }
  SUBCASE("guidance can be disabled") {
    TrainConfig plain = cfg;
    plain.net.guidance = false;
    plain.net.in_channels = 3;
    Trainer t(plain);
    auto no_guidance = batch;
    no_guidance[0].guidance = {};
    CHECK(std::isfinite(t.train_step(no_guidance, 1e-4).l_I));
  }
}

TEST_CASE("trainer checkpoints") {
  TempDir dir;
  const TrainConfig cfg = toy_config();
  const std::vector<SamplePair> batch{toy_pair(4, 16, 16)};
  Trainer t(cfg);
  for (int i = 0; i < 3; ++i) t.train_step(batch, 1e-3);
  t.set_epoch(1);
  t.data_rng().next();

  save_checkpoint(t, dir / "a.ednw");
  Trainer u(cfg);
  load_checkpoint(u, dir / "a.ednw");
  save_checkpoint(u, dir / "b.ednw");
  CHECK(read_file_bytes(dir / "a.ednw") == read_file_bytes(dir / "b.ednw"));
  CHECK(u.step() == 3);
  CHECK(u.epoch() == 1);
  CHECK(u.data_rng().next() == Rng(t.data_rng()).next());

  SUBCASE("continuing from a restored trainer matches the original") {
    for (int i = 0; i < 3; ++i) {
      const StepReport a = t.train_step(batch, 1e-3), b = u.train_step(batch, 1e-3);
      CHECK(a.l_I == b.l_I);
      CHECK(a.l_D == b.l_D);
    }
  }
  SUBCASE("corrupt files never partially apply") {
    auto bytes = read_file_bytes(dir / "a.ednw");
    bytes[14] = '#';
    write_file_bytes(dir / "bad.ednw", bytes);
    Trainer fresh(cfg);
    const auto before = fresh.to_checkpoint();
    CHECK_THROWS_AS(load_checkpoint(fresh, dir / "bad.ednw"), ParseError);
    CHECK(fresh.to_checkpoint() == before);

    auto truncated = read_file_bytes(dir / "a.ednw");
    truncated.resize(truncated.size() - 7);
    write_file_bytes(dir / "short.ednw", truncated);
    CHECK_THROWS_AS(load_checkpoint(fresh, dir / "short.ednw"), ParseError);

    CheckpointFile extra = t.to_checkpoint();
    extra.tensors.emplace("G/stray", Tensor<float>({1}));
    CHECK_THROWS_AS(fresh.restore(extra), ContractViolation);

    CheckpointFile missing = t.to_checkpoint();
    missing.tensors.erase("D.adam_v/head.bias");
    CHECK_THROWS_AS(fresh.restore(missing), ContractViolation);

    CheckpointFile misshaped = t.to_checkpoint();
    misshaped.tensors.at("G/head.bias") = Tensor<float>({4});
    CHECK_THROWS_WITH_AS(fresh.restore(misshaped), doctest::Contains("G/head.bias"), ContractViolation);
    CHECK(fresh.to_checkpoint() == before);
  }
  SUBCASE("architecture mismatch") {
    TrainConfig other = cfg;
    other.net.base_width = 8;
    Trainer wide(other);
    CHECK_THROWS_WITH_AS(load_checkpoint(wide, dir / "a.ednw"), doctest::Contains("architecture"), ContractViolation);
  }
  SUBCASE("inference model") {
    const InferenceModel m = inference_model(read_checkpoint(dir / "a.ednw"));
    CHECK(m.generator.spec == cfg.net);
    CHECK(m.generator.params.tensors() == t.generator().params.tensors());
    CHECK(m.guidance_mode == dcp::GuidanceMode::Transmission);
  }
}

TEST_CASE("training loop") {
  TempDir dir;
  TrainConfig cfg = toy_config();
  const auto data = toy_set(3, 20, 20);

  cfg.out_dir = dir / "run1";
  Trainer a(cfg);
  const TrainSummary sa = train_loop(a, data);
  const auto rows = read_tsv(dir / "run1/metrics.tsv");
  REQUIRE(rows.size() == 2);
  for (std::size_t e = 0; e < rows.size(); ++e) {
    REQUIRE(rows[e].size() == 8);
    CHECK(rows[e][0] == std::to_string(e + 1));
    CHECK(std::stod(rows[e][1]) == doctest::Approx(lr_at(static_cast<int>(e), cfg)));
    CHECK(std::stod(rows[e][5]) == doctest::Approx(sa.epoch_means[e].l_I).epsilon(1e-8));
  }
  CHECK(a.epoch() == 2);
  CHECK(a.step() == 60);

  Trainer back(cfg);
  load_checkpoint(back, sa.final_checkpoint);
  CHECK(back.to_checkpoint() == a.to_checkpoint());
  CHECK(encode_checkpoint(back.to_checkpoint()) == read_file_bytes(sa.final_checkpoint));

  SUBCASE("same seed, same trajectory") {
    cfg.out_dir = dir / "run2";
    Trainer b(cfg);
    const TrainSummary sb = train_loop(b, data);
    for (std::size_t e = 0; e < 2; ++e) {
      CHECK(sb.epoch_means[e].l_I == sa.epoch_means[e].l_I);
      CHECK(sb.epoch_means[e].l_D == sa.epoch_means[e].l_D);
    }
    CHECK(read_file_bytes(sb.final_checkpoint) == read_file_bytes(sa.final_checkpoint));
  }
  SUBCASE("resuming from an interval checkpoint reproduces the run") {
    cfg.out_dir = dir / "run3";
    cfg.checkpoint_interval = 1;
    Trainer first(cfg);
    train_loop(first, data);
    CHECK(std::filesystem::exists(dir / "run3/epoch_0001.ednw"));
    CHECK_FALSE(std::filesystem::exists(dir / "run3/epoch_0002.ednw"));

    cfg.out_dir = dir / "run4";
    Trainer resumed(cfg);
    load_checkpoint(resumed, dir / "run3/epoch_0001.ednw");
    const TrainSummary sr = train_loop(resumed, data);
    REQUIRE(sr.epoch_means.size() == 1);
    CHECK(sr.epoch_means[0].l_I == doctest::Approx(sa.epoch_means[1].l_I).epsilon(1e-6));
    CHECK(read_file_bytes(sr.final_checkpoint) == read_file_bytes(sa.final_checkpoint));
  }
  SUBCASE("different seeds diverge") {
    cfg.out_dir = dir / "run5";
    cfg.seed = 8;
    Trainer c(cfg);
    CHECK(train_loop(c, data).epoch_means[0].l_I != sa.epoch_means[0].l_I);
  }
}

TEST_CASE("dataset loading") {
  TempDir dir;
  std::filesystem::create_directories(dir / "hazy");
  std::filesystem::create_directories(dir / "gt");
  Rng rng(5);
  for (const char* name : {"b.png", "a.png"}) {
    io::save_image(testing_support::quantized_image(rng, 12, 16, 3), (dir / "hazy/") + name);
    io::save_image(testing_support::quantized_image(rng, 12, 16, 3), (dir / "gt/") + name);
  }
  TrainConfig cfg = toy_config();
  cfg.dataset_root = dir.path().string();
  cfg.dcp.patch = 3;
  cfg.dcp.gf_radius = 4;

  const auto data = load_dataset(cfg);
  REQUIRE(data.size() == 2);
  CHECK(data[0].hazy == io::load_image(dir / "hazy/a.png"));
  CHECK(std::filesystem::exists(dir / "tmap/a.png"));
  CHECK(std::filesystem::exists(dir / "tmap/b.png"));
  CHECK(data[0].guidance.height() == 12);
  const auto again = load_dataset(cfg);
  CHECK(again[0].guidance == data[0].guidance);
  CHECK(again[1].guidance == data[1].guidance);

  SUBCASE("missing ground truth names the file") {
    io::save_image(testing_support::quantized_image(rng, 12, 16, 3), dir / "hazy/c.png");
    CHECK_THROWS_WITH_AS(load_dataset(cfg), doctest::Contains("c.png"), IoError);
  }
  SUBCASE("grayscale pairs are rejected") {
    io::save_image(testing_support::quantized_image(rng, 12, 16, 1), dir / "hazy/d.png");
    io::save_image(testing_support::quantized_image(rng, 12, 16, 1), dir / "gt/d.png");
    CHECK_THROWS_AS(load_dataset(cfg), IoError);
  }
  SUBCASE("missing directories") {
    cfg.dataset_root = dir / "nowhere";
    CHECK_THROWS_AS(load_dataset(cfg), IoError);
  }
  SUBCASE("no guidance maps without a guidance channel") {
    std::filesystem::remove_all(dir / "tmap");
    cfg.net.guidance = false;
    cfg.net.in_channels = 3;
    CHECK(load_dataset(cfg)[0].guidance.empty());
    CHECK_FALSE(std::filesystem::exists(dir / "tmap"));
  }
}
