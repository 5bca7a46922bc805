#include "edngtm/trainer.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "edngtm/error.hpp"
#include "edngtm/png_io.hpp"

namespace edngtm::train {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  require(epochs >= 1, "epochs must be >= 1, got ", epochs);
  require(lr0 > 0, "lr0 must be > 0, got ", lr0);
  require(decay_start() >= 1 && decay_start() <= epochs, "decay_start_epoch must lie in [1, ", epochs, "], got ",
          decay_start());
  require(batch_size >= 1, "batch_size must be >= 1, got ", batch_size);
  require(critic_steps >= 1, "critic_steps must be >= 1, got ", critic_steps);
  require(checkpoint_interval >= 0, "checkpoint_interval must be >= 0");
  require(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1 && adam_eps > 0,
          "invalid Adam hyperparameters");
  require(!weight_clip || *weight_clip > 0, "weight_clip must be > 0");
  net.validate();
  dcp.validate();
  weights.validate();
  require(input_size >= 1 && input_size % net.required_multiple() == 0, "input_size ", input_size,
          " must be a positive multiple of 2^depth = ", net.required_multiple());
}

double lr_at(int epoch, const TrainConfig& config) {
  require(epoch >= 0 && epoch < config.epochs, "lr_at: epoch ", epoch, " outside [0, ", config.epochs, ")");
  const int start = config.decay_start();
  if (epoch < start) return config.lr0;
  return config.lr0 * (static_cast<double>(config.epochs - epoch) / static_cast<double>(config.epochs - start));
}

namespace {

SamplePair transform(const SamplePair& pair, const Rect& rect, bool flip, int size) {
  auto apply = [&](const ImageBuf& img) {
    ImageBuf out = resize_bilinear(crop(img, rect), size, size);
    return flip ? flip_horizontal(out) : out;
  };
  SamplePair out{apply(pair.hazy), apply(pair.clear), {}};
  if (!pair.guidance.empty()) out.guidance = to_field<TransmissionMap>(apply(to_image(pair.guidance)));
  return out;
}

void check_pair(const SamplePair& pair) {
  require(pair.hazy.same_extent(pair.clear), "sample pair extents differ: hazy ", pair.hazy.height(), "x",
          pair.hazy.width(), ", clear ", pair.clear.height(), "x", pair.clear.width());
  require(pair.hazy.channels() == 3 && pair.clear.channels() == 3, "sample pair images must be RGB");
  require(pair.guidance.empty() ||
              (pair.guidance.height() == pair.hazy.height() && pair.guidance.width() == pair.hazy.width()),
          "guidance extent differs from the image");
}

}  // namespace

SamplePair resize_pair(const SamplePair& pair, int size) {
  check_pair(pair);
  return transform(pair, Rect{0, 0, pair.hazy.width(), pair.hazy.height()}, false, size);
}

std::vector<AugmentedPair> augment(const SamplePair& pair, int output_size, Rng& rng) {
  check_pair(pair);
  require(output_size >= 1, "augment: output size must be >= 1");
  const int w = pair.hazy.width();
  const int h = pair.hazy.height();
  if (w < 2 || h < 2) {
    spdlog::warn("augment: skipping degenerate {}x{} image", w, h);
    return {};
  }
  std::vector<AugmentedPair> out;
  out.reserve(10);
  for (int i = 0; i < 5; ++i) {
    const double s = rng.uniform(0.8, 1.0);
    // Round the shorter side first so both sides stay within half a pixel of the aspect.
    int cw, ch;
    if (w <= h) {
      cw = std::clamp(static_cast<int>(std::lround(s * w)), 1, w);
      ch = std::clamp(static_cast<int>(std::lround(static_cast<double>(cw) * h / w)), 1, h);
    } else {
      ch = std::clamp(static_cast<int>(std::lround(s * h)), 1, h);
      cw = std::clamp(static_cast<int>(std::lround(static_cast<double>(ch) * w / h)), 1, w);
    }
    const int x = static_cast<int>(rng.below(static_cast<std::uint64_t>(w - cw + 1)));
    const int y = static_cast<int>(rng.below(static_cast<std::uint64_t>(h - ch + 1)));
    const Rect rect{x, y, cw, ch};
    SamplePair plain = transform(pair, rect, false, output_size);
    SamplePair mirrored{flip_horizontal(plain.hazy), flip_horizontal(plain.clear), {}};
    if (!plain.guidance.empty())
      mirrored.guidance = to_field<TransmissionMap>(flip_horizontal(to_image(plain.guidance)));
    out.push_back({std::move(plain), rect, false});
    out.push_back({std::move(mirrored), rect, true});
  }
  return out;
}

Trainer::Trainer(TrainConfig config)
    : config_(std::move(config)), data_rng_(Rng::mix(config_.seed, 0xDA7A)) {
  config_.validate();
  generator_ = net::build_generator(config_.net, config_.seed);
  discriminator_ = net::build_discriminator(config_.net, config_.seed);
  extractor_ = config_.feature_weights.empty() ? loss::build_feature_extractor(config_.seed)
                                               : loss::load_feature_extractor(config_.feature_weights);
}

namespace {

void ensure_finite(double value, const char* term, std::int64_t step) {
  if (!std::isfinite(value))
    throw NumericError(detail::concat("non-finite ", term, " (", value, ") at step ", step));
}

double scalar(const Tape<float>& tape, Var v) { return static_cast<double>(tape.value(v).values()[0]); }

}  // namespace

Trainer::Batch Trainer::prepare(std::span<const SamplePair> batch) const {
  require(!batch.empty(), "train_step: empty batch");
  std::vector<const ImageBuf*> hazy, clear;
  std::vector<ImageBuf> guidance_images;
  guidance_images.reserve(batch.size());
  for (const auto& pair : batch) {
    check_pair(pair);
    require(pair.hazy.same_extent(batch.front().hazy), "train_step: batch extents differ");
    hazy.push_back(&pair.hazy);
    clear.push_back(&pair.clear);
    if (config_.net.guidance) {
      require(!pair.guidance.empty(), "train_step: the network needs a guidance map");
      guidance_images.push_back(to_image(dcp::to_guidance(pair.guidance, config_.guidance_mode)));
    }
  }
  Batch out{to_tensor(hazy), to_tensor(clear), {}};
  if (config_.net.guidance) {
    std::vector<const ImageBuf*> ptrs;
    for (const auto& g : guidance_images) ptrs.push_back(&g);
    out.guidance = to_tensor(ptrs);
  }
  return out;
}

AdamConfig Trainer::adam(double lr) const {
  require(lr >= 0 && std::isfinite(lr), "train_step: invalid learning rate ", lr);
  return AdamConfig{lr, config_.adam_beta1, config_.adam_beta2, config_.adam_eps};
}

double Trainer::critic_update(const Batch& b, double lr) {
  const Tensor<float>* guidance = config_.net.guidance ? &b.guidance : nullptr;
  const Tensor<float> fake = net::generate(generator_, b.hazy, guidance);
  Tape<float> tape;
  const Bindings d = bind(tape, discriminator_.params, true);
  const Var real_scores = net::discriminator_forward(tape, config_.net, d, tape.leaf(b.clear, false));
  const Var fake_scores = net::discriminator_forward(tape, config_.net, d, tape.leaf(fake, false));
  const Var l_d = loss::critic_loss(tape, real_scores, fake_scores, config_.weights.critic, config_.sign_mode);
  const double value = scalar(tape, l_d);
  ensure_finite(value, "l_D", step_);
  tape.backward(l_d);
  adam_step(discriminator_.params, collect_grads(tape, d), adam(lr));
  if (config_.weight_clip) clip_weights(discriminator_.params, static_cast<float>(*config_.weight_clip));
  return value;
}

StepReport Trainer::generator_update(const Batch& b, double lr) {
  const auto& w = config_.weights;
  StepReport report;
  report.lr = lr;
  Tape<float> tape;
  const Bindings g = bind(tape, generator_.params, true);
  const Bindings d = bind(tape, discriminator_.params, false);
  const Bindings fe = bind(tape, extractor_.params, false);
  const Var x = tape.leaf(b.hazy, false);
  const Var gd = config_.net.guidance ? tape.leaf(b.guidance, false) : Var{};
  const Var out = net::generator_forward(tape, config_.net, g, x, gd);
  const Var truth = tape.leaf(b.clear, false);
  // Terms with zero weight are evaluated on a detached copy so no backward work is spent on them.
  Var detached;
  auto source = [&](double weight) {
    if (weight != 0.0) return out;
    if (!detached.valid()) detached = tape.leaf(tape.value(out), false);
    return detached;
  };
  const Var l_adv =
      loss::adversarial_loss(tape, net::discriminator_forward(tape, config_.net, d, source(w.adversarial)));
  const Var l_mse = loss::mse_loss(tape, source(w.mse), truth);
  const Var l_per = loss::perceptual_loss(tape, source(w.perceptual), truth, fe);
  const Var l_i = loss::integral_loss(tape, l_adv, l_mse, l_per, w);
  report.l_adv = scalar(tape, l_adv);
  report.l_mse = scalar(tape, l_mse);
  report.l_per = scalar(tape, l_per);
  report.l_I = loss::integral_loss(report.l_adv, report.l_mse, report.l_per, w);
  ensure_finite(report.l_adv, "l_adv", step_);
  ensure_finite(report.l_mse, "l_mse", step_);
  ensure_finite(report.l_per, "l_per", step_);
  ensure_finite(report.l_I, "l_I", step_);
  if (tape.requires_grad(l_i)) {
    tape.backward(l_i);
    adam_step(generator_.params, collect_grads(tape, g), adam(lr));
  }
  return report;
}

double Trainer::critic_update(std::span<const SamplePair> batch, double lr) { return critic_update(prepare(batch), lr); }

StepReport Trainer::generator_update(std::span<const SamplePair> batch, double lr) {
  return generator_update(prepare(batch), lr);
}

StepReport Trainer::train_step(std::span<const SamplePair> batch, double lr) {
  const Batch b = prepare(batch);
  (void)adam(lr);
  double l_d = 0;
  for (int k = 0; k < config_.critic_steps; ++k) l_d = critic_update(b, lr);
  StepReport report = generator_update(b, lr);
  report.l_D = l_d;
  if (!generator_.params.all_finite() || !discriminator_.params.all_finite())
    throw NumericError(detail::concat("non-finite parameters after step ", step_));
  ++step_;
  return report;
}

namespace {

constexpr const char* kKind = "edngtm-trainer";

template <typename T>
void put_store(CheckpointFile& file, const std::string& prefix, const ParamStore<T>& store) {
  for (const auto& [name, value] : store.tensors()) {
    Tensor<float> plain(value.shape(), std::vector<float>(value.values().begin(), value.values().end()));
    file.tensors.emplace(prefix + "/" + name, std::move(plain));
    const auto& m = store.moments(name);
    file.tensors.emplace(prefix + ".adam_m/" + name, m.first);
    file.tensors.emplace(prefix + ".adam_v/" + name, m.second);
    file.meta.emplace(prefix + ".adam_step/" + name, std::to_string(m.step));
  }
}

const std::string& meta_at(const CheckpointFile& file, const std::string& key) {
  const auto it = file.meta.find(key);
  if (it == file.meta.end()) throw ContractViolation("checkpoint lacks metadata '" + key + "'");
  return it->second;
}

std::int64_t parse_int(const std::string& text, const std::string& key) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.empty())
    throw ContractViolation("checkpoint metadata '" + key + "' is not an integer: '" + text + "'");
  return v;
}

const Tensor<float>& tensor_at(const CheckpointFile& file, const std::string& name, const Shape& shape) {
  const auto it = file.tensors.find(name);
  if (it == file.tensors.end()) throw ContractViolation("checkpoint lacks tensor '" + name + "'");
  if (it->second.shape() != shape)
    throw ContractViolation("checkpoint tensor '" + name + "' has shape " + to_string(it->second.shape()) +
                            ", expected " + to_string(shape));
  return it->second;
}

ParamStore<float> take_store(const CheckpointFile& file, const std::string& prefix, const ParamStore<float>& like,
                             std::size_t& consumed) {
  ParamStore<float> out;
  for (const auto& [name, value] : like.tensors()) {
    out.add(name, tensor_at(file, prefix + "/" + name, value.shape()));
    auto& m = out.moments(name);
    m.first = tensor_at(file, prefix + ".adam_m/" + name, value.shape());
    m.second = tensor_at(file, prefix + ".adam_v/" + name, value.shape());
    const std::string key = prefix + ".adam_step/" + name;
    m.step = parse_int(meta_at(file, key), key);
    consumed += 3;
  }
  return out;
}

}  // namespace

CheckpointFile Trainer::to_checkpoint() const {
  CheckpointFile file;
  put_store(file, "G", generator_.params);
  put_store(file, "D", discriminator_.params);
  file.meta["kind"] = kKind;
  file.meta["netspec"] = config_.net.serialize();
  file.meta["step"] = std::to_string(step_);
  file.meta["epoch"] = std::to_string(epoch_);
  file.meta["seed"] = std::to_string(config_.seed);
  file.meta["data_rng"] = data_rng_.serialize();
  file.meta["guidance_mode"] = config_.guidance_mode == dcp::GuidanceMode::Transmission ? "t" : "1-t";
  return file;
}

void Trainer::restore(const CheckpointFile& file) {
  if (meta_at(file, "kind") != kKind) throw ContractViolation("checkpoint is not a trainer checkpoint");
  const net::NetSpec spec = net::NetSpec::parse(meta_at(file, "netspec"));
  if (!(spec == config_.net))
    throw ContractViolation("checkpoint architecture '" + spec.serialize() + "' differs from configured '" +
                            config_.net.serialize() + "'");
  std::size_t consumed = 0;
  ParamStore<float> g = take_store(file, "G", generator_.params, consumed);
  ParamStore<float> d = take_store(file, "D", discriminator_.params, consumed);
  if (consumed != file.tensors.size())
    throw ContractViolation("checkpoint holds " + std::to_string(file.tensors.size() - consumed) +
                            " unexpected tensors");
  const std::int64_t step = parse_int(meta_at(file, "step"), "step");
  const std::int64_t epoch = parse_int(meta_at(file, "epoch"), "epoch");
  Rng rng = Rng::deserialize(meta_at(file, "data_rng"));
  if (step < 0 || epoch < 0 || epoch > config_.epochs)
    throw ContractViolation("checkpoint counters out of range");
  generator_.params = std::move(g);
  discriminator_.params = std::move(d);
  step_ = step;
  epoch_ = static_cast<int>(epoch);
  data_rng_ = rng;
}

void save_checkpoint(const Trainer& trainer, const std::string& path) {
  write_checkpoint(path, trainer.to_checkpoint());
}

InferenceModel inference_model(const CheckpointFile& file) {
  if (meta_at(file, "kind") != kKind) throw ContractViolation("checkpoint is not a trainer checkpoint");
  InferenceModel model;
  const net::NetSpec spec = net::NetSpec::parse(meta_at(file, "netspec"));
  const ParamStore<float> like = net::build_generator(spec, 0).params;
  std::size_t consumed = 0;
  model.generator = {spec, take_store(file, "G", like, consumed)};
  const std::string& mode = meta_at(file, "guidance_mode");
  if (mode == "t")
    model.guidance_mode = dcp::GuidanceMode::Transmission;
  else if (mode == "1-t")
    model.guidance_mode = dcp::GuidanceMode::OneMinusTransmission;
  else
    throw ContractViolation("checkpoint has unknown guidance_mode '" + mode + "'");
  return model;
}

void load_checkpoint(Trainer& trainer, const std::string& path) { trainer.restore(read_checkpoint(path)); }

namespace {

TransmissionMap quantize(const TransmissionMap& t) {
  TransmissionMap out = t;
  for (auto& v : out.values()) v = std::round(std::clamp(v, 0.0f, 1.0f) * 255.0f) / 255.0f;
  return out;
}

}  // namespace

std::vector<SamplePair> load_dataset(const TrainConfig& config) {
  const fs::path root(config.dataset_root);
  const fs::path hazy_dir = root / "hazy", gt_dir = root / "gt", tmap_dir = root / "tmap";
  if (!fs::is_directory(hazy_dir)) throw IoError("dataset: missing directory " + hazy_dir.string());
  if (!fs::is_directory(gt_dir)) throw IoError("dataset: missing directory " + gt_dir.string());
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(hazy_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".png") names.push_back(entry.path().filename());
  std::sort(names.begin(), names.end());
  if (names.empty()) throw IoError("dataset: no .png files in " + hazy_dir.string());

  std::vector<SamplePair> out;
  for (const auto& name : names) {
    const fs::path gt_path = gt_dir / name;
    if (!fs::is_regular_file(gt_path)) throw IoError("dataset: no ground truth for " + (hazy_dir / name).string());
    SamplePair pair{io::load_image((hazy_dir / name).string()), io::load_image(gt_path.string()), {}};
    if (pair.hazy.channels() != 3 || pair.clear.channels() != 3)
      throw IoError("dataset: " + name + " must be RGB in both hazy/ and gt/");
    if (!pair.hazy.same_extent(pair.clear)) throw IoError("dataset: extent mismatch for " + name);
    if (config.net.guidance) {
      const fs::path tmap_path = tmap_dir / name;
      if (fs::is_regular_file(tmap_path)) {
        pair.guidance = to_field<TransmissionMap>(io::load_image(tmap_path.string()));
        if (pair.guidance.height() != pair.hazy.height() || pair.guidance.width() != pair.hazy.width())
          throw IoError("dataset: cached guidance extent mismatch for " + tmap_path.string());
      } else {
        pair.guidance = quantize(dcp::dcp_dehaze(pair.hazy, config.dcp).transmission);
        fs::create_directories(tmap_dir);
        io::save_image(to_image(pair.guidance), tmap_path.string());
      }
    }
    out.push_back(std::move(pair));
  }
  return out;
}

TrainSummary train_loop(Trainer& trainer, const std::vector<SamplePair>& dataset) {
  const TrainConfig& cfg = trainer.config();
  require(!dataset.empty(), "train_loop: empty dataset");
  fs::create_directories(cfg.out_dir);
  const fs::path out_dir(cfg.out_dir);
  std::ofstream log(out_dir / "metrics.tsv", std::ios::app);
  if (!log) throw IoError("cannot open " + (out_dir / "metrics.tsv").string());

  TrainSummary summary;
  for (int epoch = trainer.epoch(); epoch < cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const double lr = lr_at(epoch, cfg);
    Rng& rng = trainer.data_rng();
    std::vector<SamplePair> samples;
    for (const auto& pair : dataset) {
      if (cfg.augment) {
        for (auto& a : augment(pair, cfg.input_size, rng)) samples.push_back(std::move(a.pair));
      } else {
        samples.push_back(resize_pair(pair, cfg.input_size));
      }
    }
    require(!samples.empty(), "train_loop: augmentation produced no samples");
    for (std::size_t i = samples.size() - 1; i > 0; --i) std::swap(samples[i], samples[rng.below(i + 1)]);

    StepReport mean;
    int steps = 0;
    for (std::size_t i = 0; i < samples.size(); i += cfg.batch_size) {
      const std::size_t n = std::min<std::size_t>(cfg.batch_size, samples.size() - i);
      const StepReport r = trainer.train_step(std::span<const SamplePair>(samples.data() + i, n), lr);
      mean.l_adv += r.l_adv;
      mean.l_mse += r.l_mse;
      mean.l_per += r.l_per;
      mean.l_I += r.l_I;
      mean.l_D += r.l_D;
      ++steps;
    }
    mean.l_adv /= steps;
    mean.l_mse /= steps;
    mean.l_per /= steps;
    mean.l_I /= steps;
    mean.l_D /= steps;
    mean.lr = lr;
    trainer.set_epoch(epoch + 1);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    char line[256];
    std::snprintf(line, sizeof line, "%d\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g\t%.3f\n", epoch + 1, lr, mean.l_adv,
                  mean.l_mse, mean.l_per, mean.l_I, mean.l_D, seconds);
    log << line << std::flush;
    spdlog::info("epoch {}/{}: lr {:.3g} l_I {:.6g} l_D {:.6g} ({:.1f}s)", epoch + 1, cfg.epochs, lr, mean.l_I,
                 mean.l_D, seconds);
    summary.epoch_means.push_back(mean);

    if (cfg.checkpoint_interval > 0 && (epoch + 1) % cfg.checkpoint_interval == 0 && epoch + 1 < cfg.epochs) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%04d.ednw", epoch + 1);
      save_checkpoint(trainer, (out_dir / name).string());
    }
  }
  summary.final_checkpoint = (out_dir / "final.ednw").string();
  save_checkpoint(trainer, summary.final_checkpoint);
  return summary;
}

}  // namespace edngtm::train
