#include "edngtm/cli.hpp"

#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "edngtm/checkpoint.hpp"
#include "edngtm/config.hpp"
#include "edngtm/dcp.hpp"
#include "edngtm/error.hpp"
#include "edngtm/hazesim.hpp"
#include "edngtm/metrics.hpp"
#include "edngtm/model_gradcheck.hpp"
#include "edngtm/net.hpp"
#include "edngtm/png_io.hpp"
#include "edngtm/trainer.hpp"

namespace edngtm::cli {
namespace {

namespace fs = std::filesystem;

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  bool verbose = false;

  io::RunConfig load() const {
    io::RunConfig cfg = config_path.empty() ? io::RunConfig{} : io::RunConfig::load(config_path);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ContractViolation("--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
  }
};

void save_field(const TransmissionMap& t, const std::string& path) { io::save_image(to_image(t), path); }

int run_dcp(const Common& common, const std::string& in, const std::string& out_path, const std::string& tmap,
            std::ostream& out) {
  const auto params = io::dcp_params_from(common.load());
  const ImageBuf hazy = io::load_image(in);
  if (hazy.channels() != 3) throw ContractViolation("dcp: '" + in + "' must be an RGB image");
  const auto result = dcp::dcp_dehaze(hazy, params);
  io::save_image(result.radiance, out_path);
  if (!tmap.empty()) save_field(result.transmission, tmap);
  char line[128];
  std::snprintf(line, sizeof line, "airlight %.6f %.6f %.6f\n", result.airlight[0], result.airlight[1],
                result.airlight[2]);
  out << line;
  return 0;
}

int run_synth(const Common& common, const std::string& clear_path, const std::string& depth_path,
              const std::optional<std::uint64_t>& seed, const std::optional<double>& beta, std::uint64_t index,
              const std::string& out_path, const std::string& tmap, std::ostream& out) {
  auto params = io::haze_params_from(common.load());
  if (seed) params.seed = *seed;
  if (beta) params.beta = *beta;
  params.validate();
  const ImageBuf clear = io::load_image(clear_path);
  if (clear.channels() != 3) throw ContractViolation("synth: '" + clear_path + "' must be an RGB image");
  const DepthMap depth = io::load_depth(depth_path);
  const auto pair = haze::synthesize_pair(clear, depth, params, index);
  io::save_image(pair.hazy, out_path);
  if (!tmap.empty()) save_field(pair.transmission, tmap);
  char line[64];
  std::snprintf(line, sizeof line, "beta %.9g\n", pair.beta);
  out << line;
  return 0;
}

int run_train(const Common& common, const std::string& data, const std::string& out_dir, const std::string& resume,
              const std::optional<int>& epochs, const std::optional<std::uint64_t>& seed, std::ostream& out) {
  io::RunConfig cfg = common.load();
  cfg.set("dataset_root", data);
  cfg.set("out_dir", out_dir);
  if (epochs) cfg.set("epochs", std::to_string(*epochs));
  if (seed) cfg.set("seed", std::to_string(*seed));
  train::Trainer trainer(io::train_config_from(cfg));
  if (!resume.empty()) train::load_checkpoint(trainer, resume);
  const auto dataset = train::load_dataset(trainer.config());
  const auto summary = train::train_loop(trainer, dataset);
  out << "epochs run " << summary.epoch_means.size() << "\n";
  out << "checkpoint " << summary.final_checkpoint << "\n";
  return 0;
}

int run_infer(const Common& common, const std::string& model_path, const std::string& in, const std::string& out_path,
              const std::string& tmap) {
  const io::RunConfig cfg = common.load();
  const auto dcp_params = io::dcp_params_from(cfg);
  const bool pad = cfg.get_bool("infer.pad", true);
  const auto model = train::inference_model(read_checkpoint(model_path));
  const net::NetSpec& spec = model.generator.spec;

  const ImageBuf hazy = io::load_image(in);
  if (hazy.channels() != 3) throw ContractViolation("infer: '" + in + "' must be an RGB image");
  const int m = spec.required_multiple();
  const int pad_h = (m - hazy.height() % m) % m, pad_w = (m - hazy.width() % m) % m;
  if ((pad_h || pad_w) && !pad)
    throw ContractViolation("infer: image " + std::to_string(hazy.height()) + "x" + std::to_string(hazy.width()) +
                            " is not a multiple of " + std::to_string(m) + " and infer.pad is false");
  const ImageBuf padded = reflect_pad(hazy, pad_h, pad_w);
  const Tensor<float> rgb = to_tensor(padded);
  Tensor<float> guidance;
  if (spec.guidance) {
    const auto t = dcp::dcp_dehaze(padded, dcp_params).transmission;
    if (!tmap.empty()) save_field(to_field<TransmissionMap>(crop(to_image(t), {0, 0, hazy.width(), hazy.height()})), tmap);
    guidance = to_tensor(to_image(dcp::to_guidance(t, model.guidance_mode)));
  }
  const Tensor<float> result = net::generate(model.generator, rgb, spec.guidance ? &guidance : nullptr);
  io::save_image(crop(to_image(result), {0, 0, hazy.width(), hazy.height()}), out_path);
  return 0;
}

int run_eval(const std::string& pred, const std::string& gt, const std::string& out_path, std::ostream& out,
             std::ostream& err) {
  const auto report = metrics::evaluate_dirs(pred, gt);
  std::ofstream csv(out_path);
  if (!csv) throw IoError("cannot write '" + out_path + "'");
  metrics::write_csv(report, csv);
  csv.close();
  if (!csv) throw IoError("failed writing '" + out_path + "'");
  for (const auto& s : report.skipped) err << "skipped unpaired file " << s << "\n";
  if (report.rows.empty()) {
    err << "eval: no paired images\n";
    return 1;
  }
  out << "pairs " << report.rows.size() << " mean_psnr " << metrics::format_metric(report.mean_psnr)
      << " mean_ssim " << metrics::format_metric(report.mean_ssim) << "\n";
  return 0;
}

int run_augment(const std::string& hazy_path, const std::string& clear_path, const std::string& tmap_path,
                const std::string& out_dir, int size, std::uint64_t seed, std::ostream& out) {
  train::SamplePair pair{io::load_image(hazy_path), io::load_image(clear_path), {}};
  if (!tmap_path.empty()) pair.guidance = to_field<TransmissionMap>(io::load_image(tmap_path));
  Rng rng(seed);
  const auto augmented = train::augment(pair, size, rng);
  if (augmented.empty()) return 1;
  const fs::path root(out_dir);
  const std::string stem = fs::path(hazy_path).stem().string();
  for (const char* sub : {"hazy", "gt"}) fs::create_directories(root / sub);
  if (!tmap_path.empty()) fs::create_directories(root / "tmap");
  for (std::size_t k = 0; k < augmented.size(); ++k) {
    char name[16];
    std::snprintf(name, sizeof name, "_%02zu.png", k);
    const std::string file = stem + name;
    const auto& a = augmented[k];
    io::save_image(a.pair.hazy, (root / "hazy" / file).string());
    io::save_image(a.pair.clear, (root / "gt" / file).string());
    if (!tmap_path.empty()) save_field(a.pair.guidance, (root / "tmap" / file).string());
    out << file << ' ' << a.crop.x << ' ' << a.crop.y << ' ' << a.crop.width << ' ' << a.crop.height << ' '
        << (a.flipped ? "flipped" : "plain") << "\n";
  }
  return 0;
}

void print_report(const char* label, const GradCheckReport& report, std::ostream& out) {
  for (const auto& e : report.entries) {
    char line[256];
    std::snprintf(line, sizeof line, "%-10s %-28s checked %3zu  max_rel_err %.3e  max|grad| %.3e\n", label,
                  e.name.c_str(), e.checked, e.max_relative_error, e.max_abs_analytic);
    out << line;
  }
}

int run_gradcheck(int depth, int base, int size, std::uint64_t seed, int samples, double tolerance, std::ostream& out) {
  ModelGradCheckConfig cfg;
  cfg.spec.depth = depth;
  cfg.spec.base_width = base;
  cfg.size = size;
  cfg.seed = seed;
  cfg.options.samples_per_tensor = samples;
  cfg.options.tolerance = tolerance;
  const auto result = model_grad_check(cfg);
  print_report("generator", result.generator, out);
  print_report("critic", result.critic, out);
  print_report("losses", result.losses, out);
  const bool ok = result.worst() < tolerance;
  char line[96];
  std::snprintf(line, sizeof line, "worst relative error %.3e (tolerance %.1e): %s\n", result.worst(), tolerance,
                ok ? "ok" : "FAILED");
  out << line;
  return ok ? 0 : 1;
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Guided encoder-decoder dehazing toolkit", "edngtm"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--config", common.config_path, "key=value configuration file")->check(CLI::ExistingFile);
  app.add_option("--set", common.overrides, "override a configuration key (key=value), repeatable");
  app.add_flag("-v,--verbose", common.verbose, "log progress and every configuration key read");

  std::string in, out_path, tmap, clear, depth, data, resume, model, pred, gt, hazy;
  std::optional<std::uint64_t> seed;
  std::optional<double> beta;
  std::optional<int> epochs;
  std::uint64_t index = 0, aug_seed = 0, gc_seed = 1;
  int size = 512, gc_depth = 3, gc_base = 8, gc_size = 16, gc_samples = 12;
  double gc_tol = 1e-3;

  auto* dcp_cmd = app.add_subcommand("dcp", "dark-channel-prior dehazing");
  dcp_cmd->add_option("--in", in, "hazy RGB PNG")->required();
  dcp_cmd->add_option("--out", out_path, "dehazed PNG")->required();
  dcp_cmd->add_option("--emit-tmap", tmap, "refined transmission PNG");

  auto* synth_cmd = app.add_subcommand("synth", "synthesize a hazy image from a clear image and depth");
  synth_cmd->add_option("--clear", clear, "clear RGB PNG")->required();
  synth_cmd->add_option("--depth", depth, "depth map (8/16-bit grayscale PNG or DPTH raster)")->required();
  synth_cmd->add_option("--out", out_path, "hazy PNG")->required();
  synth_cmd->add_option("--seed", seed, "beta seed (overrides config)");
  synth_cmd->add_option("--beta", beta, "fixed scattering coefficient");
  synth_cmd->add_option("--index", index, "pair index mixed into the seed");
  synth_cmd->add_option("--emit-tmap", tmap, "true transmission PNG");

  auto* train_cmd = app.add_subcommand("train", "train the generator and critic");
  train_cmd->add_option("--data", data, "dataset root with hazy/ and gt/")->required();
  train_cmd->add_option("--out", out_path, "output directory for checkpoints and metrics.tsv")->required();
  train_cmd->add_option("--resume", resume, "trainer checkpoint to continue from")->check(CLI::ExistingFile);
  train_cmd->add_option("--epochs", epochs, "total epochs (overrides config)");
  train_cmd->add_option("--seed", seed, "seed (overrides config)");

  auto* infer_cmd = app.add_subcommand("infer", "dehaze with a trained generator");
  infer_cmd->add_option("--model", model, "trainer checkpoint")->required()->check(CLI::ExistingFile);
  infer_cmd->add_option("--in", in, "hazy RGB PNG")->required();
  infer_cmd->add_option("--out", out_path, "dehazed PNG")->required();
  infer_cmd->add_option("--emit-tmap", tmap, "DCP transmission used as guidance");

  auto* eval_cmd = app.add_subcommand("eval", "PSNR/SSIM of predictions against ground truth");
  eval_cmd->add_option("--pred", pred, "prediction directory")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--gt", gt, "ground-truth directory")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--out", out_path, "CSV report")->required();

  auto* aug_cmd = app.add_subcommand("augment", "write the 10 augmented crops of one training pair");
  aug_cmd->add_option("--hazy", hazy, "hazy RGB PNG")->required();
  aug_cmd->add_option("--clear", clear, "clear RGB PNG")->required();
  aug_cmd->add_option("--tmap", tmap, "guidance PNG transformed alongside");
  aug_cmd->add_option("--out", out_path, "output dataset root")->required();
  aug_cmd->add_option("--size", size, "output extent")->check(CLI::PositiveNumber);
  aug_cmd->add_option("--seed", aug_seed, "crop seed");

  auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference check of generator, critic and losses");
  gc_cmd->add_option("--depth", gc_depth)->check(CLI::Range(1, 6));
  gc_cmd->add_option("--base", gc_base)->check(CLI::Range(1, 64));
  gc_cmd->add_option("--size", gc_size)->check(CLI::PositiveNumber);
  gc_cmd->add_option("--seed", gc_seed);
  gc_cmd->add_option("--samples", gc_samples)->check(CLI::PositiveNumber);
  gc_cmd->add_option("--tolerance", gc_tol)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 2;
  }

  spdlog::set_level(common.verbose ? spdlog::level::info : spdlog::level::warn);
  try {
    if (*dcp_cmd) return run_dcp(common, in, out_path, tmap, out);
    if (*synth_cmd) return run_synth(common, clear, depth, seed, beta, index, out_path, tmap, out);
    if (*train_cmd) return run_train(common, data, out_path, resume, epochs, seed, out);
    if (*infer_cmd) return run_infer(common, model, in, out_path, tmap);
    if (*eval_cmd) return run_eval(pred, gt, out_path, out, err);
    if (*aug_cmd) return run_augment(hazy, clear, tmap, out_path, size, aug_seed, out);
    if (*gc_cmd) return run_gradcheck(gc_depth, gc_base, gc_size, gc_seed, gc_samples, gc_tol, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace edngtm::cli
