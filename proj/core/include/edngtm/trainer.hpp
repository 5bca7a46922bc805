#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "edngtm/checkpoint.hpp"
#include "edngtm/dcp.hpp"
#include "edngtm/image.hpp"
#include "edngtm/losses.hpp"
#include "edngtm/net.hpp"
#include "edngtm/params.hpp"
#include "edngtm/rng.hpp"

namespace edngtm::train {

struct TrainConfig {
  int epochs = 400;
  double lr0 = 1e-4;
  std::optional<int> decay_start_epoch;  ///< defaults to epochs / 2
  int batch_size = 1;
  int input_size = 512;
  int critic_steps = 1;
  std::uint64_t seed = 0;
  loss::LossWeights weights;
  loss::SignMode sign_mode = loss::SignMode::Functional;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::optional<double> weight_clip;  ///< critic weights clamped to +-limit after each update
  net::NetSpec net;
  dcp::DcpParams dcp;
  dcp::GuidanceMode guidance_mode = dcp::GuidanceMode::Transmission;
  std::string feature_weights;  ///< optional pretrained extractor file; empty = seeded random
  std::string dataset_root;
  std::string out_dir = ".";
  int checkpoint_interval = 0;  ///< epochs between checkpoints; 0 = final only
  bool augment = true;

  int decay_start() const { return decay_start_epoch.value_or(std::max(1, epochs / 2)); }
  void validate() const;
};

/// Learning rate for a 0-based epoch: lr0 until decay start, then linear decay
/// that would reach zero one epoch after the last.
double lr_at(int epoch, const TrainConfig& config);

struct SamplePair {
  ImageBuf hazy;
  ImageBuf clear;
  TransmissionMap guidance;  ///< empty when the network takes no guidance
};

struct AugmentedPair {
  SamplePair pair;
  Rect crop;
  bool flipped = false;
};

/// 5 aspect-preserving random crops (scale U[0.8, 1]) and their mirrors, each resized
/// to output_size x output_size. Returns an empty list (with a warning) for images
/// too small to crop.
std::vector<AugmentedPair> augment(const SamplePair& pair, int output_size, Rng& rng);

/// Resizes every raster of the pair to size x size.
SamplePair resize_pair(const SamplePair& pair, int size);

struct StepReport {
  double l_adv = 0;
  double l_mse = 0;
  double l_per = 0;
  double l_I = 0;
  double l_D = 0;
  double lr = 0;
};

/// Owns the generator, critic, frozen feature extractor and their optimizer state.
class Trainer {
 public:
  explicit Trainer(TrainConfig config);

  /// critic_steps critic updates against the frozen generator, then one generator
  /// update on the integral loss against the frozen critic. Throws NumericError
  /// naming the first non-finite loss term.
  StepReport train_step(std::span<const SamplePair> batch, double lr);

  /// The two halves of train_step, for callers that schedule them directly.
  /// Neither advances step(). critic_update returns l_D; generator_update leaves
  /// StepReport::l_D at zero.
  double critic_update(std::span<const SamplePair> batch, double lr);
  StepReport generator_update(std::span<const SamplePair> batch, double lr);

  const TrainConfig& config() const noexcept { return config_; }
  const net::GeneratorState<float>& generator() const noexcept { return generator_; }
  const net::DiscriminatorState<float>& discriminator() const noexcept { return discriminator_; }
  const loss::FeatureExtractor& feature_extractor() const noexcept { return extractor_; }

  std::int64_t step() const noexcept { return step_; }
  int epoch() const noexcept { return epoch_; }
  void set_epoch(int epoch) noexcept { epoch_ = epoch; }
  Rng& data_rng() noexcept { return data_rng_; }

  /// Parameters, Adam moments and step counters, counters, data rng state.
  CheckpointFile to_checkpoint() const;
  /// Validates the whole file against this trainer before changing anything.
  void restore(const CheckpointFile& file);

 private:
  struct Batch {
    Tensor<float> hazy;
    Tensor<float> clear;
    Tensor<float> guidance;  ///< empty without guidance
  };
  Batch prepare(std::span<const SamplePair> batch) const;
  AdamConfig adam(double lr) const;
  double critic_update(const Batch& batch, double lr);
  StepReport generator_update(const Batch& batch, double lr);

  TrainConfig config_;
  net::GeneratorState<float> generator_;
  net::DiscriminatorState<float> discriminator_;
  loss::FeatureExtractor extractor_;
  std::int64_t step_ = 0;
  int epoch_ = 0;  ///< completed epochs
  Rng data_rng_;
};

void save_checkpoint(const Trainer& trainer, const std::string& path);

struct InferenceModel {
  net::GeneratorState<float> generator;
  dcp::GuidanceMode guidance_mode = dcp::GuidanceMode::Transmission;
};

/// Generator weights and guidance convention from a trainer checkpoint.
InferenceModel inference_model(const CheckpointFile& file);
void load_checkpoint(Trainer& trainer, const std::string& path);

/// root/hazy/NAME.png paired with root/gt/NAME.png. Guidance comes from
/// root/tmap/NAME.png, which is computed with DCP and cached when missing.
std::vector<SamplePair> load_dataset(const TrainConfig& config);

struct TrainSummary {
  std::vector<StepReport> epoch_means;
  std::string final_checkpoint;
};

/// Runs the remaining epochs. Appends one tab-separated line per epoch to
/// out_dir/metrics.tsv and writes out_dir/epoch_NNNN.ednw every checkpoint_interval
/// epochs plus out_dir/final.ednw.
TrainSummary train_loop(Trainer& trainer, const std::vector<SamplePair>& dataset);

}  // namespace edngtm::train
