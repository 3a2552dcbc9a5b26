#ifndef HCCTC_HARNESS_TRAINING_CONFIG_HPP_
#define HCCTC_HARNESS_TRAINING_CONFIG_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "hcctc/encoder/config.hpp"
#include "hcctc/harness/config_file.hpp"
#include "hcctc/objectives/objectives.hpp"

namespace hcctc::harness {

/// Every knob of a training run. Keys of the config file match the field
/// names; see docs/config.md.
struct TrainingConfig {
  Objective objective = Objective::kHcCtc;
  int layers = 6;
  int loss_count = 3;
  int d_model = 64;
  int heads = 4;
  int d_ff = 256;
  int frame_stack = 1;
  std::vector<std::size_t> vocab_sizes;
  bool conditioning = true;
  double dropout = 0.0;

  int epochs = 10;
  int batch_size = 16;
  double peak_lr = 1e-3;
  int warmup_steps = 1000;
  double grad_clip = 5.0;  // global norm; 0 disables
  int average_count = 5;
  std::uint64_t seed = 1;
  int precision = 32;
  // Stop once the dev WER of the last level is at or below this; negative disables.
  double stop_at_dev_wer = -1.0;

  std::string vocab_dir;  // prebuilt vocab.<k>.txt files; built from train.txt when empty
  std::string data_dir;   // recorded by `train`, used by tools that only get a checkpoint

  void validate() const;
  /// Levels the model actually carries: 1 for plain CTC, loss_count otherwise.
  int model_levels() const { return objective == Objective::kCtc ? 1 : loss_count; }
  /// Vocabulary sizes to build, one per model level.
  std::vector<std::size_t> level_sizes() const;
  EncoderConfig encoder_config(int input_dim, const std::vector<int>& level_widths) const;

  static TrainingConfig from_config(const KeyValueFile& kv);
  KeyValueFile to_config() const;
};

}  // namespace hcctc::harness

#endif  // HCCTC_HARNESS_TRAINING_CONFIG_HPP_
