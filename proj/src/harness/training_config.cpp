#include "hcctc/harness/training_config.hpp"

#include <cstdio>

namespace hcctc::harness {

void TrainingConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be nonnegative");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (peak_lr <= 0) throw ConfigError("peak_lr must be positive");
  if (warmup_steps < 1) throw ConfigError("warmup_steps must be positive");
  if (average_count < 1) throw ConfigError("average_count must be positive");
  if (precision != 32 && precision != 64) throw ConfigError("precision must be 32 or 64");
  if (objective != Objective::kCtc && (loss_count <= 1 || loss_count > layers))
    throw ConfigError("multi-loss objectives need 1 < loss_count <= layers");
  if (vocab_dir.empty()) {
    if (vocab_sizes.empty()) throw ConfigError("vocab_sizes is required when vocab_dir is not set");
    for (std::size_t k = 1; k < vocab_sizes.size(); ++k)
      if (vocab_sizes[k] < vocab_sizes[k - 1]) throw ConfigError("vocab_sizes must be nondecreasing");
    switch (objective) {
      case Objective::kCtc: break;
      case Objective::kScCtc:
        for (auto s : vocab_sizes)
          if (s != vocab_sizes.back()) throw ConfigError("sc-ctc shares one vocabulary across levels");
        if (vocab_sizes.size() != 1 && static_cast<int>(vocab_sizes.size()) != loss_count)
          throw ConfigError("sc-ctc takes one vocabulary size (or loss_count equal sizes)");
        break;
      case Objective::kHcCtc:
      case Objective::kParaCtc:
        if (static_cast<int>(vocab_sizes.size()) != loss_count)
          throw ConfigError(to_string(objective) + " needs " + std::to_string(loss_count) +
                            " vocabulary sizes, got " + std::to_string(vocab_sizes.size()));
        break;
    }
  }
}

std::vector<std::size_t> TrainingConfig::level_sizes() const {
  const std::size_t levels = static_cast<std::size_t>(model_levels());
  switch (objective) {
    case Objective::kCtc: return {vocab_sizes.back()};
    case Objective::kScCtc: return std::vector<std::size_t>(levels, vocab_sizes.back());
    default: return vocab_sizes;
  }
}

EncoderConfig TrainingConfig::encoder_config(int input_dim, const std::vector<int>& level_widths) const {
  EncoderConfig c;
  c.input_dim = input_dim;
  c.layers = layers;
  c.loss_count = model_levels();
  c.d_model = d_model;
  c.heads = heads;
  c.d_ff = d_ff;
  c.level_vocab_sizes = level_widths;
  c.conditioning = conditioning;
  c.frame_stack = frame_stack;
  c.dropout = dropout;
  c.layout = layout_for(objective);
  c.validate();
  return c;
}

TrainingConfig TrainingConfig::from_config(const KeyValueFile& kv) {
  kv.require_known({"objective", "layers", "loss_count", "d_model", "heads", "d_ff", "frame_stack", "vocab_sizes",
                    "conditioning", "dropout", "epochs", "batch_size", "peak_lr", "warmup_steps", "grad_clip",
                    "average_count", "seed", "precision", "stop_at_dev_wer", "vocab_dir", "data_dir"});
  TrainingConfig c;
  c.objective = objective_from_string(kv.get("objective", to_string(c.objective)));
  c.layers = kv.get_int("layers", c.layers);
  c.loss_count = kv.get_int("loss_count", c.loss_count);
  c.d_model = kv.get_int("d_model", c.d_model);
  c.heads = kv.get_int("heads", c.heads);
  c.d_ff = kv.get_int("d_ff", c.d_ff);
  c.frame_stack = kv.get_int("frame_stack", c.frame_stack);
  c.vocab_sizes = kv.get_sizes("vocab_sizes");
  c.conditioning = kv.get_bool("conditioning", c.conditioning);
  c.dropout = kv.get_double("dropout", c.dropout);
  c.epochs = kv.get_int("epochs", c.epochs);
  c.batch_size = kv.get_int("batch_size", c.batch_size);
  c.peak_lr = kv.get_double("peak_lr", c.peak_lr);
  c.warmup_steps = kv.get_int("warmup_steps", c.warmup_steps);
  c.grad_clip = kv.get_double("grad_clip", c.grad_clip);
  c.average_count = kv.get_int("average_count", c.average_count);
  c.seed = static_cast<std::uint64_t>(kv.get_int64("seed", static_cast<std::int64_t>(c.seed)));
  c.precision = kv.get_int("precision", c.precision);
  c.stop_at_dev_wer = kv.get_double("stop_at_dev_wer", c.stop_at_dev_wer);
  c.vocab_dir = kv.get("vocab_dir", "");
  c.data_dir = kv.get("data_dir", "");
  c.validate();
  return c;
}

KeyValueFile TrainingConfig::to_config() const {
  auto num = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  KeyValueFile kv;
  kv.set("objective", to_string(objective));
  kv.set("layers", std::to_string(layers));
  kv.set("loss_count", std::to_string(loss_count));
  kv.set("d_model", std::to_string(d_model));
  kv.set("heads", std::to_string(heads));
  kv.set("d_ff", std::to_string(d_ff));
  kv.set("frame_stack", std::to_string(frame_stack));
  std::string sizes;
  for (std::size_t k = 0; k < vocab_sizes.size(); ++k) sizes += (k ? "," : "") + std::to_string(vocab_sizes[k]);
  if (!sizes.empty()) kv.set("vocab_sizes", sizes);
  kv.set("conditioning", conditioning ? "1" : "0");
  kv.set("dropout", num(dropout));
  kv.set("epochs", std::to_string(epochs));
  kv.set("batch_size", std::to_string(batch_size));
  kv.set("peak_lr", num(peak_lr));
  kv.set("warmup_steps", std::to_string(warmup_steps));
  kv.set("grad_clip", num(grad_clip));
  kv.set("average_count", std::to_string(average_count));
  kv.set("seed", std::to_string(seed));
  kv.set("precision", std::to_string(precision));
  kv.set("stop_at_dev_wer", num(stop_at_dev_wer));
  if (!vocab_dir.empty()) kv.set("vocab_dir", vocab_dir);
  if (!data_dir.empty()) kv.set("data_dir", data_dir);
  return kv;
}

}  // namespace hcctc::harness
