#ifndef HCCTC_ENCODER_CONFIG_HPP_
#define HCCTC_ENCODER_CONFIG_HPP_

#include <string>
#include <vector>

#include "hcctc/errors.hpp"

namespace hcctc {

/// Where the per-level projection heads attach.
enum class HeadLayout {
  kFinalOnly,     // one head on the last layer
  kIntermediate,  // levels 1..K-1 at layers floor(kE/K), level K on the last layer
  kParallel,      // every level on the last layer, levels 1..K-1 through an adapter
};

inline std::string to_string(HeadLayout layout);
inline HeadLayout head_layout_from_string(const std::string& name);

struct EncoderConfig {
  int input_dim = 16;
  int layers = 6;
  int loss_count = 3;
  int d_model = 64;
  int heads = 4;
  int d_ff = 256;
  // One width per level, finest first; each includes blank and unk.
  std::vector<int> level_vocab_sizes;
  bool conditioning = true;
  int frame_stack = 1;
  double dropout = 0.0;
  HeadLayout layout = HeadLayout::kIntermediate;

  void validate() const;
};

struct TapPositions {
  std::vector<int> intermediate;  // 1-based layer indices, strictly increasing
  int final_layer = 0;
};

/// Intermediate taps at floor(k*E/K) for k = 1..K-1, final tap at E.
inline TapPositions tap_positions(int layers, int loss_count);

/// Frames after stacking `frame_stack` consecutive inputs: ceil(T / frame_stack).
inline int stacked_length(int frames, int frame_stack) { return (frames + frame_stack - 1) / frame_stack; }

inline std::string to_string(HeadLayout layout) {
  switch (layout) {
    case HeadLayout::kFinalOnly: return "final";
    case HeadLayout::kIntermediate: return "intermediate";
    case HeadLayout::kParallel: return "parallel";
  }
  return "?";
}

inline HeadLayout head_layout_from_string(const std::string& name) {
  if (name == "final") return HeadLayout::kFinalOnly;
  if (name == "intermediate") return HeadLayout::kIntermediate;
  if (name == "parallel") return HeadLayout::kParallel;
  throw ConfigError("unknown head layout: " + name);
}

inline TapPositions tap_positions(int layers, int loss_count) {
  if (loss_count <= 1 || loss_count > layers)
    throw ConfigError("loss count K=" + std::to_string(loss_count) + " must satisfy 1 < K <= E=" +
                      std::to_string(layers));
  TapPositions taps;
  for (int k = 1; k < loss_count; ++k) taps.intermediate.push_back(k * layers / loss_count);
  taps.final_layer = layers;
  return taps;
}

inline void EncoderConfig::validate() const {
  if (input_dim < 1) throw ConfigError("input_dim must be positive");
  if (layers < 1) throw ConfigError("encoder needs at least one layer");
  if (d_model < 2) throw ConfigError("d_model must be at least 2");
  if (heads < 1 || d_model % heads != 0)
    throw ConfigError("d_model=" + std::to_string(d_model) + " is not divisible by heads=" + std::to_string(heads));
  if (d_ff < 1) throw ConfigError("d_ff must be positive");
  if (frame_stack < 1) throw ConfigError("frame_stack must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
  if (loss_count < 1) throw ConfigError("loss count must be positive");
  if (static_cast<int>(level_vocab_sizes.size()) != loss_count)
    throw ConfigError("expected " + std::to_string(loss_count) + " level vocabulary sizes, got " +
                      std::to_string(level_vocab_sizes.size()));
  for (int v : level_vocab_sizes)
    if (v < 2) throw ConfigError("level vocabulary must include blank and unk");
  if (layout == HeadLayout::kIntermediate) (void)tap_positions(layers, loss_count);
}

}  // namespace hcctc

#endif  // HCCTC_ENCODER_CONFIG_HPP_
