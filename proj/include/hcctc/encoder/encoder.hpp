#ifndef HCCTC_ENCODER_ENCODER_HPP_
#define HCCTC_ENCODER_ENCODER_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hcctc/encoder/config.hpp"
#include "hcctc/numerics/ops.hpp"

namespace hcctc {

/// Concatenates `frame_stack` consecutive rows into one, zero-padding the tail.
template <typename S>
Matrix<S> stack_frames(const Matrix<S>& features, int frame_stack) {
  if (frame_stack == 1) return features;
  const Eigen::Index frames = features.rows();
  const Eigen::Index dim = features.cols();
  const Eigen::Index out_rows = stacked_length(static_cast<int>(frames), frame_stack);
  Matrix<S> out = Matrix<S>::Zero(out_rows, dim * frame_stack);
  for (Eigen::Index t = 0; t < frames; ++t) out.block(t / frame_stack, (t % frame_stack) * dim, 1, dim) = features.row(t);
  return out;
}

/// Sinusoidal position table: sin on even columns, cos on odd.
template <typename S>
Matrix<S> positional_encoding(Eigen::Index frames, Eigen::Index dim) {
  Matrix<S> pe(frames, dim);
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (Eigen::Index i = 0; i < dim; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
      const double angle = static_cast<double>(t) * rate;
      pe(t, i) = static_cast<S>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  }
  return pe;
}

template <typename S>
struct EncoderOutput {
  /// Layer-normalized output of the last layer, T' x d_model.
  Var<S> final_states;
  /// CTC inputs per level (finest first); unset entries were not computed.
  std::vector<Var<S>> level_log_probs;
  /// Softmax posteriors A emitted at each intermediate tap, in layer order.
  std::vector<Var<S>> tapped_posteriors;
  /// Layer (1-based) each level was read from.
  std::vector<int> level_layers;
  /// attention[layer][head], T' x T'; filled only when requested.
  std::vector<std::vector<Matrix<S>>> attention;
};

struct EncodeOptions {
  // When false, intermediate heads and conditioning are bypassed entirely.
  bool use_intermediate_taps = true;
  bool keep_attention = false;
};

/// Pre-norm self-attention encoder with per-level CTC projection heads.
template <typename S>
class Encoder {
 public:
  struct LayerIndex {
    std::size_t ln1_gain, ln1_bias, wq, bq, wk, bk, wv, bv, wo, bo;
    std::size_t ln2_gain, ln2_bias, w1, b1, w2, b2;
  };
  struct Linear {
    std::size_t weight, bias;
  };

  Encoder(const EncoderConfig& config, std::uint64_t seed) : config_(config) {
    config_.validate();
    std::mt19937_64 rng(seed);
    initialize(rng);
    resolve();
  }

  /// Wraps existing parameters; names and shapes must match `config`.
  Encoder(const EncoderConfig& config, ParameterSet<S> params) : config_(config), params_(std::move(params)) {
    config_.validate();
    Encoder reference(config_, 0);
    if (reference.params_.size() != params_.size()) throw ConfigError("parameter count does not match configuration");
    for (const auto& p : reference.params_) {
      const auto& mine = params_[params_.index_of(p.name)];
      if (mine.shape != p.shape)
        throw DimensionError("parameter " + p.name + " has shape " + shape_string(mine.shape) + ", expected " +
                             shape_string(p.shape));
    }
    resolve();
  }

  template <typename T>
  Encoder<T> cast() const {
    return Encoder<T>(config_, params_.template cast<T>());
  }

  const EncoderConfig& config() const { return config_; }
  ParameterSet<S>& parameters() { return params_; }
  const ParameterSet<S>& parameters() const { return params_; }

  std::optional<Linear> head(int level) const { return head_[static_cast<std::size_t>(level)]; }
  std::optional<Linear> conditioning(int level) const { return cond_[static_cast<std::size_t>(level)]; }
  std::optional<Linear> adapter(int level) const { return adapter_[static_cast<std::size_t>(level)]; }
  const LayerIndex& layer(int i) const { return layers_[static_cast<std::size_t>(i)]; }

  /// One pre-norm layer: attention sublayer then feed-forward sublayer, each
  /// with a residual connection. `layer` is 0-based.
  Var<S> layer_forward(Graph<S>& g, const Var<S>& x, int layer, std::vector<Matrix<S>>* attention = nullptr,
                       std::mt19937_64* dropout_rng = nullptr) const {
    const auto& L = layers_.at(static_cast<std::size_t>(layer));
    if (x.cols() != config_.d_model)
      throw DimensionError("layer input " + shape_string(x.rows(), x.cols()) + " does not have d_model=" +
                           std::to_string(config_.d_model) + " columns");
    auto p = [&](std::size_t i) { return g.parameter(params_, i); };

    const Var<S> h = layer_norm(x, p(L.ln1_gain), p(L.ln1_bias));
    const Var<S> q = affine(h, p(L.wq), p(L.bq));
    const Var<S> k = affine(h, p(L.wk), p(L.bk));
    const Var<S> v = affine(h, p(L.wv), p(L.bv));
    const int head_dim = config_.d_model / config_.heads;
    const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(head_dim)));
    std::vector<Var<S>> contexts;
    contexts.reserve(static_cast<std::size_t>(config_.heads));
    for (int hd = 0; hd < config_.heads; ++hd) {
      const Var<S> qh = slice_cols(q, hd * head_dim, head_dim);
      const Var<S> kh = slice_cols(k, hd * head_dim, head_dim);
      const Var<S> vh = slice_cols(v, hd * head_dim, head_dim);
      const Var<S> weights = softmax(matmul_nt(qh, kh) * scale);
      if (attention) attention->push_back(weights.value());
      contexts.push_back(matmul(weights, vh));
    }
    Var<S> attended = affine(concat_cols(contexts), p(L.wo), p(L.bo));
    if (dropout_rng) attended = dropout(attended, config_.dropout, *dropout_rng);
    const Var<S> mid = x + attended;

    const Var<S> h2 = layer_norm(mid, p(L.ln2_gain), p(L.ln2_bias));
    Var<S> ff = affine(gelu(affine(h2, p(L.w1), p(L.b1))), p(L.w2), p(L.b2));
    if (dropout_rng) ff = dropout(ff, config_.dropout, *dropout_rng);
    return mid + ff;
  }

  struct Injection {
    Var<S> next;        // input to the following layer
    Var<S> posteriors;  // A, row-stochastic over the level vocabulary
    Var<S> log_probs;   // log A, the level's CTC input
  };

  /// Projects the feed-forward output of tap layer `layer` (1-based) onto its
  /// level vocabulary and, when conditioning is on, adds a linear map of the
  /// posteriors back into the stream.
  Injection condition_inject(Graph<S>& g, const Var<S>& x_ffn_out, int layer) const {
    if (config_.layout != HeadLayout::kIntermediate) throw ContractError("condition_inject needs intermediate taps");
    const auto taps = tap_positions(config_.layers, config_.loss_count);
    const auto it = std::find(taps.intermediate.begin(), taps.intermediate.end(), layer);
    if (it == taps.intermediate.end())
      throw ContractError("condition_inject invoked at layer " + std::to_string(layer) + ", which is not a tap");
    const std::size_t level = static_cast<std::size_t>(it - taps.intermediate.begin());
    auto p = [&](std::size_t i) { return g.parameter(params_, i); };

    const Var<S> logits = affine(x_ffn_out, p(head_[level]->weight), p(head_[level]->bias));
    Injection out;
    out.posteriors = softmax(logits);
    out.log_probs = log_softmax(logits);
    out.next = config_.conditioning
                   ? x_ffn_out + affine(out.posteriors, p(cond_[level]->weight), p(cond_[level]->bias))
                   : x_ffn_out;
    return out;
  }

  EncoderOutput<S> encode(Graph<S>& g, const Matrix<S>& features, const EncodeOptions& options = {},
                          std::mt19937_64* dropout_rng = nullptr) const {
    if (features.rows() < 1) throw ContractError("encode: empty input");
    if (features.cols() != config_.input_dim)
      throw DimensionError("encode: features have " + std::to_string(features.cols()) + " columns, expected " +
                           std::to_string(config_.input_dim));
    auto p = [&](std::size_t i) { return g.parameter(params_, i); };
    const int levels = config_.loss_count;

    Matrix<S> stacked = stack_frames(features, config_.frame_stack);
    const Eigen::Index frames = stacked.rows();
    Var<S> x = affine(g.constant(std::move(stacked)), p(input_.weight), p(input_.bias));
    x = x + g.constant(positional_encoding<S>(frames, config_.d_model));

    EncoderOutput<S> out;
    out.level_log_probs.resize(static_cast<std::size_t>(levels));
    out.level_layers.assign(static_cast<std::size_t>(levels), config_.layers);

    std::vector<int> taps;
    if (config_.layout == HeadLayout::kIntermediate && options.use_intermediate_taps)
      taps = tap_positions(config_.layers, levels).intermediate;

    std::size_t next_tap = 0;
    for (int i = 0; i < config_.layers; ++i) {
      std::vector<Matrix<S>>* maps = nullptr;
      if (options.keep_attention) maps = &out.attention.emplace_back();
      x = layer_forward(g, x, i, maps, dropout_rng);
      if (next_tap < taps.size() && taps[next_tap] == i + 1) {
        Injection inj = condition_inject(g, x, i + 1);
        out.tapped_posteriors.push_back(inj.posteriors);
        out.level_log_probs[next_tap] = inj.log_probs;
        out.level_layers[next_tap] = i + 1;
        x = inj.next;
        ++next_tap;
      }
    }

    out.final_states = layer_norm(x, p(final_norm_.weight), p(final_norm_.bias));
    const std::size_t last = static_cast<std::size_t>(levels - 1);
    if (config_.layout == HeadLayout::kParallel) {
      for (std::size_t k = 0; k < last; ++k) {
        const Var<S> adapted = affine(out.final_states, p(adapter_[k]->weight), p(adapter_[k]->bias));
        out.level_log_probs[k] = log_softmax(affine(adapted, p(head_[k]->weight), p(head_[k]->bias)));
      }
    }
    out.level_log_probs[last] =
        log_softmax(affine(out.final_states, p(head_[last]->weight), p(head_[last]->bias)));
    return out;
  }

 private:
  void initialize(std::mt19937_64& rng) {
    const int d = config_.d_model;
    const int in_dim = config_.input_dim * config_.frame_stack;
    auto zeros_row = [](int n) { return Matrix<S>(Matrix<S>::Zero(1, n)); };
    auto ones_row = [](int n) { return Matrix<S>(Matrix<S>::Ones(1, n)); };

    params_.add("input.weight", glorot_uniform<S>(in_dim, d, rng));
    params_.add("input.bias", zeros_row(d), true);
    for (int i = 0; i < config_.layers; ++i) {
      const std::string pre = "layers." + std::to_string(i + 1) + ".";
      params_.add(pre + "ln1.gain", ones_row(d), true);
      params_.add(pre + "ln1.bias", zeros_row(d), true);
      for (const char* name : {"q", "k", "v", "o"}) {
        params_.add(pre + "attn." + name + ".weight", glorot_uniform<S>(d, d, rng));
        params_.add(pre + "attn." + name + ".bias", zeros_row(d), true);
      }
      params_.add(pre + "ln2.gain", ones_row(d), true);
      params_.add(pre + "ln2.bias", zeros_row(d), true);
      params_.add(pre + "ffn.1.weight", glorot_uniform<S>(d, config_.d_ff, rng));
      params_.add(pre + "ffn.1.bias", zeros_row(config_.d_ff), true);
      params_.add(pre + "ffn.2.weight", glorot_uniform<S>(config_.d_ff, d, rng));
      params_.add(pre + "ffn.2.bias", zeros_row(d), true);
    }
    params_.add("final_norm.gain", ones_row(d), true);
    params_.add("final_norm.bias", zeros_row(d), true);

    const int levels = config_.loss_count;
    for (int k = 0; k < levels; ++k) {
      const bool last = k == levels - 1;
      if (!last && config_.layout == HeadLayout::kFinalOnly) continue;
      const std::string lv = std::to_string(k + 1);
      const int width = config_.level_vocab_sizes[static_cast<std::size_t>(k)];
      if (!last && config_.layout == HeadLayout::kParallel) {
        params_.add("adapters." + lv + ".weight", Matrix<S>(Matrix<S>::Identity(d, d)));
        params_.add("adapters." + lv + ".bias", zeros_row(d), true);
      }
      params_.add("heads." + lv + ".weight", glorot_uniform<S>(d, width, rng));
      params_.add("heads." + lv + ".bias", zeros_row(width), true);
      if (!last && config_.layout == HeadLayout::kIntermediate && config_.conditioning) {
        // Zero start: the model begins identical to its unconditioned twin.
        params_.add("cond." + lv + ".weight", Matrix<S>(Matrix<S>::Zero(width, d)));
        params_.add("cond." + lv + ".bias", zeros_row(d), true);
      }
    }
  }

  void resolve() {
    auto at = [&](const std::string& n) { return params_.index_of(n); };
    auto linear = [&](const std::string& n) { return Linear{at(n + ".weight"), at(n + ".bias")}; };
    input_ = linear("input");
    final_norm_ = Linear{at("final_norm.gain"), at("final_norm.bias")};
    layers_.clear();
    for (int i = 0; i < config_.layers; ++i) {
      const std::string pre = "layers." + std::to_string(i + 1) + ".";
      LayerIndex L{};
      L.ln1_gain = at(pre + "ln1.gain");
      L.ln1_bias = at(pre + "ln1.bias");
      L.wq = at(pre + "attn.q.weight");
      L.bq = at(pre + "attn.q.bias");
      L.wk = at(pre + "attn.k.weight");
      L.bk = at(pre + "attn.k.bias");
      L.wv = at(pre + "attn.v.weight");
      L.bv = at(pre + "attn.v.bias");
      L.wo = at(pre + "attn.o.weight");
      L.bo = at(pre + "attn.o.bias");
      L.ln2_gain = at(pre + "ln2.gain");
      L.ln2_bias = at(pre + "ln2.bias");
      L.w1 = at(pre + "ffn.1.weight");
      L.b1 = at(pre + "ffn.1.bias");
      L.w2 = at(pre + "ffn.2.weight");
      L.b2 = at(pre + "ffn.2.bias");
      layers_.push_back(L);
    }
    const std::size_t levels = static_cast<std::size_t>(config_.loss_count);
    head_.assign(levels, std::nullopt);
    cond_.assign(levels, std::nullopt);
    adapter_.assign(levels, std::nullopt);
    for (std::size_t k = 0; k < levels; ++k) {
      const std::string lv = std::to_string(k + 1);
      if (params_.contains("heads." + lv + ".weight")) head_[k] = linear("heads." + lv);
      if (params_.contains("cond." + lv + ".weight")) cond_[k] = linear("cond." + lv);
      if (params_.contains("adapters." + lv + ".weight")) adapter_[k] = linear("adapters." + lv);
    }
  }

  EncoderConfig config_;
  ParameterSet<S> params_;
  Linear input_{};
  Linear final_norm_{};
  std::vector<LayerIndex> layers_;
  std::vector<std::optional<Linear>> head_;
  std::vector<std::optional<Linear>> cond_;
  std::vector<std::optional<Linear>> adapter_;
};

}  // namespace hcctc

#endif  // HCCTC_ENCODER_ENCODER_HPP_
