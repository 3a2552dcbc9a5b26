#ifndef HCCTC_HARNESS_PIPELINE_HPP_
#define HCCTC_HARNESS_PIPELINE_HPP_

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <random>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "hcctc/ctc/ctc.hpp"
#include "hcctc/encoder/encoder.hpp"
#include "hcctc/harness/metrics.hpp"
#include "hcctc/harness/synthetic.hpp"
#include "hcctc/harness/training_config.hpp"
#include "hcctc/harness/wer.hpp"
#include "hcctc/numerics/checkpoint.hpp"
#include "hcctc/objectives/objectives.hpp"
#include "hcctc/subword/hierarchy.hpp"

namespace hcctc::harness {

/// Per-level scores of one model over one split. Losses are means over the
/// utterances feasible at that level; `total_loss` averages per-utterance
/// objective values.
struct EvalResult {
  std::vector<double> level_loss;
  std::vector<double> level_wer;
  std::vector<int> level_infeasible;
  double total_loss = std::numeric_limits<double>::infinity();
  std::vector<std::string> hypotheses;  // last level, in utterance order
};

/// Best-path decode of row-stochastic posteriors into text.
std::string decode_posteriors(const Matrix<double>& posteriors, const subword::SubwordVocab& vocab);

/// Trains (or loads, when `config.vocab_dir` is set) one vocabulary per model level.
std::vector<subword::SubwordVocab> prepare_vocabularies(const TrainingConfig& config,
                                                        const std::vector<std::string>& train_text);

std::vector<int> level_widths(const std::vector<subword::SubwordVocab>& vocabs);

namespace detail {

struct UtteranceScore {
  std::vector<double> level_loss;
  double total = std::numeric_limits<double>::infinity();
  bool feasible = false;
  std::vector<WerAccumulator> wer;
  std::string hypothesis;
};

template <typename S>
UtteranceScore score_utterance(const Encoder<S>& model, Objective objective,
                               const std::vector<subword::SubwordVocab>& vocabs, const Utterance& u) {
  Graph<S> g(false);
  const EncoderOutput<S> enc = model.encode(g, u.features.template cast<S>());
  const ObjectiveReport<S> rep = evaluate_objective(objective, enc, subword::segment_levels(u.text, vocabs));
  UtteranceScore s;
  s.level_loss = rep.per_level_losses;
  s.feasible = rep.feasible();
  s.total = rep.total_loss;
  s.wer.resize(vocabs.size());
  for (std::size_t k = 0; k < vocabs.size(); ++k) {
    const Var<S>& lp = enc.level_log_probs[k];
    if (!lp.valid()) continue;
    const Matrix<double> post = lp.value().template cast<double>().array().exp().matrix();
    std::string hyp = decode_posteriors(post, vocabs[k]);
    s.wer[k].add(u.text, hyp);
    if (k + 1 == vocabs.size()) s.hypothesis = std::move(hyp);
  }
  return s;
}

}  // namespace detail

/// Scores every utterance, spread over the available hardware threads, then
/// reduces in utterance order so the result does not depend on the thread count.
template <typename S>
EvalResult evaluate_model(const Encoder<S>& model, Objective objective,
                          const std::vector<subword::SubwordVocab>& vocabs, const std::vector<Utterance>& utts) {
  std::vector<detail::UtteranceScore> scores(utts.size());
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < utts.size(); i = next++) {
      try {
        scores[i] = detail::score_utterance(model, objective, vocabs, utts[i]);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()), utts.size());
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  const std::size_t levels = vocabs.size();
  EvalResult r;
  std::vector<double> loss_sum(levels, 0.0);
  std::vector<int> loss_n(levels, 0);
  std::vector<WerAccumulator> wer(levels);
  r.level_infeasible.assign(levels, 0);
  double total_sum = 0.0;
  int total_n = 0;
  for (const auto& s : scores) {
    for (std::size_t i = 0; i < s.level_loss.size(); ++i) {
      if (std::isinf(s.level_loss[i]) && s.level_loss[i] > 0) {
        ++r.level_infeasible[i];
      } else {
        loss_sum[i] += s.level_loss[i];
        ++loss_n[i];
      }
    }
    if (s.feasible) {
      total_sum += s.total;
      ++total_n;
    }
    for (std::size_t k = 0; k < levels; ++k) {
      wer[k].edits += s.wer[k].edits;
      wer[k].ref_words += s.wer[k].ref_words;
    }
    r.hypotheses.push_back(s.hypothesis);
  }
  r.level_loss.resize(levels);
  r.level_wer.resize(levels);
  for (std::size_t k = 0; k < levels; ++k) {
    r.level_loss[k] = loss_n[k] ? loss_sum[k] / loss_n[k] : std::numeric_limits<double>::infinity();
    r.level_wer[k] = wer[k].ref_words ? wer[k].wer() : std::numeric_limits<double>::quiet_NaN();
  }
  if (total_n) r.total_loss = total_sum / total_n;
  return r;
}

/// Outcome of one gradient accumulation over a batch.
struct BatchResult {
  int feasible = 0;
  int skipped = 0;  // utterances with no feasible level
  double mean_loss = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> level_losses;  // per utterance, in batch order
  // Position in the batch of the first non-finite objective, or -1.
  int nonfinite = -1;
};

/// Backpropagates every utterance of `batch` into `grads` (zeroed first) and
/// divides by the feasible count. Utterances with no feasible level
/// contribute nothing. Stops at the first non-finite objective value.
template <typename S>
BatchResult accumulate_batch(const Encoder<S>& model, Objective objective, const std::vector<Matrix<S>>& features,
                             const std::vector<subword::HierTargets>& targets, const std::vector<std::size_t>& batch,
                             GradientSet<S>& grads, std::mt19937_64* dropout_rng = nullptr) {
  BatchResult r;
  grads.set_zero();
  double sum = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Graph<S> g;
    const EncoderOutput<S> enc = model.encode(g, features[batch[i]], {}, dropout_rng);
    const ObjectiveReport<S> rep = evaluate_objective(objective, enc, targets[batch[i]]);
    r.level_losses.push_back(rep.per_level_losses);
    if (!rep.feasible()) {
      ++r.skipped;
      continue;
    }
    if (!std::isfinite(rep.total_loss)) {
      r.nonfinite = static_cast<int>(i);
      return r;
    }
    g.backward(rep.total);
    g.accumulate_into(grads);
    sum += rep.total_loss;
    ++r.feasible;
  }
  if (r.feasible > 0) {
    grads.scale(static_cast<S>(1.0 / r.feasible));
    r.mean_loss = sum / r.feasible;
  }
  return r;
}

struct TrainResult {
  std::vector<std::string> checkpoints;  // per epoch, epoch 0 = initialization
  std::vector<double> dev_losses;        // aligned with checkpoints[1..]
  std::vector<double> dev_wers;          // aligned with checkpoints[1..]
  std::string averaged;                  // empty when no epoch ran
  EvalResult averaged_dev;
  int epochs_run = 0;
  double seconds = 0.0;
};

/// Runs the full loop into `out_dir`: train.cfg, vocab.<k>.txt, ckpt.<epoch>.bin,
/// metrics.tsv, timing.tsv and, after at least one epoch, averaged.bin.
TrainResult train(const TrainingConfig& config, const Corpus& corpus, const std::string& out_dir,
                  std::ostream* log = nullptr);

/// Indices of the `n` lowest dev losses (earlier wins ties), in ascending index order.
std::vector<std::size_t> select_best(const std::vector<double>& dev_losses, std::size_t n);

/// A trained model with its run configuration and vocabularies, as found next
/// to a checkpoint file.
struct ModelBundle {
  TrainingConfig config;
  std::vector<subword::SubwordVocab> vocabs;
  Encoder<float> model;
};

ModelBundle load_model(const std::string& checkpoint_path);

EvalResult evaluate(const ModelBundle& bundle, const std::vector<Utterance>& utts);

std::string decode(const ModelBundle& bundle, const Matrix<float>& features);

/// Writes layerLL.headH.txt attention maps, per-level posterior matrices and
/// an index.tsv listing them in encoder order.
std::vector<std::string> dump_attention(const ModelBundle& bundle, const Utterance& utt, const std::string& out_dir);

const Utterance& find_utterance(const Corpus& corpus, const std::string& id);

}  // namespace hcctc::harness

#endif  // HCCTC_HARNESS_PIPELINE_HPP_
