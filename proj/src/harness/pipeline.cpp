#include "hcctc/harness/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "hcctc/harness/features.hpp"
#include "hcctc/numerics/adam.hpp"

namespace hcctc::harness {

namespace fs = std::filesystem;

std::string decode_posteriors(const Matrix<double>& posteriors, const subword::SubwordVocab& vocab) {
  const std::vector<int> ids = ctc::best_path_decode(posteriors);
  return vocab.detokenize(ids);
}

std::vector<subword::SubwordVocab> prepare_vocabularies(const TrainingConfig& config,
                                                        const std::vector<std::string>& train_text) {
  const std::size_t levels = static_cast<std::size_t>(config.model_levels());
  std::vector<subword::SubwordVocab> vocabs;
  if (!config.vocab_dir.empty()) {
    vocabs = subword::load_hierarchy(config.vocab_dir);
    if (vocabs.size() == levels) return vocabs;
    // A single prebuilt inventory may serve every level of ctc / sc-ctc.
    if (config.objective == Objective::kCtc) return {vocabs.back()};
    if (config.objective == Objective::kScCtc && vocabs.size() == 1) return std::vector(levels, vocabs.front());
    throw ConfigError(config.vocab_dir + " holds " + std::to_string(vocabs.size()) + " vocabularies, " +
                      to_string(config.objective) + " needs " + std::to_string(levels));
  }
  if (config.objective == Objective::kScCtc) {
    const auto shared = subword::SubwordVocab::train(train_text, config.vocab_sizes.back());
    return std::vector(levels, shared);
  }
  return subword::build_hierarchy(train_text, config.level_sizes());
}

std::vector<int> level_widths(const std::vector<subword::SubwordVocab>& vocabs) {
  std::vector<int> w;
  for (const auto& v : vocabs) w.push_back(static_cast<int>(v.size()));
  return w;
}

std::vector<std::size_t> select_best(const std::vector<double>& dev_losses, std::size_t n) {
  std::vector<std::size_t> order(dev_losses.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double la = std::isnan(dev_losses[a]) ? std::numeric_limits<double>::infinity() : dev_losses[a];
    const double lb = std::isnan(dev_losses[b]) ? std::numeric_limits<double>::infinity() : dev_losses[b];
    return la < lb;
  });
  order.resize(std::min(n, order.size()));
  std::sort(order.begin(), order.end());
  return order;
}

namespace {

std::string checkpoint_name(int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ckpt.%03d.bin", epoch);
  return buf;
}

void write_config(const std::string& path, const KeyValueFile& kv) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatError("cannot write " + path);
  for (const auto& [k, v] : kv.values()) os << k << '=' << v << '\n';
}

std::string join_numbers(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_number(v[i]);
  return s;
}

// Utterance batches: indices sorted by frame count, cut into consecutive
// buckets of batch_size; bucket order is shuffled per epoch.
std::vector<std::vector<std::size_t>> make_buckets(const std::vector<Utterance>& utts, int batch_size) {
  std::vector<std::size_t> order(utts.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return utts[a].features.rows() < utts[b].features.rows(); });
  std::vector<std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(batch_size))
    buckets.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + batch_size)));
  return buckets;
}

void append_eval_rows(MetricsWriter& metrics, std::vector<MetricRow>* sink, const std::string& epoch,
                      const std::string& split, const EvalResult& r) {
  for (std::size_t k = 0; k < r.level_loss.size(); ++k) {
    MetricRow row{epoch, split, std::to_string(k + 1), r.level_loss[k], r.level_wer[k]};
    metrics.append(row);
    if (sink) sink->push_back(row);
  }
  MetricRow total{epoch, split, "total", r.total_loss, r.level_wer.empty() ? NAN : r.level_wer.back()};
  metrics.append(total);
  if (sink) sink->push_back(total);
}

template <typename S>
TrainResult train_impl(const TrainingConfig& config, const Corpus& corpus, const std::string& out_dir,
                       std::ostream* log) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  if (corpus.train.empty()) throw ConfigError("training split is empty");
  fs::create_directories(out_dir);

  const auto vocabs = prepare_vocabularies(config, transcripts(corpus.train));
  subword::save_hierarchy(out_dir, vocabs);
  const int input_dim = static_cast<int>(corpus.train.front().features.cols());
  const EncoderConfig enc_cfg = config.encoder_config(input_dim, level_widths(vocabs));
  write_config((fs::path(out_dir) / "train.cfg").string(), config.to_config());

  Encoder<S> model(enc_cfg, config.seed);
  AdamState<S> adam(model.parameters());
  GradientSet<S> grads(model.parameters());

  std::vector<subword::HierTargets> targets;
  targets.reserve(corpus.train.size());
  for (const auto& u : corpus.train) targets.push_back(subword::segment_levels(u.text, vocabs));
  std::vector<Matrix<S>> features;
  features.reserve(corpus.train.size());
  for (const auto& u : corpus.train) features.push_back(u.features.template cast<S>());

  TrainResult result;
  const std::string init = (fs::path(out_dir) / checkpoint_name(0)).string();
  write_checkpoint(init, to_checkpoint(model.parameters()));
  result.checkpoints.push_back(init);

  std::string sizes;
  for (std::size_t k = 0; k < vocabs.size(); ++k) sizes += (k ? "," : "") + std::to_string(vocabs[k].size());
  MetricsWriter metrics((fs::path(out_dir) / "metrics.tsv").string(),
                        {{"objective", to_string(config.objective)},
                         {"conditioning", config.conditioning ? "on" : "off"},
                         {"layout", to_string(enc_cfg.layout)},
                         {"seed", std::to_string(config.seed)},
                         {"layers", std::to_string(config.layers)},
                         {"levels", std::to_string(vocabs.size())},
                         {"vocab_sizes", sizes},
                         {"precision", std::to_string(config.precision)}});
  std::ofstream timing(fs::path(out_dir) / "timing.tsv", std::ios::trunc);
  timing << "epoch\tseconds\n";

  const std::size_t levels = vocabs.size();
  auto buckets = make_buckets(corpus.train, config.batch_size);
  std::mt19937_64 shuffle_rng(config.seed ^ 0x5DEECE66DULL);
  std::mt19937_64 dropout_rng(config.seed + 7);
  std::mt19937_64* drop = config.dropout > 0 ? &dropout_rng : nullptr;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto epoch_start = Clock::now();
    std::shuffle(buckets.begin(), buckets.end(), shuffle_rng);
    std::vector<double> level_sum(levels, 0.0);
    std::vector<int> level_n(levels, 0);
    int batch_index = 0;
    for (const auto& batch : buckets) {
      ++batch_index;
      const BatchResult step = accumulate_batch(model, config.objective, features, targets, batch, grads, drop);
      for (const auto& losses : step.level_losses) {
        for (std::size_t k = 0; k < losses.size(); ++k) {
          if (std::isfinite(losses[k])) {
            level_sum[k] += losses[k];
            ++level_n[k];
          }
        }
      }
      if (step.nonfinite >= 0) {
        std::ostringstream msg;
        msg << "non-finite training loss at epoch " << epoch << " batch " << batch_index << ", utterance "
            << corpus.train[batch[static_cast<std::size_t>(step.nonfinite)]].id << ", per-level losses ["
            << join_numbers(step.level_losses.back()) << "], batch [";
        for (std::size_t j = 0; j < batch.size(); ++j) msg << (j ? " " : "") << corpus.train[batch[j]].id;
        msg << "]";
        throw NumericError(msg.str());
      }
      if (step.feasible == 0) continue;
      if (config.grad_clip > 0) {
        const double norm = std::sqrt(static_cast<double>(grads.squared_norm()));
        if (!std::isfinite(norm)) throw NumericError("non-finite gradient norm at epoch " + std::to_string(epoch));
        if (norm > config.grad_clip) grads.scale(static_cast<S>(config.grad_clip / norm));
      }
      const double lr = noam_learning_rate(adam.step + 1, config.peak_lr, config.warmup_steps);
      adam_step(model.parameters(), grads, adam, lr);
    }

    const std::string ep = std::to_string(epoch);
    for (std::size_t k = 0; k < levels; ++k) {
      metrics.append({ep, "train", std::to_string(k + 1),
                      level_n[k] ? level_sum[k] / level_n[k] : std::numeric_limits<double>::infinity(), NAN});
    }
    const EvalResult dev = evaluate_model(model, config.objective, vocabs, corpus.dev);
    append_eval_rows(metrics, nullptr, ep, "dev", dev);

    const std::string ckpt = (fs::path(out_dir) / checkpoint_name(epoch)).string();
    write_checkpoint(ckpt, to_checkpoint(model.parameters()));
    result.checkpoints.push_back(ckpt);
    result.dev_losses.push_back(dev.total_loss);
    const double dev_wer = dev.level_wer.empty() ? NAN : dev.level_wer.back();
    result.dev_wers.push_back(dev_wer);
    result.epochs_run = epoch;

    const double secs = std::chrono::duration<double>(Clock::now() - epoch_start).count();
    timing << epoch << '\t' << secs << '\n' << std::flush;
    if (log) {
      *log << "epoch " << epoch << "  train";
      for (std::size_t k = 0; k < levels; ++k)
        *log << ' ' << (level_n[k] ? level_sum[k] / level_n[k] : std::numeric_limits<double>::infinity());
      *log << "  dev " << dev.total_loss << "  dev_wer " << dev_wer << "  (" << secs << " s)" << std::endl;
    }
    if (config.stop_at_dev_wer >= 0 && dev_wer <= config.stop_at_dev_wer) break;
  }

  if (result.epochs_run > 0) {
    const auto best = select_best(result.dev_losses, static_cast<std::size_t>(config.average_count));
    std::vector<Checkpoint> chosen;
    for (std::size_t i : best) chosen.push_back(read_checkpoint(result.checkpoints[i + 1]));
    result.averaged = (fs::path(out_dir) / "averaged.bin").string();
    const Checkpoint avg = average_checkpoints(chosen);
    write_checkpoint(result.averaged, avg);
    Encoder<S> averaged(enc_cfg, config.seed);
    load_into(avg, averaged.parameters());
    result.averaged_dev = evaluate_model(averaged, config.objective, vocabs, corpus.dev);
    append_eval_rows(metrics, nullptr, "avg", "dev", result.averaged_dev);
  }
  result.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return result;
}

}  // namespace

TrainResult train(const TrainingConfig& config, const Corpus& corpus, const std::string& out_dir, std::ostream* log) {
  config.validate();
  if (config.precision == 64) return train_impl<double>(config, corpus, out_dir, log);
  return train_impl<float>(config, corpus, out_dir, log);
}

ModelBundle load_model(const std::string& checkpoint_path) {
  const fs::path dir = fs::path(checkpoint_path).parent_path();
  const fs::path cfg_path = dir / "train.cfg";
  if (!fs::exists(cfg_path)) throw ConfigError("no train.cfg next to checkpoint " + checkpoint_path);
  TrainingConfig config = TrainingConfig::from_config(KeyValueFile::read(cfg_path.string()));
  auto vocabs = subword::load_hierarchy(dir.string());
  if (static_cast<int>(vocabs.size()) != config.model_levels())
    throw ConfigError("found " + std::to_string(vocabs.size()) + " vocabularies for a " +
                      std::to_string(config.model_levels()) + "-level model");
  const Checkpoint ckpt = read_checkpoint(checkpoint_path);
  int input_dim = -1;
  for (const auto& e : ckpt)
    if (e.name == "input.weight") input_dim = static_cast<int>(e.shape.at(0)) / config.frame_stack;
  if (input_dim < 1) throw CheckpointError("checkpoint has no input.weight entry");
  for (std::size_t k = 0; k < vocabs.size(); ++k) {
    const std::string name = "heads." + std::to_string(k + 1) + ".weight";
    for (const auto& e : ckpt)
      if (e.name == name && e.shape.at(1) != vocabs[k].size())
        throw ConfigError("level " + std::to_string(k + 1) + " head width " + std::to_string(e.shape.at(1)) +
                          " does not match its vocabulary of " + std::to_string(vocabs[k].size()));
  }
  Encoder<float> model(config.encoder_config(input_dim, level_widths(vocabs)), config.seed);
  load_into(ckpt, model.parameters());
  return ModelBundle{std::move(config), std::move(vocabs), std::move(model)};
}

EvalResult evaluate(const ModelBundle& bundle, const std::vector<Utterance>& utts) {
  if (!utts.empty() && utts.front().features.cols() != bundle.model.config().input_dim)
    throw ConfigError("feature dimension " + std::to_string(utts.front().features.cols()) +
                      " does not match the model input " + std::to_string(bundle.model.config().input_dim));
  if (bundle.config.precision == 64)
    return evaluate_model(bundle.model.cast<double>(), bundle.config.objective, bundle.vocabs, utts);
  return evaluate_model(bundle.model, bundle.config.objective, bundle.vocabs, utts);
}

std::string decode(const ModelBundle& bundle, const Matrix<float>& features) {
  Graph<float> g(false);
  const auto enc = bundle.model.encode(g, features);
  const Matrix<double> post = enc.level_log_probs.back().value().cast<double>().array().exp().matrix();
  return decode_posteriors(post, bundle.vocabs.back());
}

std::vector<std::string> dump_attention(const ModelBundle& bundle, const Utterance& utt, const std::string& out_dir) {
  fs::create_directories(out_dir);
  Graph<float> g(false);
  EncodeOptions opts;
  opts.keep_attention = true;
  const auto enc = bundle.model.encode(g, utt.features, opts);

  struct Entry {
    int layer;
    int order;  // attention maps before posteriors within a layer
    std::string kind, file;
  };
  std::vector<Entry> entries;
  char name[96];
  for (std::size_t l = 0; l < enc.attention.size(); ++l) {
    for (std::size_t h = 0; h < enc.attention[l].size(); ++h) {
      std::snprintf(name, sizeof name, "layer%02zu.head%zu.txt", l + 1, h + 1);
      write_text_matrix((fs::path(out_dir) / name).string(), enc.attention[l][h].cast<double>());
      entries.push_back({static_cast<int>(l + 1), 0, "attention", name});
    }
  }
  for (std::size_t k = 0; k < enc.level_log_probs.size(); ++k) {
    const auto& lp = enc.level_log_probs[k];
    if (!lp.valid()) continue;
    std::snprintf(name, sizeof name, "posteriors.level%zu.layer%02d.txt", k + 1, enc.level_layers[k]);
    write_text_matrix((fs::path(out_dir) / name).string(), lp.value().cast<double>().array().exp().matrix());
    entries.push_back({enc.level_layers[k], 1, "posteriors", name});
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry& a, const Entry& b) { return std::tie(a.layer, a.order) < std::tie(b.layer, b.order); });
  std::ofstream index(fs::path(out_dir) / "index.tsv", std::ios::trunc);
  index << "layer\tkind\tfile\n";
  std::vector<std::string> files;
  for (const auto& e : entries) {
    index << e.layer << '\t' << e.kind << '\t' << e.file << '\n';
    files.push_back(e.file);
  }
  return files;
}

const Utterance& find_utterance(const Corpus& corpus, const std::string& id) {
  for (const auto* split : {&corpus.train, &corpus.dev, &corpus.test})
    for (const auto& u : *split)
      if (u.id == id) return u;
  throw LookupError("unknown utterance id: " + id);
}

}  // namespace hcctc::harness
