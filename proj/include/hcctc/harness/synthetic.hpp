#ifndef HCCTC_HARNESS_SYNTHETIC_HPP_
#define HCCTC_HARNESS_SYNTHETIC_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "hcctc/harness/config_file.hpp"
#include "hcctc/numerics/tensor.hpp"

namespace hcctc::harness {

/// A text-to-frames task standing in for speech. Each letter (and the word
/// separator) owns a fixed random prototype vector; an utterance's features
/// are `frames_per_symbol` noisy copies of each prototype in transcript order.
/// With `distinct_initials` a word-initial letter has its own prototype, so
/// the features realize the "▁x" base symbols of the subword inventory.
struct SyntheticTask {
  int alphabet_size = 26;
  // Words start with one of the first `onset_count` letters.
  int onset_count = 10;
  bool distinct_initials = true;
  // When false no word contains the same letter twice in a row.
  bool adjacent_repeats = false;
  int inventory_size = 500;
  int min_word_length = 2;
  int max_word_length = 6;
  int min_words = 2;
  int max_words = 5;
  // Word frequencies follow rank^-zipf_exponent.
  double zipf_exponent = 1.0;
  int frames_per_symbol = 4;
  int feature_dim = 16;
  double noise_sigma = 0.1;
  std::uint64_t seed = 1;
  int train_count = 500;
  int dev_count = 100;
  int test_count = 100;

  void validate() const;
  static SyntheticTask from_config(const KeyValueFile& kv);
  KeyValueFile to_config() const;
};

struct Utterance {
  std::string id;
  std::string text;
  Matrix<float> features;
  std::string feature_path;  // relative to the data directory
};

struct Corpus {
  std::vector<Utterance> train, dev, test;
  std::vector<std::string> inventory;

  const std::vector<Utterance>& split(const std::string& name) const;
};

std::vector<std::string> generate_inventory(const SyntheticTask& task);
Corpus generate_synthetic_corpus(const SyntheticTask& task);

/// Writes <split>.tsv manifests, feats/<id>.hfea, train.txt and task.cfg.
void write_corpus(const Corpus& corpus, const SyntheticTask& task, const std::string& dir);

/// Reads the manifests (and feature files) of every split present in `dir`.
Corpus load_corpus(const std::string& dir);
std::vector<Utterance> load_split(const std::string& dir, const std::string& split);

std::vector<std::string> transcripts(const std::vector<Utterance>& utterances);

}  // namespace hcctc::harness

#endif  // HCCTC_HARNESS_SYNTHETIC_HPP_
