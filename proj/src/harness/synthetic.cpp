#include "hcctc/harness/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "hcctc/errors.hpp"
#include "hcctc/harness/features.hpp"

namespace hcctc::harness {

namespace fs = std::filesystem;

void SyntheticTask::validate() const {
  if (inventory_size < 1) throw ConfigError("word inventory must not be empty");
  if (alphabet_size < 1 || alphabet_size > 26) throw ConfigError("alphabet_size must be in [1, 26]");
  if (onset_count < 1 || onset_count > alphabet_size) throw ConfigError("onset_count must be in [1, alphabet_size]");
  if (min_word_length < 1 || max_word_length < min_word_length) throw ConfigError("bad word length range");
  if (!adjacent_repeats && alphabet_size < 2 && max_word_length > 1)
    throw ConfigError("words longer than one letter need adjacent_repeats with a one-letter alphabet");
  if (min_words < 1 || max_words < min_words) throw ConfigError("bad words-per-utterance range");
  if (frames_per_symbol < 1) throw ConfigError("frames_per_symbol must be positive");
  if (feature_dim < 1) throw ConfigError("feature_dim must be positive");
  if (noise_sigma < 0) throw ConfigError("noise_sigma must be nonnegative");
  if (train_count < 0 || dev_count < 0 || test_count < 0) throw ConfigError("split sizes must be nonnegative");
  double capacity = 0;
  const double next_choices = adjacent_repeats ? alphabet_size : alphabet_size - 1;
  for (int len = min_word_length; len <= max_word_length; ++len)
    capacity += onset_count * std::pow(next_choices, len - 1);
  if (capacity < inventory_size) throw ConfigError("word length range cannot hold the requested inventory");
}

SyntheticTask SyntheticTask::from_config(const KeyValueFile& kv) {
  kv.require_known({"alphabet_size", "onset_count", "distinct_initials", "adjacent_repeats", "inventory_size", "min_word_length", "max_word_length",
                    "min_words", "max_words", "zipf_exponent", "frames_per_symbol", "feature_dim", "noise_sigma",
                    "seed", "train_count", "dev_count", "test_count"});
  SyntheticTask t;
  t.alphabet_size = kv.get_int("alphabet_size", t.alphabet_size);
  t.onset_count = kv.get_int("onset_count", t.onset_count);
  t.distinct_initials = kv.get_bool("distinct_initials", t.distinct_initials);
  t.adjacent_repeats = kv.get_bool("adjacent_repeats", t.adjacent_repeats);
  t.inventory_size = kv.get_int("inventory_size", t.inventory_size);
  t.min_word_length = kv.get_int("min_word_length", t.min_word_length);
  t.max_word_length = kv.get_int("max_word_length", t.max_word_length);
  t.min_words = kv.get_int("min_words", t.min_words);
  t.max_words = kv.get_int("max_words", t.max_words);
  t.zipf_exponent = kv.get_double("zipf_exponent", t.zipf_exponent);
  t.frames_per_symbol = kv.get_int("frames_per_symbol", t.frames_per_symbol);
  t.feature_dim = kv.get_int("feature_dim", t.feature_dim);
  t.noise_sigma = kv.get_double("noise_sigma", t.noise_sigma);
  t.seed = static_cast<std::uint64_t>(kv.get_int64("seed", static_cast<std::int64_t>(t.seed)));
  t.train_count = kv.get_int("train_count", t.train_count);
  t.dev_count = kv.get_int("dev_count", t.dev_count);
  t.test_count = kv.get_int("test_count", t.test_count);
  t.validate();
  return t;
}

KeyValueFile SyntheticTask::to_config() const {
  KeyValueFile kv;
  auto num = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  kv.set("alphabet_size", std::to_string(alphabet_size));
  kv.set("onset_count", std::to_string(onset_count));
  kv.set("distinct_initials", distinct_initials ? "1" : "0");
  kv.set("adjacent_repeats", adjacent_repeats ? "1" : "0");
  kv.set("inventory_size", std::to_string(inventory_size));
  kv.set("min_word_length", std::to_string(min_word_length));
  kv.set("max_word_length", std::to_string(max_word_length));
  kv.set("min_words", std::to_string(min_words));
  kv.set("max_words", std::to_string(max_words));
  kv.set("zipf_exponent", num(zipf_exponent));
  kv.set("frames_per_symbol", std::to_string(frames_per_symbol));
  kv.set("feature_dim", std::to_string(feature_dim));
  kv.set("noise_sigma", num(noise_sigma));
  kv.set("seed", std::to_string(seed));
  kv.set("train_count", std::to_string(train_count));
  kv.set("dev_count", std::to_string(dev_count));
  kv.set("test_count", std::to_string(test_count));
  return kv;
}

const std::vector<Utterance>& Corpus::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "dev") return dev;
  if (name == "test") return test;
  throw LookupError("unknown split: " + name);
}

std::vector<std::string> generate_inventory(const SyntheticTask& task) {
  task.validate();
  std::mt19937_64 rng(task.seed);
  std::uniform_int_distribution<int> length(task.min_word_length, task.max_word_length);
  std::uniform_int_distribution<int> onset(0, task.onset_count - 1);
  std::uniform_int_distribution<int> letter(0, task.alphabet_size - 1);
  std::set<std::string> seen;
  std::vector<std::string> words;
  long attempts = 0;
  while (static_cast<int>(words.size()) < task.inventory_size) {
    if (++attempts > 1000L * task.inventory_size + 100000)
      throw ConfigError("could not draw " + std::to_string(task.inventory_size) + " distinct words");
    const int n = length(rng);
    std::string w(1, static_cast<char>('a' + onset(rng)));
    while (static_cast<int>(w.size()) < n) {
      const char c = static_cast<char>('a' + letter(rng));
      if (task.adjacent_repeats || c != w.back()) w += c;
    }
    if (seen.insert(w).second) words.push_back(w);
  }
  return words;
}

Corpus generate_synthetic_corpus(const SyntheticTask& task) {
  task.validate();
  Corpus corpus;
  corpus.inventory = generate_inventory(task);

  // Separate streams keep the inventory stable when split sizes change.
  std::mt19937_64 proto_rng(task.seed ^ 0x9E3779B97F4A7C15ULL);
  std::normal_distribution<double> unit(0.0, 1.0);
  // Rows: letters, then word-initial variants of the onsets, then the separator.
  const int initials = task.distinct_initials ? task.onset_count : 0;
  const int separator = task.alphabet_size + initials;
  const int symbols = separator + 1;
  Matrix<double> prototypes(symbols, task.feature_dim);
  for (Eigen::Index i = 0; i < prototypes.size(); ++i) prototypes.data()[i] = unit(proto_rng);

  std::vector<double> weights;
  for (int r = 1; r <= task.inventory_size; ++r) weights.push_back(std::pow(static_cast<double>(r), -task.zipf_exponent));
  std::discrete_distribution<int> word_pick(weights.begin(), weights.end());
  std::uniform_int_distribution<int> count(task.min_words, task.max_words);

  std::mt19937_64 text_rng(task.seed + 1);
  std::mt19937_64 noise_rng(task.seed + 2);
  auto make = [&](const std::string& split, int n, std::vector<Utterance>& out) {
    for (int i = 0; i < n; ++i) {
      Utterance u;
      char id[64];
      std::snprintf(id, sizeof id, "%s-%04d", split.c_str(), i);
      u.id = id;
      const int words = count(text_rng);
      for (int w = 0; w < words; ++w) {
        if (w) u.text += ' ';
        u.text += corpus.inventory[static_cast<std::size_t>(word_pick(text_rng))];
      }
      const int f = task.frames_per_symbol;
      u.features.resize(static_cast<Eigen::Index>(u.text.size()) * f, task.feature_dim);
      for (std::size_t c = 0; c < u.text.size(); ++c) {
        const bool initial = c == 0 || u.text[c - 1] == ' ';
        const int sym = u.text[c] == ' '                      ? separator
                        : initial && task.distinct_initials ? task.alphabet_size + (u.text[c] - 'a')
                                                            : u.text[c] - 'a';
        for (int r = 0; r < f; ++r) {
          const Eigen::Index row = static_cast<Eigen::Index>(c) * f + r;
          for (int d = 0; d < task.feature_dim; ++d) {
            double v = prototypes(sym, d);
            if (task.noise_sigma > 0) v += task.noise_sigma * unit(noise_rng);
            u.features(row, d) = static_cast<float>(v);
          }
        }
      }
      u.feature_path = "feats/" + u.id + ".hfea";
      out.push_back(std::move(u));
    }
  };
  make("train", task.train_count, corpus.train);
  make("dev", task.dev_count, corpus.dev);
  make("test", task.test_count, corpus.test);
  return corpus;
}

void write_corpus(const Corpus& corpus, const SyntheticTask& task, const std::string& dir) {
  fs::create_directories(fs::path(dir) / "feats");
  for (const char* split : {"train", "dev", "test"}) {
    std::ofstream manifest(fs::path(dir) / (std::string(split) + ".tsv"), std::ios::trunc);
    if (!manifest) throw FormatError("cannot write manifest in " + dir);
    for (const auto& u : corpus.split(split)) {
      manifest << u.id << '\t' << u.text << '\t' << u.feature_path << '\n';
      write_features((fs::path(dir) / u.feature_path).string(), u.features);
    }
  }
  std::ofstream text(fs::path(dir) / "train.txt", std::ios::trunc);
  for (const auto& u : corpus.train) text << u.text << '\n';
  std::ofstream cfg(fs::path(dir) / "task.cfg", std::ios::trunc);
  const KeyValueFile kv = task.to_config();
  for (const auto& [k, v] : kv.values()) cfg << k << '=' << v << '\n';
}

std::vector<Utterance> load_split(const std::string& dir, const std::string& split) {
  const fs::path manifest = fs::path(dir) / (split + ".tsv");
  std::ifstream is(manifest);
  if (!is) throw LookupError("no manifest for split '" + split + "' in " + dir);
  std::vector<Utterance> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto a = line.find('\t');
    const auto b = a == std::string::npos ? a : line.find('\t', a + 1);
    if (b == std::string::npos) throw FormatError(manifest.string() + ": expected 3 tab-separated fields");
    Utterance u;
    u.id = line.substr(0, a);
    u.text = line.substr(a + 1, b - a - 1);
    u.feature_path = line.substr(b + 1);
    const fs::path p = fs::path(u.feature_path).is_absolute() ? fs::path(u.feature_path) : fs::path(dir) / u.feature_path;
    u.features = read_features(p.string());
    out.push_back(std::move(u));
  }
  return out;
}

Corpus load_corpus(const std::string& dir) {
  Corpus c;
  for (const char* split : {"train", "dev", "test"}) {
    if (!fs::exists(fs::path(dir) / (std::string(split) + ".tsv"))) continue;
    auto utts = load_split(dir, split);
    if (std::string(split) == "train") c.train = std::move(utts);
    else if (std::string(split) == "dev") c.dev = std::move(utts);
    else c.test = std::move(utts);
  }
  return c;
}

std::vector<std::string> transcripts(const std::vector<Utterance>& utterances) {
  std::vector<std::string> out;
  out.reserve(utterances.size());
  for (const auto& u : utterances) out.push_back(u.text);
  return out;
}

}  // namespace hcctc::harness
