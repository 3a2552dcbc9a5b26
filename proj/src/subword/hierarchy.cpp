#include "hcctc/subword/hierarchy.hpp"

#include <filesystem>

#include "hcctc/errors.hpp"

namespace hcctc::subword {

std::vector<SubwordVocab> build_hierarchy(const std::vector<std::string>& corpus, const std::vector<std::size_t>& sizes) {
  if (sizes.empty()) throw ConfigError("vocabulary hierarchy needs at least one size");
  for (std::size_t k = 1; k < sizes.size(); ++k)
    if (sizes[k] < sizes[k - 1]) throw ConfigError("vocabulary sizes must be nondecreasing");
  const std::size_t minimum = SubwordVocab::minimum_size(corpus);
  for (auto s : sizes)
    if (s < minimum)
      throw ConfigError("vocabulary size " + std::to_string(s) + " is below the base inventory; minimum is " +
                        std::to_string(minimum));
  std::vector<SubwordVocab> vocabs;
  vocabs.reserve(sizes.size());
  for (auto s : sizes) vocabs.push_back(SubwordVocab::train(corpus, s));
  return vocabs;
}

HierTargets segment_levels(const std::string& text, const std::vector<SubwordVocab>& vocabs) {
  HierTargets t;
  t.levels.reserve(vocabs.size());
  for (const auto& v : vocabs) t.levels.push_back(v.segment(text));
  return t;
}

std::vector<HierTargets> segment_corpus(const std::vector<std::string>& corpus, const std::vector<SubwordVocab>& vocabs) {
  std::vector<HierTargets> out;
  out.reserve(corpus.size());
  for (const auto& line : corpus) out.push_back(segment_levels(line, vocabs));
  return out;
}

std::vector<double> mean_lengths(const std::vector<HierTargets>& targets) {
  if (targets.empty()) return {};
  std::vector<double> mean(targets.front().levels.size(), 0.0);
  for (const auto& t : targets)
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += static_cast<double>(t.levels[k].size());
  for (auto& m : mean) m /= static_cast<double>(targets.size());
  return mean;
}

void save_hierarchy(const std::string& dir, const std::vector<SubwordVocab>& vocabs) {
  std::filesystem::create_directories(dir);
  for (std::size_t k = 0; k < vocabs.size(); ++k)
    vocabs[k].save((std::filesystem::path(dir) / ("vocab." + std::to_string(k + 1) + ".txt")).string());
}

std::vector<SubwordVocab> load_hierarchy(const std::string& dir) {
  std::vector<SubwordVocab> vocabs;
  for (std::size_t k = 1;; ++k) {
    const auto path = std::filesystem::path(dir) / ("vocab." + std::to_string(k) + ".txt");
    if (!std::filesystem::exists(path)) break;
    vocabs.push_back(SubwordVocab::load(path.string()));
  }
  if (vocabs.empty()) throw LookupError("no vocab.<k>.txt files in " + dir);
  return vocabs;
}

}  // namespace hcctc::subword
