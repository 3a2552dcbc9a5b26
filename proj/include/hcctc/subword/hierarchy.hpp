#ifndef HCCTC_SUBWORD_HIERARCHY_HPP_
#define HCCTC_SUBWORD_HIERARCHY_HPP_

#include <cstddef>
#include <string>
#include <vector>

#include "hcctc/subword/vocab.hpp"

namespace hcctc::subword {

/// Target id sequences for one utterance, one per level (finest first).
struct HierTargets {
  std::vector<std::vector<int>> levels;
};

/// One independently trained vocabulary per size, over the same corpus.
/// Sizes must be nondecreasing and each at least the base inventory.
std::vector<SubwordVocab> build_hierarchy(const std::vector<std::string>& corpus, const std::vector<std::size_t>& sizes);

HierTargets segment_levels(const std::string& text, const std::vector<SubwordVocab>& vocabs);

std::vector<HierTargets> segment_corpus(const std::vector<std::string>& corpus, const std::vector<SubwordVocab>& vocabs);

/// Mean segmented length per level over `targets`.
std::vector<double> mean_lengths(const std::vector<HierTargets>& targets);

void save_hierarchy(const std::string& dir, const std::vector<SubwordVocab>& vocabs);
std::vector<SubwordVocab> load_hierarchy(const std::string& dir);

}  // namespace hcctc::subword

#endif  // HCCTC_SUBWORD_HIERARCHY_HPP_
