#ifndef HCCTC_HARNESS_WER_HPP_
#define HCCTC_HARNESS_WER_HPP_

#include <cstddef>
#include <string>
#include <vector>

namespace hcctc::harness {

/// Unit-cost Levenshtein distance between word sequences.
std::size_t edit_distance(const std::vector<std::string>& ref, const std::vector<std::string>& hyp);

/// edit_distance / max(1, |ref|).
double edit_distance_wer(const std::vector<std::string>& ref, const std::vector<std::string>& hyp);

/// Accumulates edits and reference words over many utterances.
struct WerAccumulator {
  std::size_t edits = 0;
  std::size_t ref_words = 0;

  void add(const std::string& ref, const std::string& hyp);
  /// Corpus WER: total edits / max(1, total reference words).
  double wer() const;
};

}  // namespace hcctc::harness

#endif  // HCCTC_HARNESS_WER_HPP_
