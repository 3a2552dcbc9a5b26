#include "hcctc/harness/wer.hpp"

#include <algorithm>

#include "hcctc/subword/vocab.hpp"

namespace hcctc::harness {

std::size_t edit_distance(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
  std::vector<std::size_t> prev(hyp.size() + 1), cur(hyp.size() + 1);
  for (std::size_t j = 0; j <= hyp.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= ref.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= hyp.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[hyp.size()];
}

double edit_distance_wer(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
  return static_cast<double>(edit_distance(ref, hyp)) / static_cast<double>(std::max<std::size_t>(1, ref.size()));
}

void WerAccumulator::add(const std::string& ref, const std::string& hyp) {
  const auto r = subword::split_words(ref);
  edits += edit_distance(r, subword::split_words(hyp));
  ref_words += r.size();
}

double WerAccumulator::wer() const {
  return static_cast<double>(edits) / static_cast<double>(std::max<std::size_t>(1, ref_words));
}

}  // namespace hcctc::harness
