#ifndef HCCTC_SUBWORD_VOCAB_HPP_
#define HCCTC_SUBWORD_VOCAB_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace hcctc::subword {

inline constexpr int kBlankId = 0;
inline constexpr int kUnkId = 1;
inline constexpr std::string_view kWordStart = "\xE2\x96\x81";  // U+2581
inline constexpr std::string_view kBlankToken = "<blank>";
inline constexpr std::string_view kUnkToken = "<unk>";

using Merge = std::pair<std::string, std::string>;

/// Splits UTF-8 text into code-point strings. Invalid lead bytes are kept as
/// single-byte symbols.
std::vector<std::string> utf8_chars(std::string_view text);

/// Space-separated words; empty fields are dropped.
std::vector<std::string> split_words(std::string_view text);

/// Frequency-merge subword inventory. Ids 0 and 1 are the reserved blank and
/// unknown symbols; the remaining ids are base symbols (plain characters and
/// word-start-marked first characters) followed by merged tokens in the order
/// they were created.
class SubwordVocab {
 public:
  SubwordVocab() = default;

  /// Greedy pair merging over the corpus word counts until `target_size`
  /// tokens exist or no adjacent pair occurs at least twice. Equal counts are
  /// resolved toward the lexicographically smaller concatenation.
  static SubwordVocab train(const std::vector<std::string>& corpus, std::size_t target_size);

  /// Smallest feasible target size for `corpus`: base symbols plus the two specials.
  static std::size_t minimum_size(const std::vector<std::string>& corpus);

  std::vector<int> segment(std::string_view text) const;
  std::string detokenize(std::span<const int> ids) const;

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(int id) const;
  std::optional<int> id_of(const std::string& token) const;
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<Merge>& merges() const { return merges_; }

  void save(const std::string& path) const;
  static SubwordVocab load(const std::string& path);

  friend bool operator==(const SubwordVocab& a, const SubwordVocab& b) {
    return a.tokens_ == b.tokens_ && a.merges_ == b.merges_;
  }

 private:
  SubwordVocab(std::vector<std::string> tokens, std::vector<Merge> merges);
  std::vector<std::string> word_symbols(const std::string& word) const;

  std::vector<std::string> tokens_;
  std::vector<Merge> merges_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace hcctc::subword

#endif  // HCCTC_SUBWORD_VOCAB_HPP_
