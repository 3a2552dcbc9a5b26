#include "hcctc/subword/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <tuple>

#include "hcctc/errors.hpp"

namespace hcctc::subword {
namespace {

std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

// Replaces every non-overlapping occurrence of (left, right), scanning left to right.
void apply_merge(std::vector<std::string>& symbols, const Merge& merge) {
  if (symbols.size() < 2) return;
  std::vector<std::string> out;
  out.reserve(symbols.size());
  std::size_t i = 0;
  while (i < symbols.size()) {
    if (i + 1 < symbols.size() && symbols[i] == merge.first && symbols[i + 1] == merge.second) {
      out.push_back(merge.first + merge.second);
      i += 2;
    } else {
      out.push_back(std::move(symbols[i]));
      ++i;
    }
  }
  symbols = std::move(out);
}

std::vector<std::string> initial_symbols(const std::string& word) {
  std::vector<std::string> symbols = utf8_chars(word);
  if (!symbols.empty()) symbols.front() = std::string(kWordStart) + symbols.front();
  return symbols;
}

std::map<std::string, long> count_words(const std::vector<std::string>& corpus) {
  std::map<std::string, long> counts;
  for (const auto& line : corpus)
    for (auto& w : split_words(line)) ++counts[w];
  return counts;
}

std::set<std::string> base_symbols(const std::map<std::string, long>& counts) {
  std::set<std::string> base;
  for (const auto& [word, n] : counts)
    for (auto& s : initial_symbols(word)) base.insert(s);
  return base;
}

}  // namespace

std::vector<std::string> utf8_chars(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t n = std::min(utf8_length(static_cast<unsigned char>(text[i])), text.size() - i);
    out.emplace_back(text.substr(i, n));
    i += n;
  }
  return out;
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find(' ', start);
    if (end == std::string_view::npos) end = text.size();
    if (end > start) words.emplace_back(text.substr(start, end - start));
    start = end + 1;
  }
  return words;
}

SubwordVocab::SubwordVocab(std::vector<std::string> tokens, std::vector<Merge> merges)
    : tokens_(std::move(tokens)), merges_(std::move(merges)) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second)
      throw FormatError("duplicate token in vocabulary: " + tokens_[i]);
  }
}

std::size_t SubwordVocab::minimum_size(const std::vector<std::string>& corpus) {
  return base_symbols(count_words(corpus)).size() + 2;
}

SubwordVocab SubwordVocab::train(const std::vector<std::string>& corpus, std::size_t target_size) {
  if (corpus.empty()) throw ConfigError("cannot train a vocabulary on an empty corpus");
  const auto counts = count_words(corpus);
  const auto base = base_symbols(counts);
  if (target_size < base.size() + 2)
    throw ConfigError("vocabulary size " + std::to_string(target_size) + " is below the base inventory; minimum is " +
                      std::to_string(base.size() + 2));

  std::vector<std::string> tokens{std::string(kBlankToken), std::string(kUnkToken)};
  tokens.insert(tokens.end(), base.begin(), base.end());
  std::set<std::string> known(tokens.begin(), tokens.end());

  std::vector<std::pair<std::vector<std::string>, long>> words;
  words.reserve(counts.size());
  for (const auto& [w, n] : counts) words.emplace_back(initial_symbols(w), n);

  std::vector<Merge> merges;
  while (tokens.size() < target_size) {
    std::map<Merge, long> pairs;
    for (const auto& [symbols, n] : words)
      for (std::size_t i = 0; i + 1 < symbols.size(); ++i) pairs[{symbols[i], symbols[i + 1]}] += n;

    const Merge* best = nullptr;
    long best_count = 0;
    std::string best_joined;
    for (const auto& [pair, n] : pairs) {
      if (n < 2) continue;
      std::string joined = pair.first + pair.second;
      // std::map iterates pairs in (left, right) order, so on a full tie the
      // smaller left token is already chosen.
      if (!best || n > best_count || (n == best_count && joined < best_joined)) {
        best = &pair;
        best_count = n;
        best_joined = std::move(joined);
      }
    }
    if (!best) break;

    const Merge merge = *best;
    for (auto& [symbols, n] : words) apply_merge(symbols, merge);
    merges.push_back(merge);
    if (known.insert(best_joined).second) tokens.push_back(best_joined);
  }
  return SubwordVocab(std::move(tokens), std::move(merges));
}

std::vector<std::string> SubwordVocab::word_symbols(const std::string& word) const {
  std::vector<std::string> symbols = initial_symbols(word);
  for (const auto& m : merges_) apply_merge(symbols, m);
  return symbols;
}

std::vector<int> SubwordVocab::segment(std::string_view text) const {
  std::vector<int> ids;
  for (const auto& word : split_words(text)) {
    for (const auto& s : word_symbols(word)) {
      auto it = index_.find(s);
      ids.push_back(it == index_.end() || it->second < 2 ? kUnkId : it->second);
    }
  }
  return ids;
}

std::string SubwordVocab::detokenize(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) {
    if (id == kBlankId) throw ContractError("detokenize: blank id in label sequence");
    if (id == kUnkId) {
      out += kUnkToken;
      continue;
    }
    const std::string& tok = token(id);
    if (tok.compare(0, kWordStart.size(), kWordStart) == 0) {
      out += ' ';
      out.append(tok, kWordStart.size());
    } else {
      out += tok;
    }
  }
  if (!out.empty() && out.front() == ' ') out.erase(0, 1);
  return out;
}

const std::string& SubwordVocab::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw DimensionError("token id " + std::to_string(id) + " outside vocabulary of size " +
                         std::to_string(tokens_.size()));
  return tokens_[static_cast<std::size_t>(id)];
}

std::optional<int> SubwordVocab::id_of(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void SubwordVocab::save(const std::string& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatError("cannot write vocabulary: " + path);
  for (std::size_t i = 0; i < tokens_.size(); ++i) os << i << '\t' << tokens_[i] << '\n';
  os << "#MERGES\n";
  for (const auto& [l, r] : merges_) os << l << '\t' << r << '\n';
  if (!os) throw FormatError("write failed: " + path);
}

SubwordVocab SubwordVocab::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open vocabulary: " + path);
  std::vector<std::string> tokens;
  std::vector<Merge> merges;
  std::string line;
  bool in_merges = false;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!in_merges && line == "#MERGES") {
      in_merges = true;
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw FormatError(path + ":" + std::to_string(lineno) + ": missing tab");
    if (in_merges) {
      merges.emplace_back(line.substr(0, tab), line.substr(tab + 1));
    } else {
      const std::string id = line.substr(0, tab);
      if (id != std::to_string(tokens.size()))
        throw FormatError(path + ":" + std::to_string(lineno) + ": expected id " + std::to_string(tokens.size()));
      tokens.push_back(line.substr(tab + 1));
    }
  }
  if (tokens.size() < 2 || tokens[0] != kBlankToken || tokens[1] != kUnkToken)
    throw FormatError(path + ": ids 0 and 1 must be <blank> and <unk>");
  return SubwordVocab(std::move(tokens), std::move(merges));
}

}  // namespace hcctc::subword
