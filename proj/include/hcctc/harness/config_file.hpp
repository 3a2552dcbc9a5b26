#ifndef HCCTC_HARNESS_CONFIG_FILE_HPP_
#define HCCTC_HARNESS_CONFIG_FILE_HPP_

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace hcctc::harness {

/// Flat `key=value` text. Blank lines and lines starting with '#' are
/// ignored; whitespace around keys and values is trimmed.
class KeyValueFile {
 public:
  KeyValueFile() = default;
  static KeyValueFile parse(const std::string& text, const std::string& origin = "<string>");
  static KeyValueFile read(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::string get(const std::string& key, const std::string& fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::int64_t get_int64(const std::string& key, std::int64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::size_t> get_sizes(const std::string& key) const;

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  const std::map<std::string, std::string>& values() const { return values_; }

  /// Throws ConfigError naming the first key not in `known`.
  void require_known(const std::set<std::string>& known) const;

 private:
  std::map<std::string, std::string> values_;
  std::string origin_;
};

std::vector<std::size_t> parse_size_list(const std::string& text);

}  // namespace hcctc::harness

#endif  // HCCTC_HARNESS_CONFIG_FILE_HPP_
