#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace prpm {

/// Flat `key = value` configuration. Lines starting with '#' are comments,
/// blank lines are ignored, and whitespace around keys and values is trimmed.
/// Keys are kept sorted so that `write` is byte-stable.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(std::istream& in);
  static KeyValueConfig load(const std::filesystem::path& path);

  void write(std::ostream& out) const;

  bool contains(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  std::optional<std::string> find(const std::string& key) const;

  /// Copies every entry of `other` over this one (other wins).
  void overlay(const KeyValueConfig& other);

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Splits a value on ';' (trimmed, empty items dropped).
  std::vector<std::string> get_list(const std::string& key,
                                    const std::vector<std::string>& fallback) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

std::string trim(std::string_view text);
std::vector<std::string> split_list(std::string_view text, char separator = ';');
std::string join_list(const std::vector<std::string>& items, char separator = ';');

/// Parses "a-b" (inclusive range) or "a;b;c" into a list of counts.
std::vector<std::size_t> parse_count_range(std::string_view text);

}  // namespace prpm
