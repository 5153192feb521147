#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kfbi {

/// Ordered `key = value` document used by every structured-text input
/// (curve descriptors, problem files, suites, dataset configs) and by the
/// headers of the binary container formats.
///
/// Lines starting with `#` are comments. Keys may repeat (e.g. one
/// `control_point` per row); `get` returns the last occurrence and `get_all`
/// returns all of them in file order.
class KeyValueDoc {
 public:
  struct Entry {
    std::string key;
    std::string value;
    int line = 0;
  };

  KeyValueDoc() = default;

  static KeyValueDoc parse(std::string_view text, std::string source = "<text>");
  static KeyValueDoc load(const std::filesystem::path& path);

  void set(std::string key, std::string value);
  void add(std::string key, std::string value);
  void merge(const KeyValueDoc& other);

  bool has(std::string_view key) const;
  std::optional<std::string> get(std::string_view key) const;
  std::vector<std::string> get_all(std::string_view key) const;

  std::string require(std::string_view key) const;
  double get_double(std::string_view key, double fallback) const;
  double require_double(std::string_view key) const;
  long get_int(std::string_view key, long fallback) const;
  long require_int(std::string_view key) const;
  std::vector<double> get_doubles(std::string_view key) const;

  /// Throws ConfigError naming the first key not in `allowed`.
  void reject_unknown(const std::vector<std::string>& allowed) const;

  const std::vector<Entry>& entries() const { return entries_; }
  const std::string& source() const { return source_; }
  std::string to_string() const;

  /// Error message prefix pointing at `key` ("file:line: key 'x': ").
  std::string where(std::string_view key) const;

 private:
  const Entry* find_last(std::string_view key) const;

  std::vector<Entry> entries_;
  std::string source_ = "<memory>";
};

/// Whitespace/comma separated numbers.
std::vector<double> parse_numbers(std::string_view text);
std::string trim(std::string_view s);
std::vector<std::string> split_ws(std::string_view s);

}  // namespace kfbi
