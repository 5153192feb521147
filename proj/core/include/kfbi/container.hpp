#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kfbi/keyvalue.hpp"

namespace kfbi {

/// Self-describing binary container shared by the KFBIF1 (grid field),
/// KFBID1 (dataset) and KFBIW1 (weights) formats:
///
///     <MAGIC>\n
///     key = value\n   (header, structured text)
///     ...
///     end_header\n
///     <payload bytes>
///
/// Numeric payloads are IEEE-754 float64, little-endian.
struct Container {
  std::string magic;
  KeyValueDoc header;
  std::vector<std::uint8_t> payload;
};

void write_container(const std::filesystem::path& path, const Container& c);
Container read_container(const std::filesystem::path& path, std::string_view expected_magic);
Container parse_container(std::span<const std::uint8_t> bytes, std::string_view expected_magic,
                          const std::string& source);

void append_f64(std::vector<std::uint8_t>& out, double v);
void append_f64(std::vector<std::uint8_t>& out, std::span<const double> v);
void append_u32(std::vector<std::uint8_t>& out, std::uint32_t v);

/// Sequential little-endian reader over a payload; throws ConfigError on
/// truncation.
class PayloadReader {
 public:
  PayloadReader(std::span<const std::uint8_t> bytes, std::string source)
      : bytes_(bytes), source_(std::move(source)) {}

  double f64();
  void f64(std::span<double> out);
  std::uint32_t u32();
  std::string bytes(std::size_t n);
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const;

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::string source_;
};

}  // namespace kfbi
