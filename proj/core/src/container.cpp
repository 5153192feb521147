#include "kfbi/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "kfbi/error.hpp"

namespace kfbi {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

namespace {
constexpr std::string_view kEndHeader = "end_header\n";
}

void write_container(const std::filesystem::path& path, const Container& c) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << c.magic << '\n' << c.header.to_string() << kEndHeader;
  out.write(reinterpret_cast<const char*>(c.payload.data()),
            static_cast<std::streamsize>(c.payload.size()));
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

Container parse_container(std::span<const std::uint8_t> bytes, std::string_view expected_magic,
                          const std::string& source) {
  const std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  const auto nl = text.find('\n');
  if (nl == std::string_view::npos || text.substr(0, nl) != expected_magic) {
    throw ConfigError(source + ": bad magic (expected " + std::string(expected_magic) + ")");
  }
  const auto end = text.find(kEndHeader, nl + 1);
  if (end == std::string_view::npos) {
    throw ConfigError(source + ": truncated header (no end_header)");
  }
  Container c;
  c.magic = std::string(expected_magic);
  c.header = KeyValueDoc::parse(text.substr(nl + 1, end - nl - 1), source);
  const auto payload_begin = end + kEndHeader.size();
  c.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(payload_begin), bytes.end());
  return c;
}

Container read_container(const std::filesystem::path& path, std::string_view expected_magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_container(bytes, expected_magic, path.string());
}

void append_f64(std::vector<std::uint8_t>& out, double v) {
  std::uint8_t buf[8];
  std::memcpy(buf, &v, 8);
  out.insert(out.end(), buf, buf + 8);
}

void append_f64(std::vector<std::uint8_t>& out, std::span<const double> v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(v.data());
  out.insert(out.end(), p, p + v.size() * sizeof(double));
}

void append_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  std::uint8_t buf[4];
  std::memcpy(buf, &v, 4);
  out.insert(out.end(), buf, buf + 4);
}

void PayloadReader::need(std::size_t n) const {
  if (bytes_.size() - pos_ < n) {
    throw ConfigError(source_ + ": truncated payload (need " + std::to_string(n) + " more bytes, have " +
                      std::to_string(bytes_.size() - pos_) + ")");
  }
}

double PayloadReader::f64() {
  need(8);
  double v;
  std::memcpy(&v, bytes_.data() + pos_, 8);
  pos_ += 8;
  return v;
}

void PayloadReader::f64(std::span<double> out) {
  need(out.size() * 8);
  std::memcpy(out.data(), bytes_.data() + pos_, out.size() * 8);
  pos_ += out.size() * 8;
}

std::uint32_t PayloadReader::u32() {
  need(4);
  std::uint32_t v;
  std::memcpy(&v, bytes_.data() + pos_, 4);
  pos_ += 4;
  return v;
}

std::string PayloadReader::bytes(std::size_t n) {
  need(n);
  std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
  pos_ += n;
  return s;
}

}  // namespace kfbi
