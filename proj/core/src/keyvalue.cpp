#include "kfbi/keyvalue.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "kfbi/error.hpp"

namespace kfbi {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == ',' || s[i] == ';')) ++i;
    std::size_t j = i;
    while (j < s.size() && !(s[j] == ' ' || s[j] == '\t' || s[j] == ',' || s[j] == ';')) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

namespace {

std::optional<double> to_double(std::string_view token) {
  const std::string t(token);
  if (t == "pi") return 3.14159265358979323846;
  if (t == "-pi") return -3.14159265358979323846;
  // Accept "pi/7" style fractions for angles.
  if (auto slash = t.find('/'); slash != std::string::npos && t.rfind("pi", 0) == 0) {
    auto den = to_double(std::string_view(t).substr(slash + 1));
    if (!den || *den == 0.0) return std::nullopt;
    return 3.14159265358979323846 / *den;
  }
  try {
    std::size_t used = 0;
    const double v = std::stod(t, &used);
    if (used != t.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace

std::vector<double> parse_numbers(std::string_view text) {
  std::vector<double> out;
  for (const auto& tok : split_ws(text)) {
    auto v = to_double(tok);
    if (!v) throw ConfigError("not a number: '" + tok + "'");
    out.push_back(*v);
  }
  return out;
}

KeyValueDoc KeyValueDoc::parse(std::string_view text, std::string source) {
  KeyValueDoc doc;
  doc.source_ = std::move(source);
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(doc.source_ + ":" + std::to_string(lineno) + ": expected 'key = value', got '" +
                        t + "'");
    }
    std::string key = trim(std::string_view(t).substr(0, eq));
    std::string value = trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(doc.source_ + ":" + std::to_string(lineno) + ": empty key");
    }
    doc.entries_.push_back({std::move(key), std::move(value), lineno});
  }
  return doc;
}

KeyValueDoc KeyValueDoc::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

void KeyValueDoc::set(std::string key, std::string value) {
  std::erase_if(entries_, [&](const Entry& e) { return e.key == key; });
  entries_.push_back({std::move(key), std::move(value), 0});
}

void KeyValueDoc::add(std::string key, std::string value) {
  entries_.push_back({std::move(key), std::move(value), 0});
}

void KeyValueDoc::merge(const KeyValueDoc& other) {
  for (const auto& e : other.entries_) entries_.push_back(e);
}

const KeyValueDoc::Entry* KeyValueDoc::find_last(std::string_view key) const {
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->key == key) return &*it;
  }
  return nullptr;
}

bool KeyValueDoc::has(std::string_view key) const { return find_last(key) != nullptr; }

std::optional<std::string> KeyValueDoc::get(std::string_view key) const {
  if (const auto* e = find_last(key)) return e->value;
  return std::nullopt;
}

std::vector<std::string> KeyValueDoc::get_all(std::string_view key) const {
  std::vector<std::string> out;
  for (const auto& e : entries_) {
    if (e.key == key) out.push_back(e.value);
  }
  return out;
}

std::string KeyValueDoc::where(std::string_view key) const {
  const auto* e = find_last(key);
  std::string loc = source_;
  if (e && e->line > 0) loc += ":" + std::to_string(e->line);
  return loc + ": key '" + std::string(key) + "': ";
}

std::string KeyValueDoc::require(std::string_view key) const {
  auto v = get(key);
  if (!v) throw ConfigError(source_ + ": missing required key '" + std::string(key) + "'");
  return *v;
}

double KeyValueDoc::get_double(std::string_view key, double fallback) const {
  if (!has(key)) return fallback;
  return require_double(key);
}

double KeyValueDoc::require_double(std::string_view key) const {
  const std::string v = require(key);
  auto d = to_double(trim(v));
  if (!d) throw ConfigError(where(key) + "expected a number, got '" + v + "'");
  return *d;
}

long KeyValueDoc::get_int(std::string_view key, long fallback) const {
  if (!has(key)) return fallback;
  return require_int(key);
}

long KeyValueDoc::require_int(std::string_view key) const {
  const std::string v = trim(require(key));
  long out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(where(key) + "expected an integer, got '" + v + "'");
  }
  return out;
}

std::vector<double> KeyValueDoc::get_doubles(std::string_view key) const {
  const std::string v = require(key);
  try {
    return parse_numbers(v);
  } catch (const ConfigError& e) {
    throw ConfigError(where(key) + e.what());
  }
}

void KeyValueDoc::reject_unknown(const std::vector<std::string>& allowed) const {
  for (const auto& e : entries_) {
    if (std::find(allowed.begin(), allowed.end(), e.key) == allowed.end()) {
      throw ConfigError(source_ + ":" + std::to_string(e.line) + ": unknown key '" + e.key + "'");
    }
  }
}

std::string KeyValueDoc::to_string() const {
  std::string out;
  for (const auto& e : entries_) {
    out += e.key;
    out += " = ";
    out += e.value;
    out += '\n';
  }
  return out;
}

}  // namespace kfbi
