#pragma once

#include <filesystem>
#include <random>
#include <string>

namespace kfbi::test {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::string read_bytes(const std::filesystem::path& p);
void write_bytes(const std::filesystem::path& p, const std::string& bytes);

inline std::filesystem::path repo_data(const std::string& rel) { return std::filesystem::path(KFBI_REPO_DATA) / rel; }
inline std::filesystem::path test_data(const std::string& rel) { return std::filesystem::path(KFBI_TEST_DATA) / rel; }

}  // namespace kfbi::test
