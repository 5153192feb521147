#pragma once

#include <string>
#include <utility>
#include <vector>

namespace kfbi {

inline constexpr const char* kVersion = "0.1.0";

/// Library and toolchain versions recorded in run manifests.
std::vector<std::pair<std::string, std::string>> build_info();

}  // namespace kfbi
