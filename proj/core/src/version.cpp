#include "kfbi/version.hpp"

#include <Eigen/Core>
#include <fftw3.h>
#include <spdlog/version.h>

namespace kfbi {

std::vector<std::pair<std::string, std::string>> build_info() {
  auto v3 = [](int a, int b, int c) {
    return std::to_string(a) + "." + std::to_string(b) + "." + std::to_string(c);
  };
  return {
      {"kfbi", kVersion},
      {"eigen", v3(EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION)},
      {"fftw", fftw_version},
      {"spdlog", v3(SPDLOG_VER_MAJOR, SPDLOG_VER_MINOR, SPDLOG_VER_PATCH)},
#if defined(__clang__)
      {"compiler", std::string("clang ") + __clang_version__},
#elif defined(__GNUC__)
      {"compiler", std::string("gcc ") + __VERSION__},
#endif
  };
}

}  // namespace kfbi
