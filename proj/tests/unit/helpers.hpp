#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "tensor.hpp"

namespace r2u3d::test {

template <typename T>
TensorPtr<T> random_tensor(std::mt19937_64& rng, const Shape5& shape, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  auto t = make_tensor<T>(shape);
  for (auto& v : t->values()) v = static_cast<T>(dist(rng));
  return t;
}

/// Fresh empty directory under the system temp dir, unique per test name.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("r2u3d_unit_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace r2u3d::test
