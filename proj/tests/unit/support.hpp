#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include <Eigen/Core>
#include <Eigen/LU>

#include "openvox/geometry.hpp"

namespace testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag)
      : path_(std::filesystem::temp_directory_path() /
              ("openvox_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++))) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  static int& counter() {
    static int n = 0;
    return n;
  }
  std::filesystem::path path_;
};

inline std::vector<float> random_unit(std::mt19937_64& rng, int dim) {
  std::normal_distribution<float> n(0.0f, 1.0f);
  std::vector<float> v(dim);
  double s = 0.0;
  for (auto& x : v) {
    x = n(rng);
    s += double(x) * x;
  }
  for (auto& x : v) x = static_cast<float>(x / std::sqrt(s));
  return v;
}

inline openvox::VoxelSet random_voxels(std::mt19937_64& rng, int count, int extent, double resolution,
                                       openvox::VoxelKey offset = {}) {
  std::uniform_int_distribution<int> d(0, extent - 1);
  std::vector<openvox::VoxelKey> keys;
  for (int i = 0; i < count; ++i) keys.push_back({offset.x + d(rng), offset.y + d(rng), offset.z + d(rng)});
  return openvox::VoxelSet::from_keys(std::move(keys), resolution);
}

// A solid block of voxels [x0, x0 + nx) x [y0, y0 + ny) x [z0, z0 + nz).
inline openvox::VoxelSet block(int x0, int y0, int z0, int nx, int ny, int nz, double resolution) {
  std::vector<openvox::VoxelKey> keys;
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < ny; ++y)
      for (int z = 0; z < nz; ++z) keys.push_back({x0 + x, y0 + y, z0 + z});
  return openvox::VoxelSet::from_keys(std::move(keys), resolution);
}

}  // namespace testing
