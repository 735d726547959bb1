// Copyright Contributors to the gatesplat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Shared helpers for the test suite: random scenes and a scratch directory.

#include "gatesplat/scene.hpp"

#include <filesystem>
#include <string>

namespace gatesplat::testing {

inline Quat random_rotation(Rng& rng) {
  Quat q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  return q.normalized();
}

inline Gaussian random_gaussian(Rng& rng, double extent = 5.0) {
  Gaussian g;
  g.mean = Vec3(rng.uniform(-extent, extent), rng.uniform(-extent, extent), rng.uniform(-extent, extent));
  g.rotation = random_rotation(rng);
  g.scale = Vec3(rng.uniform(0.01, 0.5), rng.uniform(0.01, 0.5), rng.uniform(0.01, 0.5));
  g.color = Vec3(rng.uniform(), rng.uniform(), rng.uniform());
  g.opacity = rng.uniform();
  return g;
}

/// Scene of `n` random gaussians with two random overlapping objects.
inline GaussianScene random_scene(Rng& rng, std::size_t n, double extent = 5.0) {
  GaussianScene s;
  for (std::size_t i = 0; i < n; ++i) s.gaussians.push_back(random_gaussian(rng, extent));
  for (const char* id : {"a", "b"}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < n; ++i)
      if (rng.bernoulli(0.3)) idx.push_back(i);
    if (idx.empty() && n > 0) idx.push_back(rng.uniform_index(n));
    s.objects[id] = idx;
  }
  return s;
}

/// Fresh empty directory under the system temp path.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("gatesplat_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string data_path(const std::string& rel) { return std::string(GATESPLAT_DATA_DIR) + "/" + rel; }

}  // namespace gatesplat::testing
