// Copyright Contributors to the gatesplat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <exception>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace gatesplat {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Mat3 = Eigen::Matrix3d;
using Mat2 = Eigen::Matrix2d;
using Quat = Eigen::Quaterniond;

constexpr double kPi = std::numbers::pi;

// Error hierarchy. The CLI maps ConfigError to exit code 2 and everything
// else derived from Error to exit code 3.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : Error {
  using Error::Error;
};
struct ValidationError : Error {
  using Error::Error;
};
struct LookupError : Error {
  using Error::Error;
};
struct ParameterError : Error {
  using Error::Error;
};
struct RankDeficiencyError : Error {
  using Error::Error;
};
struct StateError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct SamplingError : Error {
  using Error::Error;
};

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  if (a > -kPi && a <= kPi) return a;
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a <= 0.0) a += 2.0 * kPi;
  return a - kPi;
}

inline double clamp_abs(double v, double limit) { return std::clamp(v, -limit, limit); }

inline bool all_finite(const Vec3& v) { return v.allFinite(); }

/// Rotation about +z by `yaw`.
inline Mat3 rot_z(double yaw) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  Mat3 r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

/// SplitMix64 finalizer; used to derive independent streams from seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return mix64(mix64(master) ^ (index * 0xd1b54a32d192ed03ULL + 0x632be59bd9b4e019ULL));
}

/// Maps 64 random bits to [0, 1) with 53-bit resolution.
constexpr double bits_to_unit(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Standard normal from two hashed keys (Box-Muller). Pure function of inputs.
inline double hashed_normal(std::uint64_t key, std::uint64_t sub) {
  const double u1 = bits_to_unit(mix64(key ^ mix64(2 * sub + 1)));
  const double u2 = bits_to_unit(mix64(key ^ mix64(2 * sub + 2)));
  return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * kPi * u2);
}

/// Deterministic random source. The engine (mt19937_64) is fully specified by
/// the standard; the distributions are written here so sample sequences are
/// identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform() { return bits_to_unit(engine_()); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::size_t uniform_index(std::size_t n) {
    return std::min(static_cast<std::size_t>(uniform() * static_cast<double>(n)), n - 1);
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform(), u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log1p(-u1));
    spare_ = r * std::sin(2.0 * kPi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * kPi * u2);
  }

  /// Knuth's multiplication method; fine for the small rates used here.
  unsigned poisson(double rate) {
    if (rate <= 0.0) return 0;
    const double limit = std::exp(-rate);
    unsigned k = 0;
    double p = uniform();
    while (p > limit) {
      ++k;
      p *= uniform();
    }
    return k;
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Each index is handled
/// exactly once, so callers writing into slot i get schedule-independent output.
inline void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, n));
  std::vector<std::exception_ptr> errors(jobs);
  {
    std::vector<std::jthread> pool;
    pool.reserve(jobs);
    for (unsigned w = 0; w < jobs; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < n; i += jobs) fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Shortest round-trip decimal text for a double (locale independent).
inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) return "nan";
  return std::string(buf.data(), end);
}

/// FNV-1a, 64 bit. Stable provenance hash for config text.
constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace gatesplat
