// Copyright Contributors to the gatesplat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gatesplat/common.hpp"

#include <cstddef>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace gatesplat {

constexpr double kUnitNormTolerance = 1e-6;

/// Similarity transform x -> scale * R x + t. Scale defaults to 1 (rigid).
struct RigidTransform {
  Quat rotation = Quat::Identity();
  Vec3 translation = Vec3::Zero();
  double scale = 1.0;

  static RigidTransform identity() { return {}; }

  Vec3 apply(const Vec3& p) const { return scale * (rotation * p) + translation; }

  RigidTransform inverse() const {
    RigidTransform inv;
    inv.rotation = rotation.conjugate();
    inv.scale = 1.0 / scale;
    inv.translation = -(inv.scale * (inv.rotation * translation));
    return inv;
  }

  /// (a * b)(x) == a(b(x))
  friend RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) {
    RigidTransform c;
    c.rotation = (a.rotation * b.rotation).normalized();
    c.scale = a.scale * b.scale;
    c.translation = a.apply(b.translation);
    return c;
  }

  void validate() const {
    if (std::abs(rotation.norm() - 1.0) > kUnitNormTolerance)
      throw ValidationError("transform rotation is not a unit quaternion");
    if (!(scale > 0.0) || !std::isfinite(scale)) throw ValidationError("transform scale must be > 0");
    if (!translation.allFinite()) throw ValidationError("transform translation is not finite");
  }
};

/// One anisotropic splat. Covariance is derived from (rotation, scale) and
/// never stored.
struct Gaussian {
  Vec3 mean = Vec3::Zero();
  Quat rotation = Quat::Identity();
  Vec3 scale = Vec3::Ones();
  Vec3 color = Vec3::Constant(0.5);
  double opacity = 1.0;

  Mat3 covariance() const {
    const Mat3 r = rotation.normalized().toRotationMatrix();
    return r * scale.cwiseAbs2().asDiagonal() * r.transpose();
  }

  friend bool operator==(const Gaussian& a, const Gaussian& b) {
    return a.mean == b.mean && a.rotation.coeffs() == b.rotation.coeffs() && a.scale == b.scale &&
           a.color == b.color && a.opacity == b.opacity;
  }
};

/// Throws ValidationError naming `index` if any invariant of `g` fails.
inline void validate_gaussian(const Gaussian& g, std::size_t index) {
  const auto where = [&](const char* what) {
    return ValidationError("gaussian " + std::to_string(index) + ": " + what);
  };
  if (!g.mean.allFinite() || !g.rotation.coeffs().allFinite() || !g.scale.allFinite() ||
      !g.color.allFinite() || !std::isfinite(g.opacity))
    throw where("non-finite field");
  if (std::abs(g.rotation.norm() - 1.0) > kUnitNormTolerance) throw where("rotation is not unit norm");
  if ((g.scale.array() <= 0.0).any()) throw where("scale must be strictly positive");
  if ((g.color.array() < 0.0).any() || (g.color.array() > 1.0).any()) throw where("color outside [0,1]");
  if (g.opacity < 0.0 || g.opacity > 1.0) throw where("opacity outside [0,1]");
}

/// Ordered gaussians plus named, possibly overlapping, index sets. Object sets
/// are kept sorted and duplicate-free.
struct GaussianScene {
  std::vector<Gaussian> gaussians;
  std::map<std::string, std::vector<std::size_t>> objects;

  std::size_t size() const { return gaussians.size(); }
  bool empty() const { return gaussians.empty(); }

  void validate() const {
    for (std::size_t i = 0; i < gaussians.size(); ++i) validate_gaussian(gaussians[i], i);
    for (const auto& [id, idx] : objects) {
      for (std::size_t k = 0; k < idx.size(); ++k) {
        if (idx[k] >= gaussians.size())
          throw ValidationError("object '" + id + "' references missing gaussian " + std::to_string(idx[k]));
        if (k > 0 && idx[k] <= idx[k - 1])
          throw ValidationError("object '" + id + "' index set is not sorted/unique");
      }
    }
  }

  friend bool operator==(const GaussianScene&, const GaussianScene&) = default;
};

/// Closed axis-aligned world-frame box.
struct Box3 {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  bool contains(const Vec3& p) const { return (p.array() >= min.array()).all() && (p.array() <= max.array()).all(); }
};

struct ObjectRef {
  std::string id;
};

using Selection = std::variant<ObjectRef, Box3>;

/// Sorted indices addressed by a selection. Box selection tests means only.
inline std::vector<std::size_t> resolve_selection(const GaussianScene& scene, const Selection& selection) {
  if (const auto* ref = std::get_if<ObjectRef>(&selection)) {
    const auto it = scene.objects.find(ref->id);
    if (it == scene.objects.end()) throw LookupError("unknown object id '" + ref->id + "'");
    return it->second;
  }
  const auto& box = std::get<Box3>(selection);
  if ((box.min.array() > box.max.array()).any()) throw ParameterError("selection box has min > max");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < scene.gaussians.size(); ++i)
    if (box.contains(scene.gaussians[i].mean)) out.push_back(i);
  return out;
}

/// Mean of the selected gaussians' means. Requires a non-empty selection.
inline Vec3 selection_centroid(const GaussianScene& scene, const std::vector<std::size_t>& indices) {
  Vec3 sum = Vec3::Zero();
  for (auto i : indices) sum += scene.gaussians[i].mean;
  return sum / static_cast<double>(indices.size());
}

}  // namespace gatesplat
