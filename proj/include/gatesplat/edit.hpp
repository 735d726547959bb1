// Copyright Contributors to the gatesplat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

// World-frame edit operations over selections.
//
// Every operation validates its parameters and resolves the selection before
// touching the scene, so a throwing call leaves the scene unmodified. Cost is
// linear in the selection size (delete is linear in the scene size because
// it compacts storage and re-indexes the object map).

#include "gatesplat/scene.hpp"

#include <Eigen/Eigenvalues>

#include <optional>

namespace gatesplat {

struct EditResult {
  /// Number of gaussians the edit touched (or created).
  std::size_t affected = 0;
  /// Set when the selection resolved to nothing and the edit was a no-op.
  bool empty_selection = false;
  /// Object id registered by duplicate/add.
  std::optional<std::string> new_object;
};

enum class LightingMode { multiply, replace };

namespace edit_detail {

inline std::string fresh_object_id(const GaussianScene& scene, const std::string& base) {
  if (!scene.objects.contains(base)) return base;
  for (std::size_t k = 1;; ++k) {
    std::string id = base + "_" + std::to_string(k);
    if (!scene.objects.contains(id)) return id;
  }
}

inline EditResult noop() {
  EditResult r;
  r.empty_selection = true;
  return r;
}

inline EditResult touched(std::size_t n, std::optional<std::string> id = std::nullopt) {
  EditResult r;
  r.affected = n;
  r.new_object = std::move(id);
  return r;
}

inline std::string selection_label(const Selection& sel) {
  if (const auto* ref = std::get_if<ObjectRef>(&sel)) return ref->id;
  return "selection";
}

}  // namespace edit_detail

/// mean += delta for every selected gaussian.
inline EditResult translate(GaussianScene& scene, const Selection& sel, const Vec3& delta) {
  if (!delta.allFinite()) throw ParameterError("translate: non-finite offset");
  const auto idx = resolve_selection(scene, sel);
  if (idx.empty()) return edit_detail::noop();
  auto* g = scene.gaussians.data();
  for (const auto i : idx) g[i].mean += delta;
  return edit_detail::touched(idx.size());
}

/// Rotates the selection about its centroid: mean' = o + q (mean - o), R' = q R.
inline EditResult rotate(GaussianScene& scene, const Selection& sel, const Quat& q) {
  if (!q.coeffs().allFinite() || q.norm() == 0.0) throw ParameterError("rotate: invalid quaternion");
  const Quat qn = q.normalized();
  const auto idx = resolve_selection(scene, sel);
  if (idx.empty()) return edit_detail::noop();
  const Vec3 o = selection_centroid(scene, idx);
  const Mat3 r = qn.toRotationMatrix();
  for (const auto i : idx) {
    auto& g = scene.gaussians[i];
    g.mean = o + r * (g.mean - o);
    g.rotation = (qn * g.rotation).normalized();
  }
  return edit_detail::touched(idx.size());
}

inline EditResult rotate(GaussianScene& scene, const Selection& sel, double angle, const Vec3& axis) {
  if (!(axis.norm() > 0.0)) throw ParameterError("rotate: zero axis");
  return rotate(scene, sel, Quat(Eigen::AngleAxisd(angle, axis.normalized())));
}

/// Scales the selection about its centroid along the world axes:
/// mean' = o + k * (mean - o). With uniform k, s' = k s and R is unchanged.
/// With anisotropic k the covariance becomes K Sigma K, re-factored into
/// rotation and per-axis scale.
inline EditResult scale(GaussianScene& scene, const Selection& sel, const Vec3& k) {
  if (!k.allFinite() || (k.array() <= 0.0).any()) throw ParameterError("scale: factors must be > 0");
  const auto idx = resolve_selection(scene, sel);
  if (idx.empty()) return edit_detail::noop();
  const Vec3 o = selection_centroid(scene, idx);
  const bool uniform = k.x() == k.y() && k.y() == k.z();
  for (const auto i : idx) {
    auto& g = scene.gaussians[i];
    g.mean = o + k.cwiseProduct(g.mean - o);
    if (uniform) {
      g.scale *= k.x();
      continue;
    }
    const Mat3 kk = k.asDiagonal();
    const Mat3 cov = kk * g.covariance() * kk;
    const Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    Mat3 axes = eig.eigenvectors();
    if (axes.determinant() < 0.0) axes.col(2) *= -1.0;
    g.rotation = Quat(axes).normalized();
    g.scale = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  }
  return edit_detail::touched(idx.size());
}

inline EditResult scale(GaussianScene& scene, const Selection& sel, double k) {
  return scale(scene, sel, Vec3::Constant(k));
}

/// Appends field-identical clones of the selection under a fresh object id.
inline EditResult duplicate(GaussianScene& scene, const Selection& sel) {
  const auto idx = resolve_selection(scene, sel);
  if (idx.empty()) throw ParameterError("duplicate: empty selection");
  const std::size_t first = scene.gaussians.size();
  scene.gaussians.reserve(first + idx.size());
  for (const auto i : idx) scene.gaussians.push_back(scene.gaussians[i]);
  std::vector<std::size_t> clone(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) clone[k] = first + k;
  std::string id = edit_detail::fresh_object_id(scene, edit_detail::selection_label(sel) + "_copy");
  scene.objects[id] = std::move(clone);
  return edit_detail::touched(idx.size(), std::move(id));
}

/// Removes exactly the selected gaussians and re-indexes every object set.
/// Objects left with no gaussians are dropped.
inline EditResult erase(GaussianScene& scene, const Selection& sel) {
  const auto idx = resolve_selection(scene, sel);
  if (idx.empty()) return edit_detail::noop();
  constexpr auto kGone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> remap(scene.gaussians.size());
  std::size_t next = 0, cursor = 0;
  for (std::size_t i = 0; i < scene.gaussians.size(); ++i) {
    if (cursor < idx.size() && idx[cursor] == i) {
      remap[i] = kGone;
      ++cursor;
      continue;
    }
    remap[i] = next;
    if (next != i) scene.gaussians[next] = scene.gaussians[i];
    ++next;
  }
  scene.gaussians.resize(next);
  for (auto it = scene.objects.begin(); it != scene.objects.end();) {
    std::vector<std::size_t> kept;
    kept.reserve(it->second.size());
    for (const auto i : it->second)
      if (remap[i] != kGone) kept.push_back(remap[i]);
    if (kept.empty()) {
      it = scene.objects.erase(it);
    } else {
      it->second = std::move(kept);
      ++it;
    }
  }
  return edit_detail::touched(idx.size());
}

/// multiply: c' = clamp(c * rgb, 0, 1) with rgb >= 0.
/// replace:  c' = rgb with rgb in [0,1].
inline EditResult lighting(GaussianScene& scene, const Selection& sel, LightingMode mode, const Vec3& rgb) {
  if (!rgb.allFinite() || (rgb.array() < 0.0).any()) throw ParameterError("lighting: negative or non-finite rgb");
  if (mode == LightingMode::replace && (rgb.array() > 1.0).any())
    throw ParameterError("lighting: replacement rgb outside [0,1]");
  const auto idx = resolve_selection(scene, sel);
  if (idx.empty()) return edit_detail::noop();
  for (const auto i : idx) {
    auto& c = scene.gaussians[i].color;
    c = mode == LightingMode::replace ? rgb : Vec3(c.cwiseProduct(rgb).cwiseMin(1.0));
  }
  return edit_detail::touched(idx.size());
}

/// Inserts the selected gaussians of `foreign`, mapped by `pose`, as a new
/// object. The id is the foreign object id (or `name` when given), suffixed
/// with _1, _2, ... on collision.
inline EditResult add(GaussianScene& scene, const GaussianScene& foreign, const Selection& foreign_sel,
                      const RigidTransform& pose, std::optional<std::string> name = std::nullopt) {
  pose.validate();
  const auto idx = resolve_selection(foreign, foreign_sel);
  if (idx.empty()) return edit_detail::noop();
  const std::size_t first = scene.gaussians.size();
  const Mat3 r = pose.rotation.toRotationMatrix();
  scene.gaussians.reserve(first + idx.size());
  for (const auto i : idx) {
    Gaussian g = foreign.gaussians[i];
    g.mean = pose.scale * (r * g.mean) + pose.translation;
    g.rotation = (pose.rotation * g.rotation).normalized();
    g.scale *= pose.scale;
    scene.gaussians.push_back(g);
  }
  std::vector<std::size_t> added(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) added[k] = first + k;
  std::string base = name ? *name : (std::holds_alternative<ObjectRef>(foreign_sel)
                                         ? std::get<ObjectRef>(foreign_sel).id
                                         : std::string("added"));
  std::string id = edit_detail::fresh_object_id(scene, base);
  scene.objects[id] = std::move(added);
  return edit_detail::touched(idx.size(), std::move(id));
}

}  // namespace gatesplat
