// Copyright Contributors to the gatesplat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Two-gate layouts g = (x1, y1, z1, yaw1, x2, y2, z2, yaw2), the grid
// partition of layout space and the observability filter.

#include "gatesplat/gate_mask.hpp"

#include <optional>

namespace gatesplat {

constexpr std::size_t kLayoutDims = 8;
using LayoutVector = std::array<double, kLayoutDims>;

struct TwoGateLayout {
  LayoutVector g{};

  GatePose gate(std::size_t i) const {
    const std::size_t o = 4 * i;
    return {Vec3(g[o], g[o + 1], g[o + 2]), g[o + 3]};
  }

  static TwoGateLayout from_poses(const GatePose& a, const GatePose& b) {
    return {{a.center.x(), a.center.y(), a.center.z(), a.yaw, b.center.x(), b.center.y(), b.center.z(), b.yaw}};
  }

  friend bool operator==(const TwoGateLayout&, const TwoGateLayout&) = default;
};

/// Axis-aligned box in layout space.
struct LayoutBox {
  LayoutVector lo{};
  LayoutVector hi{};
};

/// Uniform sample inside the box; a zero-width dimension yields its bound.
inline TwoGateLayout sample_layout(const LayoutBox& box, Rng& rng) {
  TwoGateLayout l;
  for (std::size_t d = 0; d < kLayoutDims; ++d) {
    if (!(box.lo[d] <= box.hi[d])) throw ParameterError("sample_layout: cell lower bound exceeds upper bound");
    l.g[d] = box.lo[d] == box.hi[d] ? box.lo[d] : rng.uniform(box.lo[d], box.hi[d]);
  }
  return l;
}

/// Regular grid over a layout box. Cells are numbered row-major with the
/// first dimension most significant; intervals are half-open except the last
/// bin of each dimension, which is closed.
class GridPartition {
 public:
  GridPartition() = default;
  GridPartition(const LayoutBox& bounds, const std::array<std::size_t, kLayoutDims>& bins)
      : bounds_(bounds), bins_(bins) {
    cells_ = 1;
    for (std::size_t d = 0; d < kLayoutDims; ++d) {
      if (bins[d] == 0) throw ConfigError("grid partition: bin count must be >= 1");
      if (!(bounds.lo[d] <= bounds.hi[d])) throw ConfigError("grid partition: lower bound exceeds upper bound");
      cells_ *= bins[d];
    }
  }

  std::size_t cell_count() const { return cells_; }
  const LayoutBox& bounds() const { return bounds_; }
  const std::array<std::size_t, kLayoutDims>& bins() const { return bins_; }

  std::size_t index(const std::array<std::size_t, kLayoutDims>& multi) const {
    std::size_t i = 0;
    for (std::size_t d = 0; d < kLayoutDims; ++d) {
      if (multi[d] >= bins_[d]) throw ParameterError("grid partition: multi-index out of range");
      i = i * bins_[d] + multi[d];
    }
    return i;
  }

  std::array<std::size_t, kLayoutDims> multi_index(std::size_t cell) const {
    if (cell >= cells_) throw ParameterError("grid partition: cell index out of range");
    std::array<std::size_t, kLayoutDims> m{};
    for (std::size_t d = kLayoutDims; d-- > 0;) {
      m[d] = cell % bins_[d];
      cell /= bins_[d];
    }
    return m;
  }

  LayoutBox cell_bounds(std::size_t cell) const {
    const auto m = multi_index(cell);
    LayoutBox b;
    for (std::size_t d = 0; d < kLayoutDims; ++d) {
      const double w = (bounds_.hi[d] - bounds_.lo[d]) / static_cast<double>(bins_[d]);
      b.lo[d] = bounds_.lo[d] + w * static_cast<double>(m[d]);
      b.hi[d] = m[d] + 1 == bins_[d] ? bounds_.hi[d] : bounds_.lo[d] + w * static_cast<double>(m[d] + 1);
    }
    return b;
  }

  /// Cell containing the layout, or nullopt outside the bounds.
  std::optional<std::size_t> cell_of(const TwoGateLayout& l) const {
    std::array<std::size_t, kLayoutDims> m{};
    for (std::size_t d = 0; d < kLayoutDims; ++d) {
      const double x = l.g[d];
      if (!(x >= bounds_.lo[d] && x <= bounds_.hi[d])) return std::nullopt;
      m[d] = bin(d, x);
    }
    return index(m);
  }

  /// Cell of the layout after clamping each coordinate into the bounds.
  std::size_t nearest_cell(const TwoGateLayout& l) const {
    std::array<std::size_t, kLayoutDims> m{};
    for (std::size_t d = 0; d < kLayoutDims; ++d) m[d] = bin(d, std::clamp(l.g[d], bounds_.lo[d], bounds_.hi[d]));
    return index(m);
  }

 private:
  std::size_t bin(std::size_t d, double x) const {
    const double span = bounds_.hi[d] - bounds_.lo[d];
    if (span <= 0.0) return 0;
    const double f = (x - bounds_.lo[d]) / span * static_cast<double>(bins_[d]);
    auto k = static_cast<std::size_t>(std::max(0.0, std::floor(f)));
    if (k >= bins_[d]) k = bins_[d] - 1;
    // Guard against rounding placing x just below a computed cell edge.
    while (k + 1 < bins_[d] && x >= bounds_.lo[d] + span / static_cast<double>(bins_[d]) * static_cast<double>(k + 1))
      ++k;
    while (k > 0 && x < bounds_.lo[d] + span / static_cast<double>(bins_[d]) * static_cast<double>(k)) --k;
    return k;
  }

  LayoutBox bounds_;
  std::array<std::size_t, kLayoutDims> bins_{};
  std::size_t cells_ = 0;
};

/// Layout sampling bounds per platform.
inline LayoutBox layout_bounds(Platform p) {
  if (p == Platform::uav) return {{-4, -3, 1.5, -0.5, 5, -6, 1.0, -0.8}, {0, 3, 2.5, 0.5, 12, 6, 3.0, 0.8}};
  return {{-1.2, -0.8, 0.8, -0.3, 0.6, -1.5, 0.6, -0.6}, {-0.4, 0.8, 1.6, 0.3, 2.4, 1.5, 2.0, 0.6}};
}

/// Desk-scale partition: two bins per dimension (256 cells).
inline GridPartition desk_partition(Platform p) {
  std::array<std::size_t, kLayoutDims> bins{};
  bins.fill(2);
  return {layout_bounds(p), bins};
}

/// Full-size partitions: (4x4x3x3)^2 for the fixed-wing and (3x3x2x2)^2 for
/// the quadrotor.
inline GridPartition full_partition(Platform p) {
  if (p == Platform::uav) return {layout_bounds(p), {4, 4, 3, 3, 4, 4, 3, 3}};
  return {layout_bounds(p), {3, 3, 2, 2, 3, 3, 2, 2}};
}

/// Distance from the start pose to gate 1 along its normal.
inline double approach_distance(Platform p) { return p == Platform::uav ? 8.0 : 1.2; }

/// Two-gate track with platform gate geometry. The vehicle starts on gate 1's
/// axis, `approach_distance` before it, heading along the normal.
inline Track layout_to_track(const TwoGateLayout& l, Platform p) {
  const auto geo = platform_geometry(p);
  Track t;
  t.name = "layout";
  t.platform = p;
  t.arena = geo.arena;
  for (std::size_t i = 0; i < 2; ++i) t.gates.push_back({geo.shape, geo.inner, geo.ring_width, l.gate(i), {}});
  const GatePose g1 = l.gate(0);
  t.init.position = g1.center - approach_distance(p) * g1.normal();
  t.init.yaw = g1.yaw;
  return t;
}

/// Layout of the first two gates of a track at t = 0.
inline TwoGateLayout layout_of(const Track& t) {
  if (t.gates.empty()) throw ParameterError("layout_of: track has no gates");
  const GatePose a = gate_pose_at(t.gates[0], 0.0);
  const GatePose b = t.gates.size() > 1 ? gate_pose_at(t.gates[1], 0.0) : a;
  return TwoGateLayout::from_poses(a, b);
}

/// Level forward-looking camera; `pitch` tilts it nose-up.
struct CameraMount {
  double pitch = 0.0;
};

/// Whether `target` projects inside [0, width] x [0, height] at positive depth
/// from a camera at `position` looking along `yaw`.
inline bool point_in_view(const Vec3& position, double yaw, const Vec3& target, const CameraIntrinsics& k,
                          const CameraMount& mount = {}) {
  constexpr double kTol = 1e-9;
  const CameraPose pose = camera_pose_from_heading(position, yaw, mount.pitch);
  const Vec3 pc = pose.apply(target);
  if (!(pc.z() > 0.0)) return false;
  const double u = k.fx * pc.x() / pc.z() + k.cx;
  const double v = k.fy * pc.y() / pc.z() + k.cy;
  return u >= -kTol && u <= k.width + kTol && v >= -kTol && v <= k.height + kTol;
}

/// Gate 2's center is visible from gate 1's center looking along gate 1's
/// normal. With `check_start`, gate 1's center must also be visible from the
/// layout's start pose.
inline bool observability_check(const TwoGateLayout& l, const CameraIntrinsics& k, const CameraMount& mount = {},
                                std::optional<Platform> check_start = std::nullopt) {
  const GatePose g1 = l.gate(0), g2 = l.gate(1);
  if (!point_in_view(g1.center, g1.yaw, g2.center, k, mount)) return false;
  if (check_start) {
    const Track t = layout_to_track(l, *check_start);
    if (!point_in_view(t.init.position, t.init.yaw, g1.center, k, mount)) return false;
  }
  return true;
}

}  // namespace gatesplat
