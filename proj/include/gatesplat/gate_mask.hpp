// Copyright Contributors to the gatesplat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Analytic gate masks: each pixel ray is intersected with every gate plane
// and tested against the ring solid in gate-local coordinates.

#include "gatesplat/image.hpp"
#include "gatesplat/track.hpp"

namespace gatesplat {

/// Rotation taking vehicle body axes (x forward, y left, z up) to camera axes
/// (x right, y down, z forward).
inline Mat3 camera_from_body() {
  Mat3 r;
  r << 0, -1, 0, 0, 0, -1, 1, 0, 0;
  return r;
}

/// World-to-camera pose of a camera at `position` whose body frame has
/// world orientation `r_wb`.
inline CameraPose camera_pose_from_body(const Vec3& position, const Mat3& r_wb) {
  const Mat3 r = camera_from_body() * r_wb.transpose();
  CameraPose pose;
  pose.rotation = Quat(r).normalized();
  pose.translation = -(r * position);
  return pose;
}

/// Camera looking along heading `yaw` with nose-up `pitch`.
inline CameraPose camera_pose_from_heading(const Vec3& position, double yaw, double pitch = 0.0) {
  const Mat3 r_wb = rot_z(yaw) * Eigen::AngleAxisd(-pitch, Vec3::UnitY()).toRotationMatrix();
  return camera_pose_from_body(position, r_wb);
}

/// World-frame ray through the center of pixel (u, v); direction has unit
/// camera-frame depth.
struct PixelRay {
  Vec3 origin;
  Vec3 direction;
};

inline PixelRay pixel_ray(const CameraPose& pose, const CameraIntrinsics& k, double u, double v) {
  const Mat3 rt = pose.rotation.toRotationMatrix().transpose();
  const Vec3 dc((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
  return {-(rt * pose.translation) / pose.scale, rt * dc / pose.scale};
}

/// Ray parameter of the hit with the gate's ring solid, if any.
inline std::optional<double> ring_hit(const PixelRay& ray, const GatePose& gp, const Gate& gate) {
  const Vec3 n = gp.normal();
  const double denom = n.dot(ray.direction);
  if (denom == 0.0) return std::nullopt;
  const double t = n.dot(gp.center - ray.origin) / denom;
  if (!(t > 0.0)) return std::nullopt;
  const Vec3 rel = ray.origin + t * ray.direction - gp.center;
  const double l = rel.dot(gp.lateral());
  const double h = rel.z();
  const double r = gate.shape == GateShape::circular ? std::hypot(l, h) : std::max(std::abs(l), std::abs(h));
  if (r < gate.inner_half_extent() || r > gate.outer_half_extent()) return std::nullopt;
  return t;
}

/// Per-pixel index+1 of the nearest gate whose ring the pixel ray hits, 0 if none.
inline Image render_gate_labels(const std::vector<Gate>& gates, const std::vector<GatePose>& poses,
                                const CameraPose& pose, const CameraIntrinsics& k) {
  k.validate();
  if (gates.size() != poses.size()) throw ParameterError("render_gate_labels: gate/pose count mismatch");
  if (gates.size() > 254) throw ParameterError("render_gate_labels: at most 254 gates");
  Image labels(k.width, k.height, 1, 0);
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      const PixelRay ray = pixel_ray(pose, k, u, v);
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < gates.size(); ++i) {
        const auto t = ring_hit(ray, poses[i], gates[i]);
        if (t && *t < best) {
          best = *t;
          labels.at(u, v) = static_cast<std::uint8_t>(i + 1);
        }
      }
    }
  }
  return labels;
}

/// White (255) where some gate ring is visible at positive depth.
inline BinaryMask render_gate_mask(const std::vector<Gate>& gates, const std::vector<GatePose>& poses,
                                   const CameraPose& pose, const CameraIntrinsics& k) {
  Image m = render_gate_labels(gates, poses, pose, k);
  for (auto& px : m.data) px = px ? 255 : 0;
  return m;
}

/// Mask of the track's gates at time t.
inline BinaryMask render_gate_mask(const Track& track, double t, const CameraPose& pose, const CameraIntrinsics& k) {
  std::vector<GatePose> poses;
  poses.reserve(track.gates.size());
  for (const auto& g : track.gates) poses.push_back(gate_pose_at(g, t));
  return render_gate_mask(track.gates, poses, pose, k);
}

}  // namespace gatesplat
