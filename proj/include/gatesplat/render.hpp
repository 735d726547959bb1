// Copyright Contributors to the gatesplat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Software splat rasterizer: EWA projection of each gaussian followed by
// front-to-back alpha compositing in a single global depth order.

#include "gatesplat/image.hpp"

#include <Eigen/Eigenvalues>

#include <numeric>
#include <optional>

namespace gatesplat {

constexpr double kZNear = 0.05;
constexpr double kScreenDilation = 0.3;   // px^2 added to the projected covariance
constexpr double kAlphaCap = 0.99;
constexpr double kMinTransmittance = 1e-4;
constexpr double kMinAlpha = 1.0 / 255.0;  // contributions below this are not composited
constexpr double kMaxCov2dCondition = 1e12;

struct ProjectedGaussian {
  Vec2 mean2d;
  Mat2 cov2d;
  double depth = 0.0;
};

/// Pinhole projection of the mean plus J W Sigma W^T J^T + dilation.
/// Returns nullopt when the camera-frame depth is <= kZNear.
inline std::optional<ProjectedGaussian> project_gaussian(const Gaussian& g, const CameraPose& pose,
                                                         const CameraIntrinsics& k) {
  const Vec3 pc = pose.apply(g.mean);
  if (!(pc.z() > kZNear)) return std::nullopt;
  const double iz = 1.0 / pc.z();
  ProjectedGaussian out;
  out.mean2d = Vec2(k.fx * pc.x() * iz + k.cx, k.fy * pc.y() * iz + k.cy);
  out.depth = pc.z();
  Eigen::Matrix<double, 2, 3> j;
  j << k.fx * iz, 0.0, -k.fx * pc.x() * iz * iz, 0.0, k.fy * iz, -k.fy * pc.y() * iz * iz;
  const Mat3 w = pose.rotation.toRotationMatrix() * pose.scale;
  const Mat3 cov_cam = w * g.covariance() * w.transpose();
  out.cov2d = j * cov_cam * j.transpose() + kScreenDilation * Mat2::Identity();
  return out;
}

struct RenderStats {
  std::size_t projected = 0;
  std::size_t culled = 0;
  std::size_t skipped_ill_conditioned = 0;
};

/// Composited RGB image. Pixel color is sum_i c_i a_i prod_{j<i}(1 - a_j) +
/// background * prod(1 - a_j) with a_i = min(0.99, alpha_i exp(-d^T cov^-1 d / 2)),
/// gaussians ordered front to back (ties by input index).
inline Image render_rgb(const GaussianScene& scene, const CameraPose& pose, const CameraIntrinsics& k,
                        const Vec3& background, RenderStats* stats = nullptr) {
  k.validate();
  struct Splat {
    std::size_t index;
    double depth;
    Vec2 mean;
    Mat2 conic;
    Vec3 color;
    double opacity;
    int u0, u1, v0, v1;
  };
  RenderStats st;
  std::vector<Splat> splats;
  splats.reserve(scene.gaussians.size());
  for (std::size_t i = 0; i < scene.gaussians.size(); ++i) {
    const auto& g = scene.gaussians[i];
    const auto p = project_gaussian(g, pose, k);
    if (!p) {
      ++st.culled;
      continue;
    }
    const Eigen::SelfAdjointEigenSolver<Mat2> eig(p->cov2d, Eigen::EigenvaluesOnly);
    const double lmin = eig.eigenvalues()(0), lmax = eig.eigenvalues()(1);
    if (!(lmin > 0.0) || lmax / lmin > kMaxCov2dCondition) {
      ++st.skipped_ill_conditioned;
      continue;
    }
    if (g.opacity < kMinAlpha) continue;
    // Pixels where alpha * exp(-q/2) >= kMinAlpha satisfy q <= 2 ln(alpha / kMinAlpha).
    const double qmax = 2.0 * std::log(std::min(g.opacity, kAlphaCap) / kMinAlpha);
    const double radius = std::sqrt(std::max(qmax, 0.0) * lmax);
    Splat s{i, p->depth, p->mean2d, p->cov2d.inverse(), g.color, g.opacity, 0, 0, 0, 0};
    const auto lo = [](double x, int n) { return static_cast<int>(std::clamp(std::ceil(x), 0.0, double(n))); };
    const auto hi = [](double x, int n) { return static_cast<int>(std::clamp(std::floor(x), -1.0, double(n - 1))); };
    s.u0 = lo(s.mean.x() - radius, k.width);
    s.u1 = hi(s.mean.x() + radius, k.width);
    s.v0 = lo(s.mean.y() - radius, k.height);
    s.v1 = hi(s.mean.y() + radius, k.height);
    ++st.projected;
    if (s.u0 > s.u1 || s.v0 > s.v1) continue;
    splats.push_back(s);
  }
  std::stable_sort(splats.begin(), splats.end(), [](const Splat& a, const Splat& b) { return a.depth < b.depth; });

  const std::size_t npix = static_cast<std::size_t>(k.width) * k.height;
  std::vector<double> transmittance(npix, 1.0);
  std::vector<Vec3> accum(npix, Vec3::Zero());
  for (const auto& s : splats) {
    for (int v = s.v0; v <= s.v1; ++v) {
      for (int u = s.u0; u <= s.u1; ++u) {
        const std::size_t px = static_cast<std::size_t>(v) * k.width + u;
        double& t = transmittance[px];
        if (t < kMinTransmittance) continue;
        const Vec2 d(u - s.mean.x(), v - s.mean.y());
        const double q = d.dot(s.conic * d);
        const double a = std::min(kAlphaCap, s.opacity * std::exp(-0.5 * q));
        if (a < kMinAlpha) continue;
        accum[px] += s.color * (a * t);
        t *= 1.0 - a;
      }
    }
  }

  Image img(k.width, k.height, 3);
  for (std::size_t px = 0; px < npix; ++px) {
    const Vec3 c = accum[px] + background * transmittance[px];
    for (int ch = 0; ch < 3; ++ch)
      img.data[px * 3 + ch] = static_cast<std::uint8_t>(std::lround(std::clamp(c[ch], 0.0, 1.0) * 255.0));
  }
  if (stats) *stats = st;
  return img;
}

}  // namespace gatesplat
