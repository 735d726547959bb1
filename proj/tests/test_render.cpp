// Copyright Contributors to the gatesplat project
// SPDX-License-Identifier: Apache-2.0

#include "gatesplat/gate_mask.hpp"
#include "gatesplat/alignment.hpp"
#include "gatesplat/render.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

namespace gs = gatesplat;
using gs::Vec3;

namespace {

gs::Gaussian splat_at(const Vec3& p, double sigma, const Vec3& color, double opacity) {
  gs::Gaussian g;
  g.mean = p;
  g.scale = Vec3::Constant(sigma);
  g.color = color;
  g.opacity = opacity;
  return g;
}

std::uint8_t to_byte(double c) { return static_cast<std::uint8_t>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0)); }

}  // namespace

TEST(Projection, CovarianceMatchesFiniteDifferenceJacobian) {
  gs::Rng rng(21);
  const gs::CameraIntrinsics k;
  for (int c = 0; c < 30; ++c) {
    const gs::CameraPose pose{gs::testing::random_rotation(rng), Vec3(rng.normal(), rng.normal(), rng.normal()), 1.0};
    // Place the mean in front of the camera.
    const Vec3 cam(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(2, 6));
    gs::Gaussian g = gs::testing::random_gaussian(rng);
    g.mean = pose.inverse().apply(cam);
    const auto p = gs::project_gaussian(g, pose, k);
    ASSERT_TRUE(p);

    const auto proj = [&](const Vec3& x) { return gs::Vec2(k.fx * x.x() / x.z() + k.cx, k.fy * x.y() / x.z() + k.cy); };
    Eigen::Matrix<double, 2, 3> j;
    const double h = 1e-6;
    for (int a = 0; a < 3; ++a) {
      Vec3 e = Vec3::Zero();
      e[a] = h;
      j.col(a) = (proj(cam + e) - proj(cam - e)) / (2 * h);
    }
    const gs::Mat3 w = pose.rotation.toRotationMatrix();
    const gs::Mat2 oracle = j * w * g.covariance() * w.transpose() * j.transpose() + gs::kScreenDilation * gs::Mat2::Identity();
    EXPECT_LT((p->cov2d - oracle).cwiseAbs().maxCoeff(), 1e-5 * std::max(1.0, oracle.cwiseAbs().maxCoeff()));
    EXPECT_LT((p->mean2d - proj(cam)).norm(), 1e-9);
    EXPECT_NEAR(p->depth, cam.z(), 1e-12);
  }
}

TEST(Projection, BehindCameraIsCulled) {
  gs::GaussianScene s;
  s.gaussians.push_back(splat_at(Vec3(0, 0, -1), 0.1, Vec3::Ones(), 1.0));
  s.gaussians.push_back(splat_at(Vec3(0, 0, 0.01), 0.1, Vec3::Ones(), 1.0));
  gs::RenderStats st;
  const Vec3 bg(0.2, 0.4, 0.6);
  const auto img = gs::render_rgb(s, gs::CameraPose{}, gs::CameraIntrinsics{}, bg, &st);
  EXPECT_EQ(st.culled, 2u);
  for (std::size_t px = 0; px < img.pixel_count(); ++px)
    for (int ch = 0; ch < 3; ++ch) ASSERT_EQ(img.data[px * 3 + ch], to_byte(bg[ch]));
}

TEST(Render, SingleSplatMatchesClosedForm) {
  const gs::CameraIntrinsics k;
  const double sigma = 0.05, z = 2.0, opacity = 0.8;
  const Vec3 color(1.0, 0.5, 0.0), bg(0.0, 0.0, 1.0);
  gs::GaussianScene s;
  s.gaussians.push_back(splat_at(Vec3(0, 0, z), sigma, color, opacity));
  const auto img = gs::render_rgb(s, gs::CameraPose{}, k, bg);
  // On-axis isotropic splat: screen variance (f sigma / z)^2 + dilation.
  const double var = std::pow(k.fx * sigma / z, 2) + gs::kScreenDilation;
  for (const auto& [du, dv] : {std::pair{0, 0}, std::pair{1, 0}, std::pair{2, 1}, std::pair{0, -3}}) {
    const double a = std::min(gs::kAlphaCap, opacity * std::exp(-0.5 * (du * du + dv * dv) / var));
    for (int ch = 0; ch < 3; ++ch) {
      const double expect = a >= gs::kMinAlpha ? color[ch] * a + bg[ch] * (1 - a) : bg[ch];
      EXPECT_EQ(img.at(80 + du, 60 + dv, ch), to_byte(expect)) << du << "," << dv << " ch " << ch;
    }
  }
}

TEST(Render, NearerSplatOccludesRegardlessOfOrder) {
  const Vec3 bg = Vec3::Zero();
  gs::GaussianScene a, b;
  const auto near = splat_at(Vec3(0, 0, 2), 0.2, Vec3(1, 0, 0), 0.99);
  const auto far = splat_at(Vec3(0, 0, 4), 0.4, Vec3(0, 1, 0), 0.99);
  a.gaussians = {near, far};
  b.gaussians = {far, near};
  const auto ia = gs::render_rgb(a, gs::CameraPose{}, gs::CameraIntrinsics{}, bg);
  const auto ib = gs::render_rgb(b, gs::CameraPose{}, gs::CameraIntrinsics{}, bg);
  EXPECT_EQ(ia, ib);
  EXPECT_GT(ia.at(80, 60, 0), 200);
  EXPECT_LT(ia.at(80, 60, 1), 10);
}

TEST(Render, GateSplatsAppearWhereTheMaskIs) {
  const gs::Gate gate = gs::square_gate(gs::GatePose{Vec3(5, 0, 0), 0.0});
  gs::GaussianScene s = gs::transform_scene(gs::make_gate_splats(gate), gate.pose.transform());
  const auto cam = gs::camera_pose_from_heading(Vec3::Zero(), 0.0);
  const gs::CameraIntrinsics k;
  const auto img = gs::render_rgb(s, cam, k, Vec3::Zero());
  const auto mask = gs::render_gate_mask({gate}, {gate.pose}, cam, k);
  std::size_t lit_on_mask = 0, mask_px = 0;
  for (int v = 0; v < k.height; ++v)
    for (int u = 0; u < k.width; ++u)
      if (mask.at(u, v)) {
        ++mask_px;
        if (img.at(u, v, 0) > 50) ++lit_on_mask;
      }
  ASSERT_GT(mask_px, 0u);
  EXPECT_GT(static_cast<double>(lit_on_mask) / static_cast<double>(mask_px), 0.9);
  EXPECT_EQ(img.at(80, 60, 0), 0);  // gate opening is empty
}

TEST(Render, DeterministicAndValidatesIntrinsics) {
  gs::Rng rng(22);
  const auto s = gs::testing::random_scene(rng, 300, 3.0);
  const gs::CameraPose pose{gs::Quat::Identity(), Vec3(0, 0, 8), 1.0};
  EXPECT_EQ(gs::render_rgb(s, pose, {}, Vec3::Zero()), gs::render_rgb(s, pose, {}, Vec3::Zero()));
  gs::CameraIntrinsics bad;
  bad.fx = 0;
  EXPECT_THROW(gs::render_rgb(s, pose, bad, Vec3::Zero()), gs::ValidationError);
}
