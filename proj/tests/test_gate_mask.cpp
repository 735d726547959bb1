// Copyright Contributors to the gatesplat project
// SPDX-License-Identifier: Apache-2.0

#include "gatesplat/gate_mask.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

namespace gs = gatesplat;
using gs::Vec2;
using gs::Vec3;

namespace {

// Outline of the gate at half extent `r` projected to pixels.
std::vector<Vec2> projected_outline(const gs::Gate& g, double r, const gs::CameraPose& cam, const gs::CameraIntrinsics& k) {
  std::vector<Vec3> local;
  if (g.shape == gs::GateShape::square) {
    local = {{0, -r, -r}, {0, r, -r}, {0, r, r}, {0, -r, r}};
  } else {
    for (int i = 0; i < 720; ++i) {
      const double a = 2 * gs::kPi * i / 720;
      local.push_back({0, r * std::cos(a), r * std::sin(a)});
    }
  }
  std::vector<Vec2> out;
  const auto t = g.pose.transform();
  for (const auto& p : local) {
    const Vec3 c = cam.apply(t.apply(p));
    out.emplace_back(k.fx * c.x() / c.z() + k.cx, k.fy * c.y() / c.z() + k.cy);
  }
  return out;
}

bool inside(const std::vector<Vec2>& poly, const Vec2& p) {
  bool in = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[j];
    if ((a.y() > p.y()) != (b.y() > p.y()) && p.x() < (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x())
      in = !in;
  }
  return in;
}

double edge_distance(const std::vector<Vec2>& poly, const Vec2& p) {
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Vec2 ab = poly[i] - poly[j];
    const double s = std::clamp((p - poly[j]).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
    d = std::min(d, (poly[j] + s * ab - p).norm());
  }
  return d;
}

}  // namespace

TEST(GateMask, CameraFrameConvention) {
  const auto cam = gs::camera_pose_from_heading(Vec3(1, 2, 3), 0.0);
  // Body forward maps to camera +z, body left to camera -x, world up to camera -y.
  EXPECT_LT((cam.apply(Vec3(2, 2, 3)) - Vec3(0, 0, 1)).norm(), 1e-12);
  EXPECT_LT((cam.apply(Vec3(1, 3, 3)) - Vec3(-1, 0, 0)).norm(), 1e-12);
  EXPECT_LT((cam.apply(Vec3(1, 2, 4)) - Vec3(0, -1, 0)).norm(), 1e-12);
}

TEST(GateMask, AgreesWithProjectedOutline) {
  gs::Rng rng(31);
  const gs::CameraIntrinsics k;
  for (int c = 0; c < 20; ++c) {
    const bool circ = c % 2 == 1;
    const gs::GatePose gp{Vec3(rng.uniform(3, 8), rng.uniform(-1, 1), rng.uniform(-0.5, 0.5)), rng.uniform(-0.6, 0.6)};
    const gs::Gate g = circ ? gs::circular_gate(gp, 1.5, 0.2) : gs::square_gate(gp);
    const auto cam = gs::camera_pose_from_heading(Vec3::Zero(), rng.uniform(-0.2, 0.2), rng.uniform(-0.1, 0.1));
    const auto mask = gs::render_gate_mask({g}, {gp}, cam, k);
    const auto outer = projected_outline(g, g.outer_half_extent(), cam, k);
    const auto inner = projected_outline(g, g.inner_half_extent(), cam, k);
    std::size_t disagree = 0;
    for (int v = 0; v < k.height; ++v)
      for (int u = 0; u < k.width; ++u) {
        const Vec2 p(u, v);
        const bool expect = inside(outer, p) && !inside(inner, p);
        if (expect != (mask.at(u, v) == 255)) {
          ++disagree;
          EXPECT_LE(std::min(edge_distance(outer, p), edge_distance(inner, p)), 1.0);
        }
      }
    EXPECT_LE(disagree, static_cast<std::size_t>(0.01 * k.width * k.height));
  }
}

TEST(GateMask, NearerGateWinsLabel) {
  const gs::CameraIntrinsics k;
  const auto cam = gs::camera_pose_from_heading(Vec3::Zero(), 0.0);
  const gs::Gate near = gs::square_gate({Vec3(4, 0, 0), 0.0});
  const gs::Gate far = gs::square_gate({Vec3(8, 0, 0), 0.0}, 3.6, 0.4);
  const auto labels = gs::render_gate_labels({far, near}, {far.pose, near.pose}, cam, k);
  // The near ring at half extent 1.1 m projects to 80 + 100 * 1.1 / 4 = 107.5.
  EXPECT_EQ(labels.at(107, 60), 2);
  // Far ring at 1.9 m projects to 80 + 100 * 1.9 / 8 = 103.75, inside the near opening.
  EXPECT_EQ(labels.at(104, 60), 1);
  EXPECT_EQ(labels.at(80, 60), 0);
}

TEST(GateMask, GateBehindCameraIsInvisible) {
  const gs::CameraIntrinsics k;
  const auto cam = gs::camera_pose_from_heading(Vec3::Zero(), 0.0);
  const gs::Gate g = gs::square_gate({Vec3(-4, 0, 0), 0.0});
  const auto mask = gs::render_gate_mask({g}, {g.pose}, cam, k);
  EXPECT_TRUE(std::all_of(mask.data.begin(), mask.data.end(), [](auto px) { return px == 0; }));
}

TEST(GateMask, ValidatesArguments) {
  const gs::Gate g = gs::square_gate({});
  EXPECT_THROW(gs::render_gate_mask({g}, {}, gs::CameraPose{}, gs::CameraIntrinsics{}), gs::ParameterError);
}
