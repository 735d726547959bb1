// Copyright Contributors to the gatesplat project
// SPDX-License-Identifier: Apache-2.0

#include "gatesplat/track.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

namespace gs = gatesplat;
using gs::Vec3;

namespace {

const char* kTracks[] = {"uav_spatial_s", "uav_random", "uav_moving", "quad_left_turn", "quad_random", "quad_moving"};

gs::Gate moving_gate() {
  gs::Gate g = gs::square_gate({});
  g.schedule = {{0.0, {Vec3(0, 0, 1), 3.0}}, {2.0, {Vec3(2, 4, 1), -3.0}}, {4.0, {Vec3(2, 4, 3), -3.0}}};
  g.pose = g.schedule[0].pose;
  return g;
}

}  // namespace

TEST(Tracks, ShippedTracksLoadAndRoundTrip) {
  for (const char* name : kTracks) {
    const auto t = gs::load_track_file(gs::testing::data_path(std::string("tracks/") + name + ".json"));
    EXPECT_EQ(t.name, name);
    EXPECT_EQ(t.platform, std::string(name).starts_with("uav") ? gs::Platform::uav : gs::Platform::quad);
    EXPECT_GE(t.gates.size(), 2u);
    EXPECT_EQ(gs::track_from_json(gs::track_to_json(t)), t);
  }
}

TEST(Tracks, PlatformDefaultsApply) {
  const auto t = gs::track_from_json(nlohmann::json::parse(
      R"({"name": "q", "platform": "quad", "gates": [{"pose": {"center": [1, 0, 1]}}]})"));
  EXPECT_EQ(t.gates[0].shape, gs::GateShape::circular);
  EXPECT_DOUBLE_EQ(t.gates[0].inner, 0.78);
  EXPECT_DOUBLE_EQ(t.gates[0].ring_width, 0.1);
  EXPECT_EQ(t.arena, gs::platform_geometry(gs::Platform::quad).arena);
}

TEST(Tracks, BadJsonIsConfigError) {
  const char* bad[] = {
      R"({"gates": []})",
      R"({"gates": [{"pose": {}}]})",
      R"({"gates": [{"shape": "hex", "pose": {"center": [0, 0, 1]}}]})",
      R"({"gates": [{"pose": {"center": [0, 0]}}]})",
      R"({"gates": [{"pose": {"center": [99, 0, 1]}}]})",
      R"({"platform": "boat", "gates": [{"pose": {"center": [0, 0, 1]}}]})",
      R"({"gates": [{"pose": {"center": [0, 0, 1]}, "schedule": [{"t": 1, "center": [0,0,1]}, {"t": 1, "center": [0,0,1]}]}]})",
  };
  for (const char* s : bad) EXPECT_THROW(gs::track_from_json(nlohmann::json::parse(s)), gs::ConfigError) << s;
  EXPECT_THROW(gs::load_track_file("/nonexistent/track.json"), gs::ConfigError);
}

TEST(Tracks, ScheduleInterpolation) {
  const auto g = moving_gate();
  EXPECT_EQ(gs::gate_pose_at(g, -1.0), g.schedule[0].pose);
  EXPECT_EQ(gs::gate_pose_at(g, 9.0), g.schedule[2].pose);
  const auto mid = gs::gate_pose_at(g, 1.0);
  EXPECT_LT((mid.center - Vec3(1, 2, 1)).norm(), 1e-12);
  // Yaw 3 to -3 goes the short way through pi.
  EXPECT_NEAR(std::abs(mid.yaw), gs::kPi, 1e-12);
  EXPECT_LT((gs::gate_velocity_at(g, 1.0) - Vec3(1, 2, 0)).norm(), 1e-12);
  EXPECT_LT((gs::gate_velocity_at(g, 3.0) - Vec3(0, 0, 1)).norm(), 1e-12);
  EXPECT_EQ(gs::gate_velocity_at(g, 5.0), Vec3::Zero());
  EXPECT_EQ(gs::gate_velocity_at(gs::square_gate({}), 1.0), Vec3::Zero());
}

TEST(Tracks, PerturbationStaysInCube) {
  gs::Rng rng(41);
  auto base = gs::load_track_file(gs::testing::data_path("tracks/uav_moving.json"));
  for (int rep = 0; rep < 200; ++rep) {
    const auto t = gs::perturb_track(base, 30.0, rng);
    for (std::size_t i = 0; i < t.gates.size(); ++i) {
      const Vec3 d = t.gates[i].pose.center - base.gates[i].pose.center;
      EXPECT_LE(d.cwiseAbs().maxCoeff(), 0.3);
      EXPECT_EQ(t.gates[i].pose.yaw, base.gates[i].pose.yaw);
      for (std::size_t w = 0; w < t.gates[i].schedule.size(); ++w) {
        EXPECT_LT((t.gates[i].schedule[w].pose.center - base.gates[i].schedule[w].pose.center - d).norm(), 1e-12);
        EXPECT_EQ(t.gates[i].schedule[w].t, base.gates[i].schedule[w].t);
      }
    }
  }
  EXPECT_EQ(gs::perturb_track(base, 0.0, rng), base);
  EXPECT_THROW(gs::perturb_track(base, -1.0, rng), gs::ParameterError);
}

TEST(Tracks, PerturbationIsUniform) {
  gs::Rng rng(42);
  const gs::Track base{"t", gs::Platform::uav, {}, {gs::square_gate({})}, {}};
  const int n = 20000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = gs::perturb_track(base, 50.0, rng).gates[0].pose.center.x();
    sum += x;
    sq += x * x;
  }
  // Uniform on [-0.5, 0.5]: mean 0, variance 1/12.
  const double var = 1.0 / 12.0;
  EXPECT_NEAR(sum / n, 0.0, 4.0 * std::sqrt(var / n));
  EXPECT_NEAR(sq / n, var, 0.005);
}

TEST(Tracks, GateSplatsSitOnTheRing) {
  for (const auto& g : {gs::square_gate({}), gs::circular_gate({})}) {
    const auto s = gs::make_gate_splats(g);
    ASSERT_FALSE(s.gaussians.empty());
    EXPECT_EQ(s.objects.at("gate").size(), s.size());
    const double mid = g.inner_half_extent() + 0.5 * g.ring_width;
    for (const auto& sp : s.gaussians) {
      const double r = g.shape == gs::GateShape::circular
                           ? std::hypot(sp.mean.y(), sp.mean.z())
                           : std::max(std::abs(sp.mean.y()), std::abs(sp.mean.z()));
      EXPECT_NEAR(r, mid, 1e-12);
      EXPECT_EQ(sp.mean.x(), 0.0);
    }
  }
}
