// Copyright Contributors to the gatesplat project
// SPDX-License-Identifier: Apache-2.0

#include "gatesplat/alignment.hpp"
#include "gatesplat/image.hpp"
#include "gatesplat/ply_io.hpp"
#include "support.hpp"

#include <Eigen/Geometry>
#include <gtest/gtest.h>

#include <cmath>

namespace gs = gatesplat;
using gs::Vec3;

namespace {

void append_f32(std::string& out, float v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

/// Minimal float32 training-style PLY with one vertex.
std::string training_ply(const std::array<float, 14>& v, bool with_rest = false) {
  std::string s = "ply\nformat binary_little_endian 1.0\nelement vertex 1\n";
  for (const char* n : {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"})
    s += std::string("property float ") + n + "\n";
  if (with_rest) s += "property float f_rest_0\n";
  for (const char* n : {"opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"})
    s += std::string("property float ") + n + "\n";
  s += "end_header\n";
  // x y z, normals, dc, [rest], opacity, scales, rot
  for (int i = 0; i < 3; ++i) append_f32(s, v[i]);
  for (int i = 0; i < 3; ++i) append_f32(s, 0.0f);
  for (int i = 3; i < 6; ++i) append_f32(s, v[i]);
  if (with_rest) append_f32(s, 9.0f);
  for (int i = 6; i < 14; ++i) append_f32(s, v[i]);
  return s;
}

}  // namespace

TEST(RigidTransform, InverseAndComposition) {
  gs::Rng rng(1);
  for (int k = 0; k < 50; ++k) {
    gs::RigidTransform a{gs::testing::random_rotation(rng), Vec3(rng.normal(), rng.normal(), rng.normal()),
                         rng.uniform(0.5, 2.0)};
    gs::RigidTransform b{gs::testing::random_rotation(rng), Vec3(rng.normal(), rng.normal(), rng.normal()), 1.0};
    const Vec3 p(rng.normal(), rng.normal(), rng.normal());
    EXPECT_LT((a.inverse().apply(a.apply(p)) - p).norm(), 1e-12);
    EXPECT_LT(((a * b).apply(p) - a.apply(b.apply(p))).norm(), 1e-12);
  }
}

TEST(RigidTransform, ValidateRejectsBadFields) {
  gs::RigidTransform t;
  t.scale = 0.0;
  EXPECT_THROW(t.validate(), gs::ValidationError);
  t = {};
  t.rotation = gs::Quat(2, 0, 0, 0);
  EXPECT_THROW(t.validate(), gs::ValidationError);
}

TEST(Gaussian, CovarianceIsRotatedDiagonal) {
  gs::Gaussian g;
  g.rotation = gs::Quat(Eigen::AngleAxisd(gs::kPi / 2, Vec3::UnitZ()));
  g.scale = Vec3(2, 1, 3);
  const gs::Mat3 c = g.covariance();
  EXPECT_NEAR(c(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(c(1, 1), 4.0, 1e-12);
  EXPECT_NEAR(c(2, 2), 9.0, 1e-12);
}

TEST(Gaussian, ValidationNamesIndex) {
  gs::GaussianScene s;
  s.gaussians.resize(3);
  s.gaussians[2].opacity = std::nan("");
  try {
    s.validate();
    FAIL();
  } catch (const gs::ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("gaussian 2"), std::string::npos);
  }
  s.gaussians[2].opacity = 0.5;
  s.gaussians[1].scale = Vec3(1, 0, 1);
  EXPECT_THROW(s.validate(), gs::ValidationError);
}

TEST(Selection, BoxAndObject) {
  gs::GaussianScene s;
  for (int i = 0; i < 5; ++i) {
    gs::Gaussian g;
    g.mean = Vec3(i, 0, 0);
    s.gaussians.push_back(g);
  }
  s.objects["odd"] = {1, 3};
  EXPECT_EQ(gs::resolve_selection(s, gs::ObjectRef{"odd"}), (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(gs::resolve_selection(s, gs::Box3{Vec3(1, -1, -1), Vec3(3, 1, 1)}), (std::vector<std::size_t>{1, 2, 3}));
  EXPECT_THROW(gs::resolve_selection(s, gs::ObjectRef{"none"}), gs::LookupError);
  EXPECT_THROW(gs::resolve_selection(s, gs::Box3{Vec3(1, 0, 0), Vec3(0, 0, 0)}), gs::ParameterError);
}

TEST(Ply, NativeRoundTripIsByteIdentical) {
  gs::Rng rng(2);
  const auto scene = gs::testing::random_scene(rng, 200);
  for (auto fmt : {gs::PlyFormat::binary_little_endian, gs::PlyFormat::ascii}) {
    const auto a = gs::save_scene(scene, fmt);
    const auto loaded = gs::load_scene(std::span<const std::uint8_t>(a));
    const auto b = gs::save_scene(loaded, fmt);
    EXPECT_EQ(a, b);
    EXPECT_EQ(loaded.gaussians, scene.gaussians);
  }
}

TEST(Ply, SceneFileKeepsObjects) {
  gs::Rng rng(3);
  const auto scene = gs::testing::random_scene(rng, 30);
  const auto dir = gs::testing::scratch_dir("ply_objects");
  gs::save_scene_file(dir / "s.ply", scene);
  EXPECT_TRUE(std::filesystem::exists(dir / "s.objects.json"));
  EXPECT_EQ(gs::load_scene_file(dir / "s.ply"), scene);
}

TEST(Ply, TrainingLayoutActivations) {
  const std::array<float, 14> v = {1.0f, 2.0f, 3.0f,            // position
                                   0.5f, -1.0f, 0.0f,           // dc
                                   0.0f,                        // opacity logit
                                   std::log(0.1f), 0.0f, 1.0f,  // log scales
                                   2.0f, 0.0f, 0.0f, 0.0f};     // unnormalized rotation
  for (const bool rest : {false, true}) {
    const auto s = gs::load_scene(training_ply(v, rest));
    ASSERT_EQ(s.size(), 1u);
    const auto& g = s.gaussians[0];
    // Oracle: Y_0^0 = 1/(2 sqrt(pi)), color = 0.5 + Y_0^0 * dc clamped to [0,1].
    const double y00 = 1.0 / (2.0 * std::sqrt(std::acos(-1.0)));
    EXPECT_NEAR(g.color.x(), 0.5 + y00 * 0.5, 1e-7);
    EXPECT_NEAR(g.color.y(), 0.5 - y00, 1e-7);
    EXPECT_NEAR(g.color.z(), 0.5, 1e-7);
    EXPECT_NEAR(g.opacity, 0.5, 1e-7);
    EXPECT_NEAR(g.scale.x(), 0.1, 1e-6);
    EXPECT_NEAR(g.scale.y(), 1.0, 1e-7);
    EXPECT_NEAR(g.scale.z(), std::exp(1.0), 1e-6);
    EXPECT_NEAR(g.rotation.w(), 1.0, 1e-12);
    EXPECT_EQ(g.mean, Vec3(1, 2, 3));
  }
}

TEST(Ply, MalformedHeadersNameTheProblem) {
  const auto msg = [](const std::string& text) -> std::string {
    try {
      gs::load_scene(text);
    } catch (const gs::ParseError& e) {
      return e.what();
    }
    return "";
  };
  EXPECT_NE(msg("plx\n").find("magic"), std::string::npos);
  EXPECT_NE(msg("ply\nformat binary_big_endian 1.0\nend_header\n").find("binary_big_endian"), std::string::npos);
  EXPECT_NE(msg("ply\nformat ascii 1.0\nelement vertex 1\nproperty quad x\nend_header\n").find("vertex"),
            std::string::npos);
  EXPECT_NE(msg("ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nend_header\n1\n").find("y"),
            std::string::npos);
  EXPECT_NE(msg("ply\nformat ascii 1.0\nelement face 0\nend_header\n").find("vertex"), std::string::npos);
}

TEST(Ply, NonFiniteFieldIsValidationError) {
  const std::array<float, 14> v = {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, std::nanf("")};
  EXPECT_THROW(gs::load_scene(training_ply(v)), gs::ValidationError);
}

TEST(Pnm, RoundTripsAreByteIdentical) {
  gs::Rng rng(4);
  gs::Image rgb(17, 9, 3);
  for (auto& b : rgb.data) b = static_cast<std::uint8_t>(rng.uniform_index(256));
  const auto a = gs::encode_ppm(rgb);
  EXPECT_EQ(gs::decode_ppm(a), rgb);
  EXPECT_EQ(gs::encode_ppm(gs::decode_ppm(a)), a);

  auto m = gs::make_mask(13, 7);
  for (auto& b : m.data) b = rng.bernoulli(0.5) ? 255 : 0;
  const auto p = gs::encode_pgm(m);
  EXPECT_EQ(gs::encode_pgm(gs::decode_pgm(p)), p);
  EXPECT_THROW(gs::decode_pgm(a), gs::ParseError);
  EXPECT_THROW(gs::encode_pgm(rgb), gs::ParameterError);
}

TEST(Alignment, MatchesEigenUmeyamaOnNoisyData) {
  gs::Rng rng(5);
  for (int c = 0; c < 20; ++c) {
    const gs::Quat q = gs::testing::random_rotation(rng);
    const Vec3 t(rng.normal(), rng.normal(), rng.normal());
    const double s = rng.uniform(0.5, 2.0);
    const int n = 30;
    Eigen::Matrix3Xd src(3, n), dst(3, n);
    std::vector<gs::Correspondence> pairs;
    for (int i = 0; i < n; ++i) {
      const Vec3 p(rng.normal(), rng.normal(), rng.normal());
      const Vec3 w = s * (q * p) + t + 0.01 * Vec3(rng.normal(), rng.normal(), rng.normal());
      src.col(i) = p;
      dst.col(i) = w;
      pairs.push_back({p, w});
    }
    const Eigen::Matrix4d oracle = Eigen::umeyama(src, dst, true);
    const auto est = gs::estimate_alignment(pairs, true);
    const gs::Mat3 sr = est.scale * est.rotation.toRotationMatrix();
    EXPECT_LT((sr - oracle.block<3, 3>(0, 0)).norm(), 1e-9);
    EXPECT_LT((est.translation - oracle.block<3, 1>(0, 3)).norm(), 1e-9);
  }
}

TEST(Alignment, ExactRecoveryAndReflectionGuard) {
  gs::Rng rng(6);
  const gs::Quat q = gs::testing::random_rotation(rng);
  const Vec3 t(1, -2, 3);
  std::vector<gs::Correspondence> pairs;
  for (int i = 0; i < 6; ++i) {
    const Vec3 p(rng.normal(), rng.normal(), rng.normal());
    pairs.push_back({p, q * p + t});
  }
  const auto est = gs::estimate_alignment(pairs);
  EXPECT_LT(est.rotation.angularDistance(q), 1e-9);
  EXPECT_LT((est.translation - t).norm(), 1e-9);
  EXPECT_GT(est.rotation.toRotationMatrix().determinant(), 0.0);

  // Mirror-image target: best proper rotation, never a reflection.
  for (auto& p : pairs) p.world = Vec3(-p.source.x(), p.source.y(), p.source.z());
  EXPECT_GT(gs::estimate_alignment(pairs).rotation.toRotationMatrix().determinant(), 0.0);
}

TEST(Alignment, DegenerateInputs) {
  std::vector<gs::Correspondence> two = {{Vec3::Zero(), Vec3::Zero()}, {Vec3::UnitX(), Vec3::UnitX()}};
  EXPECT_THROW(gs::estimate_alignment(two), gs::RankDeficiencyError);
  std::vector<gs::Correspondence> line;
  for (int i = 0; i < 5; ++i) line.push_back({Vec3(i, 0, 0), Vec3(i, 1, 0)});
  EXPECT_THROW(gs::estimate_alignment(line), gs::RankDeficiencyError);
}

TEST(Alignment, AlignToWorldMovesEveryGaussian) {
  gs::Rng rng(7);
  const auto scene = gs::testing::random_scene(rng, 20);
  std::vector<gs::Correspondence> pairs;
  for (int i = 0; i < 4; ++i) {
    const Vec3 p(rng.normal(), rng.normal(), rng.normal());
    pairs.push_back({p, p + Vec3(0, 0, 5)});
  }
  const auto [aligned, t] = gs::align_to_world(scene, pairs);
  for (std::size_t i = 0; i < scene.size(); ++i)
    EXPECT_LT((aligned.gaussians[i].mean - scene.gaussians[i].mean - Vec3(0, 0, 5)).norm(), 1e-9);
  EXPECT_EQ(aligned.objects, scene.objects);
}
