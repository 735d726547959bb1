// Copyright Contributors to the gatesplat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gatesplat/scene.hpp"

#include <Eigen/SVD>

#include <utility>

namespace gatesplat {

struct Correspondence {
  Vec3 source;
  Vec3 world;
};

/// Least-squares transform T minimizing sum |T(source_i) - world_i|^2
/// (Kabsch with the Umeyama reflection guard and optional scale).
inline RigidTransform estimate_alignment(const std::vector<Correspondence>& pairs, bool estimate_scale = false) {
  const auto n = pairs.size();
  if (n < 3) throw RankDeficiencyError("alignment needs at least 3 correspondences");
  Vec3 mu_s = Vec3::Zero(), mu_w = Vec3::Zero();
  for (const auto& c : pairs) {
    if (!c.source.allFinite() || !c.world.allFinite()) throw ValidationError("non-finite correspondence");
    mu_s += c.source;
    mu_w += c.world;
  }
  mu_s /= static_cast<double>(n);
  mu_w /= static_cast<double>(n);

  Mat3 cov = Mat3::Zero();
  double var_s = 0.0;
  for (const auto& c : pairs) {
    const Vec3 ds = c.source - mu_s;
    cov += (c.world - mu_w) * ds.transpose();
    var_s += ds.squaredNorm();
  }
  cov /= static_cast<double>(n);
  var_s /= static_cast<double>(n);

  // Collinear or coincident source points leave the rotation about their
  // common axis undetermined.
  Eigen::Matrix<double, 3, Eigen::Dynamic> centered(3, static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) centered.col(static_cast<Eigen::Index>(i)) = pairs[i].source - mu_s;
  const Eigen::JacobiSVD<Eigen::MatrixXd> spread(centered);
  const auto sv = spread.singularValues();
  if (!(sv(0) > 0.0) || sv(1) <= 1e-9 * sv(0))
    throw RankDeficiencyError("alignment correspondences are collinear or coincident");

  const Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  const Mat3 r = svd.matrixU() * d * svd.matrixV().transpose();

  RigidTransform t;
  t.rotation = Quat(r).normalized();
  t.scale = estimate_scale ? (svd.singularValues().asDiagonal() * d).trace() / var_s : 1.0;
  t.translation = mu_w - t.scale * (r * mu_s);
  return t;
}

/// Maps every gaussian of `scene` by `t`: means transformed, rotations
/// left-composed, scales multiplied by t.scale.
inline GaussianScene transform_scene(GaussianScene scene, const RigidTransform& t) {
  for (auto& g : scene.gaussians) {
    g.mean = t.apply(g.mean);
    g.rotation = (t.rotation * g.rotation).normalized();
    g.scale *= t.scale;
  }
  return scene;
}

inline std::pair<GaussianScene, RigidTransform> align_to_world(const GaussianScene& scene,
                                                               const std::vector<Correspondence>& pairs,
                                                               bool estimate_scale = false) {
  const RigidTransform t = estimate_alignment(pairs, estimate_scale);
  return {transform_scene(scene, t), t};
}

}  // namespace gatesplat
