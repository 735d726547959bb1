// Copyright Contributors to the gatesplat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Policies share one interface templated on the vehicle model: experts read
// the full state, mask policies read a gate mask plus recent controls.

#include "gatesplat/dynamics.hpp"
#include "gatesplat/layout.hpp"

#include <memory>
#include <numeric>

namespace gatesplat {

enum class ObservationKind { full_state, mask };

struct PolicyDescriptor {
  std::string name;
  Platform platform;
  ObservationKind observation;
};

/// What a policy sees at one tick. The simulator fills the full-state part
/// always and the mask part only for mask policies.
template <class Model>
struct Observation {
  double t = 0.0;
  std::uint64_t tick = 0;
  /// Seed of the current rollout; lets stochastic policies draw
  /// reproducible noise without internal state.
  std::uint64_t episode_seed = 0;

  typename Model::State state{};
  const Track* track = nullptr;
  std::size_t target = 0;

  BinaryMask mask;
  /// Most recent controls, oldest first.
  std::vector<typename Model::Control> history;

  GatePose target_pose() const { return gate_pose_at(track->gates.at(target), t); }
  Vec3 target_velocity() const { return gate_velocity_at(track->gates.at(target), t); }
};

/// One rollout's contribution to a training set: the layout flown and the
/// number of (observation, expert control) pairs it produced.
struct DatasetEntry {
  TwoGateLayout layout;
  std::size_t pairs = 0;
};

struct Dataset {
  std::vector<DatasetEntry> entries;
  std::size_t total_pairs() const {
    return std::accumulate(entries.begin(), entries.end(), std::size_t{0},
                           [](std::size_t a, const DatasetEntry& e) { return a + e.pairs; });
  }
};

template <class Model>
class Policy {
 public:
  using Control = typename Model::Control;
  virtual ~Policy() = default;
  virtual PolicyDescriptor descriptor() const = 0;
  /// Deterministic given the policy state and the observation.
  virtual Control evaluate(const Observation<Model>& obs) const = 0;
  /// Updates the policy from the accumulated dataset. Default: no-op.
  virtual void train(const Dataset&) {}
};

// ---- experts ----------------------------------------------------------------

struct UavExpertGains {
  double k_yaw = 2.0;
  double k_pitch = 2.0;
  /// Aim point distance ahead of the gate plane along the approach axis.
  double aim_offset = 1.0;
};

/// Proportional guidance toward a point on the gate axis: 1 m before the gate
/// while farther away, then 1 m ahead of the vehicle's axial position.
inline UavControl expert_uav(const UavState& s, const GatePose& gate, const UavExpertGains& k = {},
                             const UavParams& limits = {}) {
  const Vec3 n = gate.normal();
  const double d = (s.position - gate.center).dot(n);
  const Vec3 aim = gate.center + n * std::max(-k.aim_offset, d + k.aim_offset);
  const Vec3 r = aim - s.position;
  const double bearing = std::atan2(r.y(), r.x());
  const double elevation = std::atan2(r.z(), std::hypot(r.x(), r.y()));
  return {clamp_abs(k.k_yaw * wrap_angle(bearing - s.yaw), limits.yaw_rate_max),
          clamp_abs(k.k_pitch * (elevation - s.pitch), limits.pitch_rate_max)};
}

struct QuadExpertGains {
  double forward_speed = 1.0;
  double k_lateral = 1.2;
  double k_vertical = 1.2;
  double k_yaw = 0.8;
};

/// Constant forward speed, proportional lateral/vertical correction toward
/// the gate center in the heading frame plus the gate's own velocity, and yaw
/// rate aligning the heading with the gate normal.
inline QuadControl expert_quad(const QuadState& s, const GatePose& gate, const Vec3& gate_velocity = Vec3::Zero(),
                               const QuadExpertGains& k = {}, const QuadParams& limits = {}) {
  const double psi = s.euler.z();
  const Mat3 to_heading = rot_z(-psi);
  const Vec3 rel = to_heading * (gate.center - s.position);
  const Vec3 ff = to_heading * gate_velocity;
  QuadControl u;
  u.velocity = Vec3(k.forward_speed, k.k_lateral * rel.y() + ff.y(), k.k_vertical * rel.z() + ff.z());
  u.yaw_rate = k.k_yaw * wrap_angle(gate.yaw - psi);
  return QuadModel(limits).saturate(u);
}

template <class Model>
class ExpertPolicy;

template <>
class ExpertPolicy<UavModel> final : public Policy<UavModel> {
 public:
  explicit ExpertPolicy(UavParams limits = {}, UavExpertGains gains = {}) : limits_(limits), gains_(gains) {}
  PolicyDescriptor descriptor() const override { return {"expert", Platform::uav, ObservationKind::full_state}; }
  UavControl evaluate(const Observation<UavModel>& obs) const override {
    return expert_uav(obs.state, obs.target_pose(), gains_, limits_);
  }

 private:
  UavParams limits_;
  UavExpertGains gains_;
};

template <>
class ExpertPolicy<QuadModel> final : public Policy<QuadModel> {
 public:
  explicit ExpertPolicy(QuadParams limits = {}, QuadExpertGains gains = {}) : limits_(limits), gains_(gains) {}
  PolicyDescriptor descriptor() const override { return {"expert", Platform::quad, ObservationKind::full_state}; }
  QuadControl evaluate(const Observation<QuadModel>& obs) const override {
    return expert_quad(obs.state, obs.target_pose(), obs.target_velocity(), gains_, limits_);
  }

 private:
  QuadParams limits_;
  QuadExpertGains gains_;
};

/// Always commands zero.
template <class Model>
class ZeroPolicy final : public Policy<Model> {
 public:
  PolicyDescriptor descriptor() const override {
    return {"zero", Model::kPlatform, ObservationKind::full_state};
  }
  typename Model::Control evaluate(const Observation<Model>&) const override { return Model::zero_control(); }
};

// ---- connected components -------------------------------------------------

struct Component {
  Vec2 centroid;
  std::size_t area = 0;
  /// Inclusive pixel bounding box.
  int u_min = 0, u_max = 0, v_min = 0, v_max = 0;
};

/// 4-connected labeling of white pixels. Labels are numbered 1.. in raster
/// order of each component's first pixel; returns per-pixel labels (0 for
/// black) and the number of components.
inline std::pair<std::vector<std::uint32_t>, std::size_t> label_components(const BinaryMask& mask) {
  const int w = mask.width, h = mask.height;
  std::vector<std::uint32_t> labels(mask.pixel_count(), 0);
  std::vector<std::uint32_t> parent{0};
  const auto find = [&](std::uint32_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      if (!mask.at(u, v)) continue;
      const std::size_t px = static_cast<std::size_t>(v) * w + u;
      const std::uint32_t left = u > 0 ? labels[px - 1] : 0;
      const std::uint32_t up = v > 0 ? labels[px - w] : 0;
      if (!left && !up) {
        const auto l = static_cast<std::uint32_t>(parent.size());
        parent.push_back(l);
        labels[px] = l;
      } else if (left && up) {
        const std::uint32_t a = find(left), b = find(up);
        labels[px] = std::min(a, b);
        parent[std::max(a, b)] = std::min(a, b);
      } else {
        labels[px] = find(left ? left : up);
      }
    }
  }
  // Provisional labels are created in raster order and roots are always the
  // smallest label of their set, so renumbering roots in increasing order
  // yields raster order of first pixels.
  std::vector<std::uint32_t> final_label(parent.size(), 0);
  std::uint32_t next = 0;
  for (std::uint32_t l = 1; l < parent.size(); ++l)
    if (find(l) == l) final_label[l] = ++next;
  for (auto& l : labels)
    if (l) l = final_label[find(l)];
  return {std::move(labels), next};
}

/// Centroid and area of the largest component; ties go to the smaller label.
inline std::optional<Component> largest_component_centroid(const BinaryMask& mask) {
  const auto [labels, count] = label_components(mask);
  if (count == 0) return std::nullopt;
  std::vector<std::size_t> area(count + 1, 0);
  for (const auto l : labels) ++area[l];
  std::size_t best = 1;
  for (std::size_t l = 2; l <= count; ++l)
    if (area[l] > area[best]) best = l;
  Component c{Vec2::Zero(), area[best], mask.width, -1, mask.height, -1};
  for (int v = 0; v < mask.height; ++v)
    for (int u = 0; u < mask.width; ++u)
      if (labels[static_cast<std::size_t>(v) * mask.width + u] == best) {
        c.centroid += Vec2(u, v);
        c.u_min = std::min(c.u_min, u);
        c.u_max = std::max(c.u_max, u);
        c.v_min = std::min(c.v_min, v);
        c.v_max = std::max(c.v_max, v);
      }
  c.centroid /= static_cast<double>(c.area);
  return c;
}

// ---- mask controller --------------------------------------------------------

struct MaskControllerGains {
  double forward_speed = 1.0;
  double k_lateral = 2.0;
  double k_vertical = 2.0;
  double k_yaw = 2.0;
};

/// Whether the component touches at least two image borders: a gate too
/// close to be seen whole, whose centroid follows the visible arc.
inline bool is_clipped_near(const Component& c, int width, int height) {
  return (c.u_min == 0) + (c.v_min == 0) + (c.u_max == width - 1) + (c.v_max == height - 1) >= 2;
}

/// Steers toward the centroid of the largest mask component. Positive vy is
/// leftward and positive vz upward, so a centroid right of or below the
/// principal point yields negative commands. With an empty mask the vehicle
/// stops advancing and repeats its last lateral, vertical and yaw commands.
/// When the component is a clipped nearby gate the last command is repeated
/// at full forward speed, and an empty mask while so committed means the
/// vehicle is inside the gate, so it keeps going.
inline QuadControl mask_centroid_control(const BinaryMask& mask, const std::vector<QuadControl>& history,
                                         const CameraIntrinsics& k, const MaskControllerGains& gains = {},
                                         const QuadParams& limits = {}) {
  QuadControl u;
  const auto c = largest_component_centroid(mask);
  if (c && !history.empty() && is_clipped_near(*c, mask.width, mask.height)) {
    u = history.back();
    u.velocity.x() = gains.forward_speed;
  } else if (c) {
    const double ex = (k.cx - c->centroid.x()) / k.width;
    const double ey = (k.cy - c->centroid.y()) / k.height;
    u.velocity = Vec3(gains.forward_speed, gains.k_lateral * ex, gains.k_vertical * ey);
    u.yaw_rate = gains.k_yaw * ex;
  } else if (!history.empty()) {
    u = history.back();
    const bool committed = history.size() >= 2 && u.velocity.x() == gains.forward_speed &&
                           u.velocity == history[history.size() - 2].velocity &&
                           u.yaw_rate == history[history.size() - 2].yaw_rate;
    if (!committed) u.velocity.x() = 0.0;
  }
  return QuadModel(limits).saturate(u);
}

class MaskCentroidPolicy final : public Policy<QuadModel> {
 public:
  explicit MaskCentroidPolicy(CameraIntrinsics k = {}, MaskControllerGains gains = {}, QuadParams limits = {})
      : k_(k), gains_(gains), limits_(limits) {}
  PolicyDescriptor descriptor() const override { return {"mask_centroid", Platform::quad, ObservationKind::mask}; }
  QuadControl evaluate(const Observation<QuadModel>& obs) const override {
    return mask_centroid_control(obs.mask, obs.history, k_, gains_, limits_);
  }

 private:
  CameraIntrinsics k_;
  MaskControllerGains gains_;
  QuadParams limits_;
};

// ---- perception noise -------------------------------------------------------

struct PerceptionNoise {
  /// Flip probability of each boundary-band pixel.
  double boundary_flip = 0.1;
  /// Poisson rate of spurious blobs per frame.
  double blob_rate = 0.5;
  int blob_radius_min = 1;
  int blob_radius_max = 2;
};

/// Pixels with a 4-neighbor of different value.
inline std::vector<std::size_t> boundary_band(const BinaryMask& m) {
  std::vector<std::size_t> band;
  for (int v = 0; v < m.height; ++v)
    for (int u = 0; u < m.width; ++u) {
      const auto c = m.at(u, v);
      const bool edge = (u > 0 && m.at(u - 1, v) != c) || (u + 1 < m.width && m.at(u + 1, v) != c) ||
                        (v > 0 && m.at(u, v - 1) != c) || (v + 1 < m.height && m.at(u, v + 1) != c);
      if (edge) band.push_back(static_cast<std::size_t>(v) * m.width + u);
    }
  return band;
}

/// Flips boundary-band pixels independently with the given probability, then
/// paints a Poisson number of white disks at uniform positions.
inline BinaryMask noisy_perception(const BinaryMask& truth, const PerceptionNoise& p, Rng& rng) {
  if (!(p.boundary_flip >= 0.0 && p.boundary_flip <= 1.0)) throw ParameterError("flip probability outside [0,1]");
  if (!(p.blob_rate >= 0.0)) throw ParameterError("blob rate must be >= 0");
  if (p.blob_radius_min < 0 || p.blob_radius_max < p.blob_radius_min) throw ParameterError("invalid blob radii");
  BinaryMask out = truth;
  if (p.boundary_flip > 0.0)
    for (const auto px : boundary_band(truth))
      if (rng.bernoulli(p.boundary_flip)) out.data[px] = truth.data[px] ? 0 : 255;
  const unsigned blobs = rng.poisson(p.blob_rate);
  for (unsigned b = 0; b < blobs; ++b) {
    const int cu = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(out.width)));
    const int cv = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(out.height)));
    const int r = p.blob_radius_min +
                  static_cast<int>(rng.uniform_index(static_cast<std::size_t>(p.blob_radius_max - p.blob_radius_min + 1)));
    for (int dv = -r; dv <= r; ++dv)
      for (int du = -r; du <= r; ++du)
        if (du * du + dv * dv <= r * r && cu + du >= 0 && cu + du < out.width && cv + dv >= 0 && cv + dv < out.height)
          out.at(cu + du, cv + dv) = 255;
  }
  return out;
}

/// Feeds the wrapped mask policy a noisy copy of the mask. Noise is drawn from
/// a stream keyed by (episode seed, tick).
class NoisyMaskPolicy final : public Policy<QuadModel> {
 public:
  NoisyMaskPolicy(std::shared_ptr<const Policy<QuadModel>> inner, PerceptionNoise noise)
      : inner_(std::move(inner)), noise_(noise) {
    if (!inner_ || inner_->descriptor().observation != ObservationKind::mask)
      throw ConfigError("noisy perception wraps a mask policy");
  }
  PolicyDescriptor descriptor() const override {
    auto d = inner_->descriptor();
    d.name = "noisy_" + d.name;
    return d;
  }
  QuadControl evaluate(const Observation<QuadModel>& obs) const override {
    Rng rng(derive_seed(obs.episode_seed ^ 0x6e6f697379ULL, obs.tick));
    Observation<QuadModel> noisy = obs;
    noisy.mask = noisy_perception(obs.mask, noise_, rng);
    return inner_->evaluate(noisy);
  }

 private:
  std::shared_ptr<const Policy<QuadModel>> inner_;
  PerceptionNoise noise_;
};

// ---- synthetic learner -------------------------------------------------------

/// Control components as a flat vector, with per-component saturation.
inline Eigen::VectorXd control_vector(const UavControl& u) { return Eigen::Vector2d(u.yaw_rate, u.pitch_rate); }
inline Eigen::VectorXd control_vector(const QuadControl& u) {
  return Eigen::Vector4d(u.velocity.x(), u.velocity.y(), u.velocity.z(), u.yaw_rate);
}
inline UavControl control_from_vector(const Eigen::VectorXd& v, const UavControl&) { return {v[0], v[1]}; }
inline QuadControl control_from_vector(const Eigen::VectorXd& v, const QuadControl&) {
  return {Vec3(v[0], v[1], v[2]), v[3]};
}
inline Eigen::VectorXd control_saturation(const UavParams& p) {
  return Eigen::Vector2d(p.yaw_rate_max, p.pitch_rate_max);
}
inline Eigen::VectorXd control_saturation(const QuadParams& p) {
  return Eigen::Vector4d(p.v_max, p.v_max, p.v_max, p.yaw_rate_max);
}

struct LearnerConfig {
  /// Noise scale at zero data as a fraction of each control's saturation.
  double sigma0_fraction = 0.4;
  double n0 = 20.0;
  /// Correlation between ticks of one rollout (shared per-rollout bias).
  double rho = 0.0;
};

/// Stand-in for a learned policy: the expert's control plus zero-mean noise
/// whose scale shrinks with the amount of training data in the grid cell of
/// the layout being flown, sigma_i = sigma0 / sqrt(1 + n_i / n0).
template <class Model>
class SyntheticLearner final : public Policy<Model> {
 public:
  using Control = typename Model::Control;
  using Params = std::remove_cvref_t<decltype(std::declval<Model>().params())>;

  SyntheticLearner(GridPartition partition, std::shared_ptr<const Policy<Model>> expert, Params limits = {},
                   LearnerConfig config = {})
      : partition_(std::move(partition)),
        expert_(std::move(expert)),
        limits_(limits),
        config_(config),
        counts_(partition_.cell_count(), 0) {
    if (!expert_) throw ConfigError("synthetic learner needs an expert");
    if (!(config.sigma0_fraction >= 0.0) || !(config.n0 > 0.0) || !(config.rho >= 0.0 && config.rho <= 1.0))
      throw ConfigError("invalid synthetic learner configuration");
  }

  PolicyDescriptor descriptor() const override {
    return {"synthetic_learner", Model::kPlatform, ObservationKind::full_state};
  }

  /// Recounts n_i from the whole dataset.
  void train(const Dataset& data) override {
    std::fill(counts_.begin(), counts_.end(), 0);
    for (const auto& e : data.entries) ++counts_[partition_.nearest_cell(e.layout)];
  }

  double sigma_scale(std::size_t cell) const {
    return 1.0 / std::sqrt(1.0 + static_cast<double>(counts_.at(cell)) / config_.n0);
  }

  std::size_t count(std::size_t cell) const { return counts_.at(cell); }
  const std::vector<std::size_t>& counts() const { return counts_; }

  Control evaluate(const Observation<Model>& obs) const override {
    const Control base = expert_->evaluate(obs);
    const std::size_t cell = partition_.nearest_cell(layout_of(*obs.track));
    const Eigen::VectorXd sat = control_saturation(limits_);
    const double scale = config_.sigma0_fraction * sigma_scale(cell);
    Eigen::VectorXd v = control_vector(base);
    const double a = config_.rho, b = std::sqrt(1.0 - config_.rho * config_.rho);
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const auto comp = static_cast<std::uint64_t>(i);
      const double z_bias = hashed_normal(obs.episode_seed, comp);
      const double z_tick = hashed_normal(obs.episode_seed, 1000 + obs.tick * 16 + comp);
      v[i] += scale * sat[i] * (a * z_bias + b * z_tick);
    }
    Model model(limits_);
    return model.saturate(control_from_vector(v, base));
  }

 private:
  GridPartition partition_;
  std::shared_ptr<const Policy<Model>> expert_;
  Params limits_;
  LearnerConfig config_;
  std::vector<std::size_t> counts_;
};

}  // namespace gatesplat
