// Copyright Contributors to the gatesplat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Closed-loop rollouts: policy ticks with zero-order hold, fixed-step
// dynamics, directional gate-plane crossing tests and scoring.

#include "gatesplat/policies.hpp"

#include <functional>
#include <sstream>

namespace gatesplat {

enum class Outcome { success, frame_collision, miss, timeout, arena_exit };

inline std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::success: return "success";
    case Outcome::frame_collision: return "frame_collision";
    case Outcome::miss: return "miss";
    case Outcome::timeout: return "timeout";
    case Outcome::arena_exit: return "arena_exit";
  }
  return "unknown";
}

struct Crossing {
  double t = 0.0;
  /// Crossing point, on the gate plane at time t.
  Vec3 point = Vec3::Zero();
  double error = 0.0;
};

/// Linear interpolation of a plane crossing between two positions one step
/// apart. Only crossings from the negative to the non-negative side of the
/// gate normal count.
inline std::optional<Crossing> detect_crossing(const Vec3& p0, const Vec3& p1, double t0, double t1, const Gate& gate) {
  const GatePose a = gate_pose_at(gate, t0), b = gate_pose_at(gate, t1);
  const double s0 = (p0 - a.center).dot(a.normal());
  const double s1 = (p1 - b.center).dot(b.normal());
  if (!(s0 < 0.0 && s1 >= 0.0)) return std::nullopt;
  const double f = s0 / (s0 - s1);
  Crossing c;
  c.t = t0 + f * (t1 - t0);
  const GatePose g = gate_pose_at(gate, c.t);
  const Vec3 p = p0 + f * (p1 - p0);
  const Vec3 n = g.normal();
  c.point = p - (p - g.center).dot(n) * n;
  c.error = (c.point - g.center).norm();
  return c;
}

/// Success within the threshold, frame collision out to the ring's outer
/// half-extent plus the vehicle half-width, miss beyond.
inline Outcome classify_crossing(double error, const Gate& gate, double vehicle_half_width, double threshold) {
  if (!(error >= 0.0)) throw ParameterError("classify_crossing: error must be >= 0");
  if (error <= threshold) return Outcome::success;
  if (error <= gate.outer_half_extent() + vehicle_half_width) return Outcome::frame_collision;
  return Outcome::miss;
}

inline double default_success_threshold(Platform p) { return p == Platform::uav ? 0.80 : 0.30; }
inline double nominal_speed(Platform p) { return p == Platform::uav ? 7.0 : 1.0; }

/// Three times the straight-line flight time start -> gate 1 -> ... -> last gate.
inline double default_timeout(const Track& t) {
  double len = 0.0;
  Vec3 prev = t.init.position;
  for (const auto& g : t.gates) {
    const Vec3 c = gate_pose_at(g, 0.0).center;
    len += (c - prev).norm();
    prev = c;
  }
  return 3.0 * len / nominal_speed(t.platform);
}

struct SimConfig {
  /// Policy rate; must not exceed the dynamics rate.
  double tick_hz = 50.0;
  /// Seconds; 0 selects default_timeout(track).
  double timeout = 0.0;
  CameraIntrinsics camera;
  CameraMount mount;
  /// Meters; 0 selects the platform default.
  double success_threshold = 0.0;
  double vehicle_half_width = 0.0;
  std::uint64_t seed = 0;
  std::size_t history_length = 4;
  bool record_trajectory = true;
};

struct GateRecord {
  std::size_t gate = 0;
  bool crossed = false;
  double t_cross = 0.0;
  Vec3 point = Vec3::Zero();
  double error = 0.0;
  Outcome outcome = Outcome::timeout;
};

template <class Model>
struct Sample {
  double t;
  typename Model::State state;
  typename Model::Control control;
};

template <class Model>
struct Rollout {
  std::vector<Sample<Model>> trajectory;
  std::vector<GateRecord> gates;
  double duration = 0.0;
  std::size_t ticks = 0;
};

template <class Model>
using TickCallback = std::function<void(const Observation<Model>&, const typename Model::Control&)>;

/// Simulates `policy` on `track` from `initial`. The target is the first
/// gate not yet crossed; the run ends after the last gate, on a frame
/// collision, on leaving the arena or at the timeout.
template <class Model>
Rollout<Model> rollout(const Model& model, const Policy<Model>& policy, const Track& track,
                       const typename Model::State& initial, const SimConfig& cfg,
                       const TickCallback<Model>& on_tick = {}) {
  const auto desc = policy.descriptor();
  if (desc.platform != Model::kPlatform || track.platform != Model::kPlatform)
    throw ConfigError("rollout: policy '" + desc.name + "' platform does not match track '" + track.name + "'");
  track.validate();
  const double dt = model.dt();
  if (!(cfg.tick_hz > 0.0) || cfg.tick_hz > 1.0 / dt + 1e-9) throw ConfigError("rollout: tick rate must be in (0, 1/dt]");
  const auto steps_per_tick = static_cast<std::uint64_t>(std::max(1.0, std::round(1.0 / (cfg.tick_hz * dt))));
  const double threshold = cfg.success_threshold > 0.0 ? cfg.success_threshold : default_success_threshold(track.platform);
  const double half_width =
      cfg.vehicle_half_width > 0.0 ? cfg.vehicle_half_width : platform_geometry(track.platform).vehicle_half_width;
  const double timeout = cfg.timeout > 0.0 ? cfg.timeout : default_timeout(track);
  const auto max_steps = static_cast<std::uint64_t>(std::ceil(timeout / dt - 1e-9));

  Rollout<Model> out;
  Observation<Model> obs;
  obs.track = &track;
  obs.episode_seed = cfg.seed;
  typename Model::State state = initial;
  typename Model::Control control = Model::zero_control();
  std::size_t target = 0;
  const std::size_t n = track.gates.size();

  const auto finish = [&](Outcome o) {
    for (std::size_t g = target; g < n; ++g) out.gates.push_back({g, false, 0.0, Vec3::Zero(), 0.0, o});
    target = n;
  };

  for (std::uint64_t step = 0; step < max_steps && target < n; ++step) {
    const double t0 = static_cast<double>(step) * dt;
    if (step % steps_per_tick == 0) {
      obs.t = t0;
      obs.tick = step / steps_per_tick;
      obs.state = state;
      obs.target = target;
      if (desc.observation == ObservationKind::mask) {
        const CameraPose cam = camera_pose_from_body(Model::position(state), Model::body_rotation(state) *
                                                                                  Eigen::AngleAxisd(-cfg.mount.pitch, Vec3::UnitY()).toRotationMatrix());
        obs.mask = render_gate_mask(track, t0, cam, cfg.camera);
      }
      control = policy.evaluate(obs);
      if (on_tick) on_tick(obs, control);
      obs.history.push_back(control);
      if (obs.history.size() > cfg.history_length) obs.history.erase(obs.history.begin());
      ++out.ticks;
    }
    if (cfg.record_trajectory) out.trajectory.push_back({t0, state, control});
    const typename Model::State next = model.step(state, control, dt);
    const double t1 = static_cast<double>(step + 1) * dt;
    const Vec3 p0 = Model::position(state), p1 = Model::position(next);
    state = next;
    out.duration = t1;
    bool crashed = false;
    while (target < n) {
      const auto c = detect_crossing(p0, p1, t0, t1, track.gates[target]);
      if (!c) break;
      const Outcome o = classify_crossing(c->error, track.gates[target], half_width, threshold);
      out.gates.push_back({target, true, c->t, c->point, c->error, o});
      ++target;
      if (o == Outcome::frame_collision) {
        crashed = true;
        break;
      }
    }
    if (crashed) {
      finish(Outcome::frame_collision);
      break;
    }
    if (target < n && !track.arena.contains(p1)) {
      finish(Outcome::arena_exit);
      break;
    }
  }
  if (target < n) finish(Outcome::timeout);
  if (cfg.record_trajectory) out.trajectory.push_back({out.duration, state, control});
  return out;
}

/// Rollout from the track's own initial pose.
template <class Model>
Rollout<Model> rollout(const Model& model, const Policy<Model>& policy, const Track& track, const SimConfig& cfg,
                       const TickCallback<Model>& on_tick = {}) {
  return rollout(model, policy, track, model.initial_state(track.init), cfg, on_tick);
}

// ---- metrics ------------------------------------------------------------------

struct Metrics {
  std::size_t gates = 0;
  std::size_t successes = 0;
  double sr = 0.0;
  /// Mean error over successful crossings; absent without successes.
  std::optional<double> mge;
};

inline Metrics metrics(const std::vector<std::vector<GateRecord>>& runs) {
  if (runs.empty()) throw ParameterError("metrics: need at least one rollout");
  Metrics m;
  double sum = 0.0;
  for (const auto& r : runs)
    for (const auto& g : r) {
      ++m.gates;
      if (g.outcome == Outcome::success) {
        ++m.successes;
        sum += g.error;
      }
    }
  m.sr = m.gates ? static_cast<double>(m.successes) / static_cast<double>(m.gates) : 0.0;
  if (m.successes) m.mge = sum / static_cast<double>(m.successes);
  return m;
}

template <class Model>
Metrics metrics(const std::vector<Rollout<Model>>& rollouts) {
  std::vector<std::vector<GateRecord>> runs;
  runs.reserve(rollouts.size());
  for (const auto& r : rollouts) runs.push_back(r.gates);
  return metrics(runs);
}

// ---- writers --------------------------------------------------------------

inline void csv_row(std::ostringstream& os, std::initializer_list<double> values) {
  bool first = true;
  for (const double v : values) {
    if (!first) os << ',';
    os << format_double(v);
    first = false;
  }
  os << '\n';
}

inline std::string trajectory_csv(const Rollout<UavModel>& r) {
  std::ostringstream os;
  os << "t,x,y,z,yaw,pitch,u_yaw,u_pitch\n";
  for (const auto& s : r.trajectory)
    csv_row(os, {s.t, s.state.position.x(), s.state.position.y(), s.state.position.z(), s.state.yaw, s.state.pitch,
                 s.control.yaw_rate, s.control.pitch_rate});
  return os.str();
}

inline std::string trajectory_csv(const Rollout<QuadModel>& r) {
  std::ostringstream os;
  os << "t,x,y,z,vx,vy,vz,roll,pitch,yaw,p,q,r,cmd_vx,cmd_vy,cmd_vz,cmd_yaw_rate\n";
  for (const auto& s : r.trajectory) {
    const auto& q = s.state;
    csv_row(os, {s.t, q.position.x(), q.position.y(), q.position.z(), q.velocity.x(), q.velocity.y(), q.velocity.z(),
                 q.euler.x(), q.euler.y(), q.euler.z(), q.rates.x(), q.rates.y(), q.rates.z(), s.control.velocity.x(),
                 s.control.velocity.y(), s.control.velocity.z(), s.control.yaw_rate});
  }
  return os.str();
}

inline std::string gate_events_csv(const std::vector<GateRecord>& gates) {
  std::ostringstream os;
  os << "gate_idx,outcome,t_cross,error\n";
  for (const auto& g : gates) {
    os << g.gate << ',' << to_string(g.outcome) << ',';
    if (g.crossed)
      os << format_double(g.t_cross) << ',' << format_double(g.error);
    else
      os << ',';
    os << '\n';
  }
  return os.str();
}

inline nlohmann::json gate_records_json(const std::vector<GateRecord>& gates) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& g : gates) {
    nlohmann::json e{{"gate", g.gate}, {"outcome", to_string(g.outcome)}, {"crossed", g.crossed}};
    if (g.crossed) {
      e["t_cross"] = g.t_cross;
      e["error"] = g.error;
      e["point"] = {g.point.x(), g.point.y(), g.point.z()};
    }
    j.push_back(std::move(e));
  }
  return j;
}

inline nlohmann::json metrics_json(const Metrics& m) {
  nlohmann::json j{{"gates", m.gates}, {"successes", m.successes}, {"sr", m.sr}};
  j["mge"] = m.mge ? nlohmann::json(*m.mge) : nlohmann::json(nullptr);
  return j;
}

}  // namespace gatesplat
