// Copyright Contributors to the gatesplat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Vehicle models behind one stepping interface. A model type provides
//   State, Control, step(state, control, dt), position(state),
//   body_rotation(state), initial_state(pose), zero_control()
// and is consumed by the simulator as a template parameter.

#include "gatesplat/track.hpp"

#include <nlohmann/json.hpp>

namespace gatesplat {

namespace dyn_detail {

/// One classical RK4 step for a state type supporting +, and scalar *.
template <class S, class F>
S rk4(const S& x, double dt, F&& f) {
  const S k1 = f(x);
  const S k2 = f(x + (0.5 * dt) * k1);
  const S k3 = f(x + (0.5 * dt) * k2);
  const S k4 = f(x + dt * k3);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace dyn_detail

// ---- fixed-wing (Dubins airplane) -----------------------------------------

struct UavParams {
  double speed = 7.0;
  double theta_max = 0.4;
  double yaw_rate_max = 1.5;
  double pitch_rate_max = 1.0;
  double dt = 0.02;
};

/// Position, yaw (wrapped to (-pi, pi]) and nose-up pitch.
struct UavState {
  Vec3 position = Vec3::Zero();
  double yaw = 0.0;
  double pitch = 0.0;
  friend bool operator==(const UavState&, const UavState&) = default;
};

struct UavControl {
  double yaw_rate = 0.0;
  double pitch_rate = 0.0;
  friend bool operator==(const UavControl&, const UavControl&) = default;
};

class UavModel {
 public:
  using State = UavState;
  using Control = UavControl;
  static constexpr Platform kPlatform = Platform::uav;

  UavModel() = default;
  explicit UavModel(const UavParams& p) : p_(p) {
    if (!(p.speed > 0.0) || !(p.theta_max > 0.0) || !(p.yaw_rate_max > 0.0) || !(p.pitch_rate_max > 0.0))
      throw ConfigError("uav parameters must be positive");
    if (!(p.dt > 0.0 && p.dt <= 0.1)) throw ConfigError("uav dt must be in (0, 0.1]");
  }

  const UavParams& params() const { return p_; }
  double dt() const { return p_.dt; }

  Control saturate(const Control& u) const {
    return {clamp_abs(u.yaw_rate, p_.yaw_rate_max), clamp_abs(u.pitch_rate, p_.pitch_rate_max)};
  }

  /// d/dt of (x, y, z, yaw, pitch); pitch is taken at its clamped value.
  Eigen::Matrix<double, 5, 1> derivative(const Eigen::Matrix<double, 5, 1>& x, const Control& u) const {
    const double th = std::clamp(x[4], -p_.theta_max, p_.theta_max);
    Eigen::Matrix<double, 5, 1> d;
    d << p_.speed * std::cos(x[3]) * std::cos(th), p_.speed * std::sin(x[3]) * std::cos(th), p_.speed * std::sin(th),
        u.yaw_rate, u.pitch_rate;
    return d;
  }

  State step(const State& s, const Control& control, double dt) const {
    if (!(dt > 0.0 && dt <= 0.1)) throw ParameterError("step_uav: dt must be in (0, 0.1]");
    if (!s.position.allFinite() || !std::isfinite(s.yaw) || !std::isfinite(s.pitch) ||
        !std::isfinite(control.yaw_rate) || !std::isfinite(control.pitch_rate))
      throw StateError("step_uav: non-finite state or control");
    const Control u = saturate(control);
    Eigen::Matrix<double, 5, 1> x;
    x << s.position, s.yaw, s.pitch;
    x = dyn_detail::rk4(x, dt, [&](const auto& y) { return derivative(y, u); });
    return {x.head<3>(), wrap_angle(x[3]), std::clamp(x[4], -p_.theta_max, p_.theta_max)};
  }

  State step(const State& s, const Control& u) const { return step(s, u, p_.dt); }

  static Vec3 position(const State& s) { return s.position; }
  static double heading(const State& s) { return s.yaw; }
  Vec3 velocity(const State& s) const {
    return p_.speed * Vec3(std::cos(s.yaw) * std::cos(s.pitch), std::sin(s.yaw) * std::cos(s.pitch), std::sin(s.pitch));
  }
  static Mat3 body_rotation(const State& s) {
    return rot_z(s.yaw) * Eigen::AngleAxisd(-s.pitch, Vec3::UnitY()).toRotationMatrix();
  }
  State initial_state(const InitialPose& pose) const {
    return {pose.position, wrap_angle(pose.yaw), std::clamp(pose.pitch, -p_.theta_max, p_.theta_max)};
  }
  static Control zero_control() { return {}; }

 private:
  UavParams p_;
};

inline UavState step_uav(const UavState& s, const UavControl& u, double dt, const UavParams& p = {}) {
  return UavModel(p).step(s, u, dt);
}

// ---- quadrotor ------------------------------------------------------------

struct QuadParams {
  double mass = 0.28;
  double gravity = 9.81;
  Vec3 inertia = Vec3(3e-4, 3e-4, 5e-4);
  double tau_v = 0.3;
  double tilt_max = 0.6;
  double attitude_wn = 30.0;
  double attitude_zeta = 1.0;
  double yaw_rate_gain = 20.0;
  double v_max = 2.0;
  double yaw_rate_max = 1.5;
  double dt = 0.01;
};

/// 12-state rigid body: position, world velocity, ZYX Euler angles
/// (roll, pitch, yaw; R = Rz(yaw) Ry(pitch) Rx(roll), z up) and body rates.
struct QuadState {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 euler = Vec3::Zero();
  Vec3 rates = Vec3::Zero();
  friend bool operator==(const QuadState&, const QuadState&) = default;
};

/// Velocity in the heading frame (x forward, y left, z up) and yaw rate.
struct QuadControl {
  Vec3 velocity = Vec3::Zero();
  double yaw_rate = 0.0;
  friend bool operator==(const QuadControl&, const QuadControl&) = default;
};

class QuadModel {
 public:
  using State = QuadState;
  using Control = QuadControl;
  using Vec12 = Eigen::Matrix<double, 12, 1>;
  static constexpr Platform kPlatform = Platform::quad;

  QuadModel() = default;
  explicit QuadModel(const QuadParams& p) : p_(p) {
    if (!(p.mass > 0.0) || !(p.gravity > 0.0) || !(p.inertia.array() > 0.0).all() || !(p.tau_v > 0.0) ||
        !(p.tilt_max > 0.0) || !(p.attitude_wn > 0.0) || !(p.yaw_rate_gain > 0.0) || !(p.v_max > 0.0) ||
        !(p.yaw_rate_max > 0.0))
      throw ConfigError("quad parameters must be positive");
    if (!(p.dt > 0.0 && p.dt <= 0.05)) throw ConfigError("quad dt must be in (0, 0.05]");
  }

  const QuadParams& params() const { return p_; }
  double dt() const { return p_.dt; }

  Control saturate(const Control& u) const {
    Control out = u;
    const double n = u.velocity.norm();
    if (n > p_.v_max) out.velocity *= p_.v_max / n;
    out.yaw_rate = clamp_abs(u.yaw_rate, p_.yaw_rate_max);
    return out;
  }

  static Mat3 rotation(const Vec3& euler) {
    return (Eigen::AngleAxisd(euler.z(), Vec3::UnitZ()) * Eigen::AngleAxisd(euler.y(), Vec3::UnitY()) *
            Eigen::AngleAxisd(euler.x(), Vec3::UnitX()))
        .toRotationMatrix();
  }

  /// Closed-loop state derivative: velocity loop, tilt mapping, attitude PD
  /// with feedback-linearized torques, rigid-body translation and rotation.
  Vec12 derivative(const Vec12& x, const Control& u) const {
    const Vec3 v = x.segment<3>(3);
    const double phi = x[6], th = x[7], psi = x[8];
    const Vec3 w = x.segment<3>(9);
    const Vec3 e3 = Vec3::UnitZ();

    const Vec3 v_des = rot_z(psi) * u.velocity;
    const Vec3 f = (v_des - v) / p_.tau_v + p_.gravity * e3;
    const Vec3 fh = rot_z(-psi) * f;
    const double th_des = clamp_abs(std::atan2(fh.x(), fh.z()), p_.tilt_max);
    const double phi_des = clamp_abs(std::atan2(-fh.y(), std::hypot(fh.x(), fh.z())), p_.tilt_max);

    const double sp = std::sin(phi), cp = std::cos(phi), st = std::sin(th), ct = std::cos(th);
    const Vec3 b3 = rot_z(psi) * Vec3(st * cp, -sp, ct * cp);
    const double thrust = std::max(0.0, p_.mass * f.dot(b3));

    const double wn = p_.attitude_wn, zeta = p_.attitude_zeta;
    const double r_des = (u.yaw_rate * ct - sp * w.y()) / cp;
    const Vec3 wdot_des(wn * wn * (phi_des - phi) - 2.0 * zeta * wn * w.x(),
                        wn * wn * (th_des - th) - 2.0 * zeta * wn * w.y(), p_.yaw_rate_gain * (r_des - w.z()));
    const Mat3 inertia = p_.inertia.asDiagonal();
    const Vec3 torque = inertia * wdot_des + w.cross(inertia * w);
    const Vec3 wdot = inertia.inverse() * (torque - w.cross(inertia * w));

    const double tt = st / ct;
    const Vec3 eta_dot(w.x() + sp * tt * w.y() + cp * tt * w.z(), cp * w.y() - sp * w.z(),
                       (sp * w.y() + cp * w.z()) / ct);

    Vec12 d;
    d << v, (thrust / p_.mass) * b3 - p_.gravity * e3, eta_dot, wdot;
    return d;
  }

  State step(const State& s, const Control& control, double dt) const {
    if (!(dt > 0.0 && dt <= 0.05)) throw ParameterError("step_quad: dt must be in (0, 0.05]");
    if (!s.position.allFinite() || !s.velocity.allFinite() || !s.euler.allFinite() || !s.rates.allFinite() ||
        !control.velocity.allFinite() || !std::isfinite(control.yaw_rate))
      throw StateError("step_quad: non-finite state or control");
    const Control u = saturate(control);
    Vec12 x;
    x << s.position, s.velocity, s.euler, s.rates;
    x = dyn_detail::rk4(x, dt, [&](const Vec12& y) { return derivative(y, u); });
    State out{x.segment<3>(0), x.segment<3>(3), x.segment<3>(6), x.segment<3>(9)};
    out.euler.z() = wrap_angle(out.euler.z());
    if (!out.position.allFinite() || !out.euler.allFinite()) throw StateError("step_quad: integration diverged");
    return out;
  }

  State step(const State& s, const Control& u) const { return step(s, u, p_.dt); }

  static Vec3 position(const State& s) { return s.position; }
  static double heading(const State& s) { return s.euler.z(); }
  static Vec3 velocity(const State& s) { return s.velocity; }
  static Mat3 body_rotation(const State& s) { return rotation(s.euler); }
  static State initial_state(const InitialPose& pose) {
    State s;
    s.position = pose.position;
    s.euler.z() = wrap_angle(pose.yaw);
    return s;
  }
  static Control zero_control() { return {}; }

 private:
  QuadParams p_;
};

inline QuadState step_quad(const QuadState& s, const QuadControl& u, double dt, const QuadParams& p = {}) {
  return QuadModel(p).step(s, u, dt);
}

// ---- JSON configuration ----------------------------------------------------

inline UavParams uav_params_from_json(const nlohmann::json& j) {
  UavParams p;
  p.speed = j.value("V", p.speed);
  p.theta_max = j.value("theta_max", p.theta_max);
  p.yaw_rate_max = j.value("yaw_rate_max", p.yaw_rate_max);
  p.pitch_rate_max = j.value("pitch_rate_max", p.pitch_rate_max);
  p.dt = j.value("dt", p.dt);
  return p;
}

inline QuadParams quad_params_from_json(const nlohmann::json& j) {
  QuadParams p;
  p.mass = j.value("mass", p.mass);
  p.tau_v = j.value("tau_v", p.tau_v);
  p.tilt_max = j.value("tilt_max", p.tilt_max);
  p.v_max = j.value("v_max", p.v_max);
  p.yaw_rate_max = j.value("yaw_rate_max", p.yaw_rate_max);
  p.dt = j.value("dt", p.dt);
  return p;
}

}  // namespace gatesplat
