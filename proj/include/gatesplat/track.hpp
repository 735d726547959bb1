// Copyright Contributors to the gatesplat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gatesplat/scene.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <optional>

namespace gatesplat {

enum class Platform { uav, quad };

inline std::string to_string(Platform p) { return p == Platform::uav ? "uav" : "quad"; }

inline Platform platform_from_string(const std::string& s) {
  if (s == "uav") return Platform::uav;
  if (s == "quad") return Platform::quad;
  throw ConfigError("unknown platform '" + s + "' (expected uav or quad)");
}

enum class GateShape { square, circular };

/// Gate placement: center plus yaw of the crossing normal in the horizontal
/// plane. Gate-local frame: x along the normal, y to the left, z up.
struct GatePose {
  Vec3 center = Vec3::Zero();
  double yaw = 0.0;

  Vec3 normal() const { return {std::cos(yaw), std::sin(yaw), 0.0}; }
  Vec3 lateral() const { return {-std::sin(yaw), std::cos(yaw), 0.0}; }

  /// Gate-local to world.
  RigidTransform transform() const {
    RigidTransform t;
    t.rotation = Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ()));
    t.translation = center;
    return t;
  }

  friend bool operator==(const GatePose&, const GatePose&) = default;
};

struct GateWaypoint {
  double t = 0.0;
  GatePose pose;
  friend bool operator==(const GateWaypoint&, const GateWaypoint&) = default;
};

/// Ring obstacle. `inner` is the side length (square) or diameter (circular).
struct Gate {
  GateShape shape = GateShape::square;
  double inner = 2.0;
  double ring_width = 0.2;
  GatePose pose;
  /// Optional piecewise-linear motion; empty for static gates.
  std::vector<GateWaypoint> schedule;

  double inner_half_extent() const { return 0.5 * inner; }
  double outer_half_extent() const { return 0.5 * inner + ring_width; }
  bool is_moving() const { return !schedule.empty(); }

  void validate() const {
    if (!(inner > 0.0)) throw ValidationError("gate inner dimension must be > 0");
    if (!(ring_width > 0.0)) throw ValidationError("gate ring width must be > 0");
    if (!pose.center.allFinite() || !std::isfinite(pose.yaw)) throw ValidationError("gate pose is not finite");
    for (std::size_t i = 1; i < schedule.size(); ++i)
      if (!(schedule[i].t > schedule[i - 1].t))
        throw ValidationError("gate schedule timestamps must be strictly increasing");
  }

  friend bool operator==(const Gate&, const Gate&) = default;
};

inline Gate square_gate(const GatePose& pose, double inner = 2.0, double ring_width = 0.2) {
  return {GateShape::square, inner, ring_width, pose, {}};
}

inline Gate circular_gate(const GatePose& pose, double inner_diameter = 0.78, double ring_width = 0.10) {
  return {GateShape::circular, inner_diameter, ring_width, pose, {}};
}

/// Pose at time t: linear interpolation of the schedule (yaw along the
/// shortest arc), held constant outside it. Static gates return their pose.
inline GatePose gate_pose_at(const Gate& gate, double t) {
  const auto& s = gate.schedule;
  if (s.empty()) return gate.pose;
  if (t <= s.front().t) return s.front().pose;
  if (t >= s.back().t) return s.back().pose;
  const auto it = std::upper_bound(s.begin(), s.end(), t, [](double v, const GateWaypoint& w) { return v < w.t; });
  const auto& b = *it;
  const auto& a = *(it - 1);
  if (t == a.t) return a.pose;
  const double f = (t - a.t) / (b.t - a.t);
  GatePose p;
  p.center = a.pose.center + f * (b.pose.center - a.pose.center);
  p.yaw = wrap_angle(a.pose.yaw + f * wrap_angle(b.pose.yaw - a.pose.yaw));
  return p;
}

/// d(center)/dt of the schedule at t (right derivative; zero outside).
inline Vec3 gate_velocity_at(const Gate& gate, double t) {
  const auto& s = gate.schedule;
  if (s.size() < 2 || t < s.front().t || t >= s.back().t) return Vec3::Zero();
  const auto it = std::upper_bound(s.begin(), s.end(), t, [](double v, const GateWaypoint& w) { return v < w.t; });
  const auto& b = *it;
  const auto& a = *(it - 1);
  return (b.pose.center - a.pose.center) / (b.t - a.t);
}

struct Arena {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();
  bool contains(const Vec3& p) const { return (p.array() >= min.array()).all() && (p.array() <= max.array()).all(); }
  friend bool operator==(const Arena&, const Arena&) = default;
};

struct InitialPose {
  Vec3 position = Vec3::Zero();
  double yaw = 0.0;
  double pitch = 0.0;
  friend bool operator==(const InitialPose&, const InitialPose&) = default;
};

struct Track {
  std::string name;
  Platform platform = Platform::uav;
  Arena arena;
  std::vector<Gate> gates;
  InitialPose init;

  void validate() const {
    if (gates.empty()) throw ValidationError("track '" + name + "' has no gates");
    for (std::size_t i = 0; i < gates.size(); ++i) {
      gates[i].validate();
      if (!gates[i].is_moving() && !arena.contains(gates[i].pose.center))
        throw ValidationError("track '" + name + "': gate " + std::to_string(i) + " center outside arena");
    }
  }

  friend bool operator==(const Track&, const Track&) = default;
};

/// Arena and gate geometry of the two platforms.
struct PlatformGeometry {
  Arena arena;
  GateShape shape;
  double inner;
  double ring_width;
  double vehicle_half_width;
};

inline PlatformGeometry platform_geometry(Platform p) {
  if (p == Platform::uav) return {{{-20, -10, 0}, {20, 10, 4}}, GateShape::square, 2.0, 0.2, 0.20};
  return {{{-3, -3, 0}, {3, 3, 3}}, GateShape::circular, 0.78, 0.10, 0.09};
}

/// Each gate shifted by an independent offset uniform in [-a, a]^3 with a
/// given in centimeters. Yaw and schedule timing are unchanged.
inline Track perturb_track(const Track& track, double a_cm, Rng& rng) {
  if (!(a_cm >= 0.0)) throw ParameterError("perturbation level must be >= 0");
  const double a = a_cm / 100.0;
  Track out = track;
  for (auto& g : out.gates) {
    Vec3 d;
    for (int k = 0; k < 3; ++k) d[k] = rng.uniform(-a, a);
    g.pose.center += d;
    for (auto& w : g.schedule) w.pose.center += d;
  }
  return out;
}

// ---- JSON ----------------------------------------------------------------

namespace track_json {

inline Vec3 vec3(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(std::string("track json: '") + what + "' must be [x,y,z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline nlohmann::json to_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

inline GatePose pose(const nlohmann::json& j) {
  if (!j.contains("center")) throw ConfigError("track json: gate pose lacks 'center'");
  return {vec3(j.at("center"), "center"), j.value("yaw", 0.0)};
}

}  // namespace track_json

inline Track track_from_json(const nlohmann::json& j) {
  using namespace track_json;
  try {
    Track t;
    t.name = j.value("name", std::string("track"));
    t.platform = platform_from_string(j.value("platform", std::string("uav")));
    const auto geo = platform_geometry(t.platform);
    if (j.contains("arena")) {
      t.arena.min = vec3(j.at("arena").at("min"), "arena.min");
      t.arena.max = vec3(j.at("arena").at("max"), "arena.max");
    } else {
      t.arena = geo.arena;
    }
    for (const auto& jg : j.at("gates")) {
      Gate g;
      const std::string shape = jg.value("shape", geo.shape == GateShape::square ? "square" : "circular");
      if (shape == "square")
        g.shape = GateShape::square;
      else if (shape == "circular")
        g.shape = GateShape::circular;
      else
        throw ConfigError("track json: unknown gate shape '" + shape + "'");
      const auto dims = jg.value("dims", nlohmann::json::object());
      g.inner = dims.value("inner", geo.shape == g.shape ? geo.inner : (g.shape == GateShape::square ? 2.0 : 0.78));
      g.ring_width = dims.value("ring_width", g.shape == GateShape::square ? 0.2 : 0.1);
      g.pose = pose(jg.at("pose"));
      if (jg.contains("schedule"))
        for (const auto& w : jg.at("schedule")) g.schedule.push_back({w.at("t").get<double>(), pose(w)});
      t.gates.push_back(std::move(g));
    }
    if (j.contains("init_state")) {
      const auto& s = j.at("init_state");
      t.init.position = vec3(s.at("position"), "init_state.position");
      t.init.yaw = s.value("yaw", 0.0);
      t.init.pitch = s.value("pitch", 0.0);
    }
    t.validate();
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("track json: ") + e.what());
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
}

inline nlohmann::json track_to_json(const Track& t) {
  using namespace track_json;
  nlohmann::json j;
  j["name"] = t.name;
  j["platform"] = to_string(t.platform);
  j["arena"] = {{"min", to_json(t.arena.min)}, {"max", to_json(t.arena.max)}};
  j["gates"] = nlohmann::json::array();
  for (const auto& g : t.gates) {
    nlohmann::json jg;
    jg["shape"] = g.shape == GateShape::square ? "square" : "circular";
    jg["dims"] = {{"inner", g.inner}, {"ring_width", g.ring_width}};
    jg["pose"] = {{"center", to_json(g.pose.center)}, {"yaw", g.pose.yaw}};
    if (g.is_moving()) {
      jg["schedule"] = nlohmann::json::array();
      for (const auto& w : g.schedule)
        jg["schedule"].push_back({{"t", w.t}, {"center", to_json(w.pose.center)}, {"yaw", w.pose.yaw}});
    }
    j["gates"].push_back(std::move(jg));
  }
  j["init_state"] = {{"position", to_json(t.init.position)}, {"yaw", t.init.yaw}, {"pitch", t.init.pitch}};
  return j;
}

inline Track load_track_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open track file '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("track file '" + path.string() + "': " + e.what());
  }
  return track_from_json(j);
}

// ---- splat primitive -----------------------------------------------------

/// Gaussians approximating the gate ring in the gate-local frame (centered at
/// the origin, opening in the local y-z plane), registered as object "gate".
inline GaussianScene make_gate_splats(const Gate& gate, const Vec3& color = Vec3(1.0, 0.45, 0.05)) {
  GaussianScene s;
  const double mid = gate.inner_half_extent() + 0.5 * gate.ring_width;
  const double blob = 0.5 * gate.ring_width;
  const auto push = [&](const Vec3& p) {
    Gaussian g;
    g.mean = p;
    g.scale = Vec3(0.5 * blob, blob, blob);
    g.color = color;
    g.opacity = 0.95;
    s.gaussians.push_back(g);
  };
  if (gate.shape == GateShape::circular) {
    const int n = std::max(12, static_cast<int>(std::ceil(2.0 * kPi * mid / blob)));
    for (int i = 0; i < n; ++i) {
      const double a = 2.0 * kPi * i / n;
      push({0.0, mid * std::cos(a), mid * std::sin(a)});
    }
  } else {
    const int n = std::max(4, static_cast<int>(std::ceil(2.0 * mid / blob)));
    for (int side = 0; side < 4; ++side) {
      for (int i = 0; i < n; ++i) {
        const double f = -mid + 2.0 * mid * i / n;
        switch (side) {
          case 0: push({0.0, f, -mid}); break;
          case 1: push({0.0, mid, f}); break;
          case 2: push({0.0, -f, mid}); break;
          default: push({0.0, -mid, -f}); break;
        }
      }
    }
  }
  std::vector<std::size_t> all(s.gaussians.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  s.objects["gate"] = std::move(all);
  return s;
}

}  // namespace gatesplat
