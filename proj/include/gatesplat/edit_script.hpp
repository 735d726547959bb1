// Copyright Contributors to the gatesplat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

// JSON edit scripts: {"ops": [{"op": ..., "select": ..., params}, ...]}
// applied in order. Selections are {"object": id} or {"box": {"min", "max"}};
// "add" takes {"source": path | {"gate": {...}}, "pose": {...}, "name"?}.

#include "gatesplat/edit.hpp"
#include "gatesplat/ply_io.hpp"
#include "gatesplat/track.hpp"

#include <filesystem>

namespace gatesplat {

struct EditLogEntry {
  std::size_t index = 0;
  std::string op;
  EditResult result;
};

namespace script_detail {

inline Vec3 vec3(const nlohmann::json& j, const std::string& what) {
  if (j.is_number()) return Vec3::Constant(j.get<double>());
  if (!j.is_array() || j.size() != 3) throw ConfigError("edit script: '" + what + "' must be [x,y,z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline Quat quat(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 4) throw ConfigError("edit script: quaternion must be [w,x,y,z]");
  return Quat(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>());
}

inline Selection selection(const nlohmann::json& j) {
  if (j.contains("object")) return ObjectRef{j.at("object").get<std::string>()};
  if (j.contains("box")) return Box3{vec3(j.at("box").at("min"), "box.min"), vec3(j.at("box").at("max"), "box.max")};
  throw ConfigError("edit script: selection needs 'object' or 'box'");
}

inline Selection everything() {
  const double inf = std::numeric_limits<double>::infinity();
  return Box3{Vec3::Constant(-inf), Vec3::Constant(inf)};
}

inline RigidTransform pose(const nlohmann::json& j) {
  RigidTransform t;
  if (j.contains("translation")) t.translation = vec3(j.at("translation"), "pose.translation");
  if (j.contains("rotation")) t.rotation = quat(j.at("rotation")).normalized();
  if (j.contains("yaw")) t.rotation = Quat(Eigen::AngleAxisd(j.at("yaw").get<double>(), Vec3::UnitZ()));
  t.scale = j.value("scale", 1.0);
  return t;
}

inline GaussianScene source_scene(const nlohmann::json& j, const std::filesystem::path& base) {
  if (j.is_string()) return load_scene_file(base / j.get<std::string>());
  if (j.contains("gate")) {
    const auto& g = j.at("gate");
    const std::string shape = g.value("shape", std::string("square"));
    Gate gate = shape == "circular" ? circular_gate({}) : square_gate({});
    gate.inner = g.value("inner", gate.inner);
    gate.ring_width = g.value("ring_width", gate.ring_width);
    return make_gate_splats(gate);
  }
  throw ConfigError("edit script: add source must be a PLY path or {\"gate\": {...}}");
}

}  // namespace script_detail

/// Applies every op in order. Relative paths resolve against `base`.
inline std::vector<EditLogEntry> apply_edit_script(GaussianScene& scene, const nlohmann::json& script,
                                                   const std::filesystem::path& base = ".") {
  using namespace script_detail;
  const nlohmann::json& ops = script.is_array() ? script : script.at("ops");
  std::vector<EditLogEntry> log;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    const auto& j = ops[i];
    EditLogEntry e;
    e.index = i;
    try {
      e.op = j.at("op").get<std::string>();
      if (e.op == "translate") {
        e.result = translate(scene, selection(j.at("select")), vec3(j.at("delta"), "delta"));
      } else if (e.op == "rotate") {
        const Selection sel = selection(j.at("select"));
        if (j.contains("quaternion"))
          e.result = rotate(scene, sel, quat(j.at("quaternion")));
        else
          e.result = rotate(scene, sel, j.at("angle").get<double>(), vec3(j.value("axis", nlohmann::json::array({0, 0, 1})), "axis"));
      } else if (e.op == "scale") {
        e.result = scale(scene, selection(j.at("select")), vec3(j.at("factor"), "factor"));
      } else if (e.op == "duplicate") {
        e.result = duplicate(scene, selection(j.at("select")));
      } else if (e.op == "delete") {
        e.result = erase(scene, selection(j.at("select")));
      } else if (e.op == "lighting") {
        const std::string mode = j.value("mode", std::string("multiply"));
        if (mode != "multiply" && mode != "replace") throw ConfigError("edit script: lighting mode '" + mode + "'");
        e.result = lighting(scene, selection(j.at("select")),
                            mode == "multiply" ? LightingMode::multiply : LightingMode::replace, vec3(j.at("rgb"), "rgb"));
      } else if (e.op == "add") {
        const GaussianScene src = source_scene(j.at("source"), base);
        const Selection sel = j.contains("select") ? selection(j.at("select")) : everything();
        std::optional<std::string> name;
        if (j.contains("name")) name = j.at("name").get<std::string>();
        if (!name && !j.contains("select") && j.at("source").is_object()) name = "gate";
        e.result = add(scene, src, sel, pose(j.value("pose", nlohmann::json::object())), name);
      } else {
        throw ConfigError("edit script: unknown op '" + e.op + "'");
      }
    } catch (const nlohmann::json::exception& ex) {
      throw ConfigError("edit script op " + std::to_string(i) + ": " + ex.what());
    }
    log.push_back(std::move(e));
  }
  return log;
}

}  // namespace gatesplat
