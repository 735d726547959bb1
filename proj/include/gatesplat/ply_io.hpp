// Copyright Contributors to the gatesplat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

// PLY ingestion and export for gaussian scenes.
//
// Two vertex layouts are understood:
//   native  x y z scale_0..2 rot_0..3 (wxyz) opacity red green blue, all in
//           linear units (scale in meters, opacity and color in [0,1]).
//   3dgs    the common training export: log-scales, logit opacity and
//           spherical-harmonic DC color terms f_dc_0..2. Higher SH bands and
//           normals are ignored.
// A file is treated as 3dgs when its vertex element has f_dc_0.
//
// save_scene always writes the native layout with float64 properties, which
// is lossless for every stored field.

#include "gatesplat/scene.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <unordered_map>

namespace gatesplat {

/// Zeroth-order real spherical harmonic, 1 / (2 sqrt(pi)).
constexpr double kShC0 = 0.28209479177387814;

enum class PlyFormat { binary_little_endian, ascii };

namespace ply_detail {

enum class ScalarType { i8, u8, i16, u16, i32, u32, f32, f64 };

inline std::optional<ScalarType> parse_type(std::string_view t) {
  if (t == "char" || t == "int8") return ScalarType::i8;
  if (t == "uchar" || t == "uint8") return ScalarType::u8;
  if (t == "short" || t == "int16") return ScalarType::i16;
  if (t == "ushort" || t == "uint16") return ScalarType::u16;
  if (t == "int" || t == "int32") return ScalarType::i32;
  if (t == "uint" || t == "uint32") return ScalarType::u32;
  if (t == "float" || t == "float32") return ScalarType::f32;
  if (t == "double" || t == "float64") return ScalarType::f64;
  return std::nullopt;
}

inline std::size_t type_size(ScalarType t) {
  switch (t) {
    case ScalarType::i8:
    case ScalarType::u8: return 1;
    case ScalarType::i16:
    case ScalarType::u16: return 2;
    case ScalarType::i32:
    case ScalarType::u32:
    case ScalarType::f32: return 4;
    case ScalarType::f64: return 8;
  }
  return 0;
}

struct Property {
  std::string name;
  ScalarType type = ScalarType::f32;
  bool is_list = false;
  ScalarType count_type = ScalarType::u8;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> properties;
};

struct Header {
  PlyFormat format = PlyFormat::ascii;
  std::vector<Element> elements;
  std::size_t body_offset = 0;
};

template <typename T>
T load_le(const std::uint8_t* p) {
  std::array<std::uint8_t, sizeof(T)> b{};
  std::memcpy(b.data(), p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b.begin(), b.end());
  T v;
  std::memcpy(&v, b.data(), sizeof(T));
  return v;
}

template <typename T>
void store_le(std::vector<std::uint8_t>& out, T v) {
  std::array<std::uint8_t, sizeof(T)> b{};
  std::memcpy(b.data(), &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b.begin(), b.end());
  out.insert(out.end(), b.begin(), b.end());
}

inline double decode(ScalarType t, const std::uint8_t* p) {
  switch (t) {
    case ScalarType::i8: return load_le<std::int8_t>(p);
    case ScalarType::u8: return load_le<std::uint8_t>(p);
    case ScalarType::i16: return load_le<std::int16_t>(p);
    case ScalarType::u16: return load_le<std::uint16_t>(p);
    case ScalarType::i32: return load_le<std::int32_t>(p);
    case ScalarType::u32: return load_le<std::uint32_t>(p);
    case ScalarType::f32: return load_le<float>(p);
    case ScalarType::f64: return load_le<double>(p);
  }
  return 0.0;
}

inline Header parse_header(std::span<const std::uint8_t> bytes) {
  const std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  Header h;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool saw_format = false;
  auto next_line = [&]() -> std::optional<std::string> {
    if (pos >= text.size()) return std::nullopt;
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string line(text.substr(pos, nl - pos));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pos = nl + 1;
    ++line_no;
    return line;
  };
  auto first = next_line();
  if (!first || *first != "ply") throw ParseError("ply header: missing 'ply' magic");
  while (true) {
    auto line = next_line();
    if (!line) throw ParseError("ply header: missing 'end_header'");
    std::istringstream ls(*line);
    std::string kw;
    ls >> kw;
    const auto bad = [&](const std::string& what) {
      return ParseError("ply header line " + std::to_string(line_no) + ": " + what);
    };
    if (kw.empty() || kw == "comment" || kw == "obj_info") continue;
    if (kw == "end_header") break;
    if (kw == "format") {
      std::string fmt, ver;
      ls >> fmt >> ver;
      if (fmt == "ascii")
        h.format = PlyFormat::ascii;
      else if (fmt == "binary_little_endian")
        h.format = PlyFormat::binary_little_endian;
      else
        throw bad("unsupported format '" + fmt + "'");
      saw_format = true;
    } else if (kw == "element") {
      Element e;
      long long count = -1;
      ls >> e.name >> count;
      if (e.name.empty() || count < 0 || ls.fail()) throw bad("malformed element declaration '" + *line + "'");
      e.count = static_cast<std::size_t>(count);
      h.elements.push_back(std::move(e));
    } else if (kw == "property") {
      if (h.elements.empty()) throw bad("property declared before any element");
      auto& elem = h.elements.back();
      Property p;
      std::string t;
      ls >> t;
      if (t == "list") {
        std::string ct, it;
        ls >> ct >> it >> p.name;
        auto c = parse_type(ct);
        auto i = parse_type(it);
        if (!c || !i || p.name.empty())
          throw bad("malformed list property in element '" + elem.name + "'");
        p.is_list = true;
        p.count_type = *c;
        p.type = *i;
      } else {
        ls >> p.name;
        auto ty = parse_type(t);
        if (!ty || p.name.empty())
          throw bad("unknown property type '" + t + "' in element '" + elem.name + "'");
        p.type = *ty;
      }
      elem.properties.push_back(std::move(p));
    } else {
      throw bad("unknown keyword '" + kw + "'");
    }
  }
  if (!saw_format) throw ParseError("ply header: missing 'format' line");
  h.body_offset = pos;
  return h;
}

/// Reads every element; returns the scalar rows of element `want`.
inline std::vector<std::vector<double>> read_body(std::span<const std::uint8_t> bytes, const Header& h,
                                                  const std::string& want) {
  std::vector<std::vector<double>> rows;
  if (h.format == PlyFormat::binary_little_endian) {
    std::size_t off = h.body_offset;
    const auto need = [&](std::size_t n, const std::string& elem) {
      if (off + n > bytes.size()) throw ParseError("ply body: truncated data in element '" + elem + "'");
    };
    for (const auto& e : h.elements) {
      const bool keep = e.name == want;
      if (keep) rows.reserve(e.count);
      for (std::size_t r = 0; r < e.count; ++r) {
        std::vector<double> row;
        if (keep) row.reserve(e.properties.size());
        for (const auto& p : e.properties) {
          if (p.is_list) {
            need(type_size(p.count_type), e.name);
            const auto n = static_cast<std::size_t>(decode(p.count_type, bytes.data() + off));
            off += type_size(p.count_type);
            need(n * type_size(p.type), e.name);
            off += n * type_size(p.type);
            if (keep) row.push_back(static_cast<double>(n));
          } else {
            need(type_size(p.type), e.name);
            if (keep) row.push_back(decode(p.type, bytes.data() + off));
            off += type_size(p.type);
          }
        }
        if (keep) rows.push_back(std::move(row));
      }
    }
    return rows;
  }
  const std::string body(reinterpret_cast<const char*>(bytes.data()) + h.body_offset, bytes.size() - h.body_offset);
  std::istringstream in(body);
  in.imbue(std::locale::classic());
  for (const auto& e : h.elements) {
    const bool keep = e.name == want;
    for (std::size_t r = 0; r < e.count; ++r) {
      std::vector<double> row;
      for (const auto& p : e.properties) {
        std::string tok;
        if (!(in >> tok)) throw ParseError("ply body: truncated data in element '" + e.name + "'");
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ptr != tok.data() + tok.size()) {
          // from_chars rejects "nan"/"inf" spellings some writers use.
          if (tok == "nan" || tok == "NaN" || tok == "-nan")
            v = std::numeric_limits<double>::quiet_NaN();
          else
            throw ParseError("ply body: bad number '" + tok + "' in element '" + e.name + "'");
        } else if (ec != std::errc{}) {
          throw ParseError("ply body: number out of range in element '" + e.name + "'");
        }
        if (p.is_list) {
          for (std::size_t k = 0; k < static_cast<std::size_t>(v); ++k)
            if (!(in >> tok)) throw ParseError("ply body: truncated list in element '" + e.name + "'");
        }
        if (keep) row.push_back(v);
      }
      if (keep) rows.push_back(std::move(row));
    }
  }
  return rows;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace ply_detail

/// Parses a PLY byte buffer into a validated scene (objects left empty).
inline GaussianScene load_scene(std::span<const std::uint8_t> bytes) {
  using namespace ply_detail;
  const Header h = parse_header(bytes);
  const auto vit = std::find_if(h.elements.begin(), h.elements.end(), [](const Element& e) { return e.name == "vertex"; });
  if (vit == h.elements.end()) throw ParseError("ply header: missing element 'vertex'");

  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < vit->properties.size(); ++i) {
    if (vit->properties[i].is_list) throw ParseError("ply header: list property '" + vit->properties[i].name + "' in element 'vertex'");
    col[vit->properties[i].name] = i;
  }
  const bool is_3dgs = col.contains("f_dc_0");
  const auto require = [&](const std::string& name) {
    auto it = col.find(name);
    if (it == col.end()) throw ParseError("ply header: element 'vertex' lacks property '" + name + "'");
    return it->second;
  };
  const std::array<std::size_t, 3> ci_pos{require("x"), require("y"), require("z")};
  const std::array<std::size_t, 3> ci_scale{require("scale_0"), require("scale_1"), require("scale_2")};
  const std::array<std::size_t, 4> ci_rot{require("rot_0"), require("rot_1"), require("rot_2"), require("rot_3")};
  const std::size_t ci_opacity = require("opacity");
  std::array<std::size_t, 3> ci_color{};
  double color_div = 1.0;
  if (is_3dgs) {
    ci_color = {require("f_dc_0"), require("f_dc_1"), require("f_dc_2")};
  } else {
    ci_color = {require("red"), require("green"), require("blue")};
    if (vit->properties[ci_color[0]].type == ScalarType::u8) color_div = 255.0;
  }

  const auto rows = read_body(bytes, h, "vertex");
  GaussianScene scene;
  scene.gaussians.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    auto& g = scene.gaussians[i];
    g.mean = Vec3(r[ci_pos[0]], r[ci_pos[1]], r[ci_pos[2]]);
    g.rotation = Quat(r[ci_rot[0]], r[ci_rot[1]], r[ci_rot[2]], r[ci_rot[3]]);
    const Vec3 s(r[ci_scale[0]], r[ci_scale[1]], r[ci_scale[2]]);
    const Vec3 c(r[ci_color[0]], r[ci_color[1]], r[ci_color[2]]);
    if (is_3dgs) {
      if (!g.rotation.coeffs().allFinite() || !s.allFinite() || !c.allFinite() || !std::isfinite(r[ci_opacity]))
        throw ValidationError("gaussian " + std::to_string(i) + ": non-finite field");
      const double n = g.rotation.norm();
      if (!(n > 0.0)) throw ValidationError("gaussian " + std::to_string(i) + ": zero quaternion");
      g.rotation.coeffs() /= n;
      g.scale = s.array().exp();
      g.opacity = sigmoid(r[ci_opacity]);
      g.color = (0.5 + kShC0 * c.array()).cwiseMax(0.0).cwiseMin(1.0);
    } else {
      g.scale = s;
      g.opacity = r[ci_opacity];
      g.color = c / color_div;
    }
    validate_gaussian(g, i);
  }
  return scene;
}

inline GaussianScene load_scene(const std::string& bytes) {
  return load_scene(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
}

/// Writes the native layout. Objects are not part of the PLY; see the sidecar helpers.
inline std::vector<std::uint8_t> save_scene(const GaussianScene& scene,
                                            PlyFormat format = PlyFormat::binary_little_endian) {
  static constexpr std::array<const char*, 14> kNames = {"x",     "y",     "z",     "scale_0", "scale_1",
                                                         "scale_2", "rot_0", "rot_1", "rot_2",   "rot_3",
                                                         "opacity", "red",   "green", "blue"};
  std::string header = "ply\n";
  header += format == PlyFormat::ascii ? "format ascii 1.0\n" : "format binary_little_endian 1.0\n";
  header += "comment gatesplat native gaussian layout\n";
  header += "element vertex " + std::to_string(scene.gaussians.size()) + "\n";
  for (const char* n : kNames) header += std::string("property double ") + n + "\n";
  header += "end_header\n";

  std::vector<std::uint8_t> out(header.begin(), header.end());
  for (const auto& g : scene.gaussians) {
    const std::array<double, 14> v = {g.mean.x(),       g.mean.y(),       g.mean.z(),       g.scale.x(),
                                      g.scale.y(),      g.scale.z(),      g.rotation.w(),   g.rotation.x(),
                                      g.rotation.y(),   g.rotation.z(),   g.opacity,        g.color.x(),
                                      g.color.y(),      g.color.z()};
    if (format == PlyFormat::binary_little_endian) {
      for (double d : v) ply_detail::store_le(out, d);
    } else {
      std::string line;
      for (std::size_t k = 0; k < v.size(); ++k) {
        if (k) line += ' ';
        line += format_double(v[k]);
      }
      line += '\n';
      out.insert(out.end(), line.begin(), line.end());
    }
  }
  return out;
}

/// Sidecar path for object labels: scene.ply -> scene.objects.json
inline std::filesystem::path objects_sidecar_path(const std::filesystem::path& ply) {
  auto p = ply;
  p.replace_extension(".objects.json");
  return p;
}

inline nlohmann::json objects_to_json(const GaussianScene& scene) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [id, idx] : scene.objects) j[id] = idx;
  return j;
}

inline void objects_from_json(GaussianScene& scene, const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("object sidecar: expected a JSON object");
  scene.objects.clear();
  for (const auto& [id, arr] : j.items()) {
    if (!arr.is_array()) throw ParseError("object sidecar: '" + id + "' is not an index array");
    std::vector<std::size_t> idx = arr.get<std::vector<std::size_t>>();
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    scene.objects[id] = std::move(idx);
  }
  scene.validate();
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

/// Loads a PLY and, when present, its object sidecar.
inline GaussianScene load_scene_file(const std::filesystem::path& path) {
  GaussianScene scene = load_scene(read_file_bytes(path));
  const auto side = objects_sidecar_path(path);
  if (std::filesystem::exists(side)) objects_from_json(scene, nlohmann::json::parse(read_file_bytes(side)));
  return scene;
}

inline void save_scene_file(const std::filesystem::path& path, const GaussianScene& scene,
                            PlyFormat format = PlyFormat::binary_little_endian) {
  write_file_bytes(path, save_scene(scene, format));
  write_text_file(objects_sidecar_path(path), objects_to_json(scene).dump(2) + "\n");
}

}  // namespace gatesplat
