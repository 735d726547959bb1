// Copyright Contributors to the gatesplat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gatesplat/scene.hpp"

#include <cctype>
#include <span>
#include <string>

namespace gatesplat {

/// Pinhole intrinsics. Pixel (u, v) has its center at image coordinate (u, v).
struct CameraIntrinsics {
  double fx = 100.0;
  double fy = 100.0;
  double cx = 80.0;
  double cy = 60.0;
  int width = 160;
  int height = 120;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw ValidationError("intrinsics: focal lengths must be > 0");
    if (width <= 0 || height <= 0) throw ValidationError("intrinsics: image size must be positive");
    if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height))
      throw ValidationError("intrinsics: principal point outside the image");
  }

  /// Default desk-scale camera: 160x120 with a 77 degree horizontal field of view.
  static CameraIntrinsics desk() { return {}; }
};

/// World-to-camera transform. Camera frame: +z forward, +x right, +y down.
using CameraPose = RigidTransform;

/// Row-major 8-bit image; channels is 3 (RGB) or 1 (mask, values {0,255}).
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> data;

  Image() = default;
  Image(int w, int h, int c, std::uint8_t fill = 0)
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  std::uint8_t& at(int u, int v, int ch = 0) {
    return data[(static_cast<std::size_t>(v) * width + u) * channels + ch];
  }
  std::uint8_t at(int u, int v, int ch = 0) const {
    return data[(static_cast<std::size_t>(v) * width + u) * channels + ch];
  }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

  friend bool operator==(const Image&, const Image&) = default;
};

using BinaryMask = Image;

inline BinaryMask make_mask(int width, int height) { return Image(width, height, 1, 0); }

namespace pnm_detail {

inline std::vector<std::uint8_t> encode(const Image& img, const char* magic, int channels) {
  if (img.channels != channels) throw ParameterError(std::string(magic) + ": wrong channel count");
  const std::string header =
      std::string(magic) + "\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.data.begin(), img.data.end());
  return out;
}

inline Image decode(std::span<const std::uint8_t> bytes, const char* magic, int channels) {
  std::size_t pos = 0;
  const auto skip_ws = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  const auto token = [&]() {
    skip_ws();
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t += static_cast<char>(bytes[pos++]);
    if (t.empty()) throw ParseError(std::string(magic) + ": truncated header");
    return t;
  };
  if (token() != magic) throw ParseError(std::string("expected ") + magic + " image");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    maxval = std::stoi(token());
  } catch (const std::logic_error&) {
    throw ParseError(std::string(magic) + ": malformed header");
  }
  if (w <= 0 || h <= 0 || maxval != 255) throw ParseError(std::string(magic) + ": unsupported size or maxval");
  ++pos;  // single whitespace byte before the raster
  Image img(w, h, channels);
  if (bytes.size() < pos + img.data.size()) throw ParseError(std::string(magic) + ": truncated raster");
  std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(pos), img.data.size(), img.data.begin());
  return img;
}

}  // namespace pnm_detail

/// Binary PPM (P6).
inline std::vector<std::uint8_t> encode_ppm(const Image& rgb) { return pnm_detail::encode(rgb, "P6", 3); }
/// Binary PGM (P5).
inline std::vector<std::uint8_t> encode_pgm(const BinaryMask& mask) { return pnm_detail::encode(mask, "P5", 1); }
inline Image decode_ppm(std::span<const std::uint8_t> bytes) { return pnm_detail::decode(bytes, "P6", 3); }
inline BinaryMask decode_pgm(std::span<const std::uint8_t> bytes) { return pnm_detail::decode(bytes, "P5", 1); }

}  // namespace gatesplat
