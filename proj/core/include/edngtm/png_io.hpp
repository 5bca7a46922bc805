#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "edngtm/image.hpp"

namespace edngtm::io {

/// Loads an 8-bit grayscale or RGB PNG (palette files expand to RGB) as v / 255.
/// 16-bit files and files with alpha are rejected.
ImageBuf load_image(const std::string& path);

/// Writes 8-bit grayscale or RGB, round(v * 255) clamped to [0, 255].
void save_image(const ImageBuf& image, const std::string& path);

/// Raw 16-bit grayscale PNG contents, for depth ingestion.
struct GrayPng {
  int width = 0;
  int height = 0;
  int bit_depth = 8;
  std::vector<std::uint16_t> samples;
};

GrayPng load_gray_png(const std::string& path);
void save_gray16_png(const std::string& path, int width, int height, const std::vector<std::uint16_t>& samples);

/// Depth map from either a "DPTH" raster or an 8/16-bit grayscale PNG (larger = farther).
/// PNG codes are scaled by 1 / (2^bits - 1).
DepthMap load_depth(const std::string& path);

/// "DPTH" | u32 width | u32 height | u32 reserved (0) | width*height little-endian f32.
void save_depth_raw(const DepthMap& depth, const std::string& path);
DepthMap decode_depth_raw(const std::vector<std::uint8_t>& bytes);

}  // namespace edngtm::io
