#include "edngtm/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>

#include "edngtm/checkpoint.hpp"
#include "edngtm/error.hpp"

namespace edngtm::io {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open '" + path + "'");
  return f;
}

struct Decoded {
  int width = 0;
  int height = 0;
  int channels = 0;  // after palette expansion
  int bit_depth = 0;
  bool alpha = false;
  std::vector<std::uint8_t> rows;  // packed, big-endian for 16-bit
};

[[noreturn]] void png_fail(png_structp png, png_const_charp msg) {
  auto* text = static_cast<std::string*>(png_get_error_ptr(png));
  if (text) *text = msg;
  png_longjmp(png, 1);
}

void png_warn(png_structp, png_const_charp) {}

Decoded decode_png(const std::string& path) {
  FilePtr file = open_file(path, "rb");
  std::uint8_t sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw IoError("'" + path + "' is not a PNG file");

  std::string error;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, png_fail, png_warn);
  if (!png) throw IoError("libpng: cannot allocate read struct");
  png_infop info = png_create_info_struct(png);
  Decoded out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("failed to decode '" + path + "': " + error);
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) {
    png_set_palette_to_rgb(png);
    out.bit_depth = 8;
  }
  if (color == PNG_COLOR_TYPE_GRAY && out.bit_depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
    out.bit_depth = 8;
  }
  out.alpha = (color & PNG_COLOR_MASK_ALPHA) != 0 || png_get_valid(png, info, PNG_INFO_tRNS);
  png_read_update_info(png, info);
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = png_get_channels(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  out.rows.resize(rowbytes * out.height);
  std::vector<png_bytep> pointers(out.height);
  for (int y = 0; y < out.height; ++y) pointers[y] = out.rows.data() + rowbytes * y;
  png_read_image(png, pointers.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

void encode_png(const std::string& path, int width, int height, int channels, int bit_depth,
                const std::vector<std::uint8_t>& rows) {
  FilePtr file = open_file(path, "wb");
  std::string error;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, png_fail, png_warn);
  if (!png) throw IoError("libpng: cannot allocate write struct");
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed to encode '" + path + "': " + error);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t rowbytes = static_cast<std::size_t>(width) * channels * (bit_depth / 8);
  for (int y = 0; y < height; ++y)
    png_write_row(png, const_cast<png_bytep>(rows.data() + rowbytes * y));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

ImageBuf load_image(const std::string& path) {
  Decoded d = decode_png(path);
  if (d.bit_depth != 8)
    throw IoError("'" + path + "': unsupported bit depth " + std::to_string(d.bit_depth) +
                  " (images must be 8-bit; 16-bit PNGs are accepted only as depth maps)");
  if (d.alpha || (d.channels != 1 && d.channels != 3))
    throw IoError("'" + path + "': unsupported channel layout (" + std::to_string(d.channels) +
                  " channels" + (d.alpha ? ", with alpha" : "") + "); expected grayscale or RGB");
  ImageBuf image(d.height, d.width, d.channels);
  for (std::size_t i = 0; i < d.rows.size(); ++i) image.values()[i] = static_cast<float>(d.rows[i]) / 255.0f;
  return image;
}

void save_image(const ImageBuf& image, const std::string& path) {
  require(!image.empty(), "save_image: empty image");
  std::vector<std::uint8_t> rows(image.values().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const float v = std::clamp(image.values()[i], 0.0f, 1.0f);
    rows[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
  }
  encode_png(path, image.width(), image.height(), image.channels(), 8, rows);
}

GrayPng load_gray_png(const std::string& path) {
  Decoded d = decode_png(path);
  if (d.channels != 1 || d.alpha)
    throw IoError("'" + path + "': depth PNGs must be single-channel grayscale without alpha");
  GrayPng out{d.width, d.height, d.bit_depth, {}};
  const std::size_t n = static_cast<std::size_t>(d.width) * d.height;
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    out.samples[i] = d.bit_depth == 16 ? static_cast<std::uint16_t>((d.rows[2 * i] << 8) | d.rows[2 * i + 1])
                                       : d.rows[i];
  return out;
}

void save_gray16_png(const std::string& path, int width, int height, const std::vector<std::uint16_t>& samples) {
  require(samples.size() == static_cast<std::size_t>(width) * height, "save_gray16_png: sample count mismatch");
  std::vector<std::uint8_t> rows(samples.size() * 2);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    rows[2 * i] = static_cast<std::uint8_t>(samples[i] >> 8);
    rows[2 * i + 1] = static_cast<std::uint8_t>(samples[i] & 0xFF);
  }
  encode_png(path, width, height, 1, 16, rows);
}

DepthMap decode_depth_raw(const std::vector<std::uint8_t>& bytes) {
  static_assert(std::endian::native == std::endian::little, "depth raster I/O assumes a little-endian host");
  if (bytes.size() < 16) throw ParseError("depth raster truncated: header needs 16 bytes", bytes.size());
  if (std::memcmp(bytes.data(), "DPTH", 4) != 0) throw ParseError("not a DPTH depth raster", 0);
  std::uint32_t header[3];
  std::memcpy(header, bytes.data() + 4, sizeof header);
  const std::uint32_t width = header[0], height = header[1];
  if (width == 0 || height == 0) throw ParseError("depth raster has zero extent", 4);
  const std::size_t expected = 16 + static_cast<std::size_t>(width) * height * sizeof(float);
  if (bytes.size() != expected)
    throw ParseError("depth raster size " + std::to_string(bytes.size()) + " does not match " + std::to_string(width) +
                         "x" + std::to_string(height) + " header",
                     std::min(bytes.size(), expected));
  std::vector<float> values(static_cast<std::size_t>(width) * height);
  std::memcpy(values.data(), bytes.data() + 16, values.size() * sizeof(float));
  return DepthMap(static_cast<int>(height), static_cast<int>(width), std::move(values));
}

DepthMap load_depth(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), "DPTH", 4) == 0) return decode_depth_raw(bytes);
  const GrayPng png = load_gray_png(path);
  const float scale = 1.0f / static_cast<float>((1 << png.bit_depth) - 1);
  std::vector<float> values(png.samples.size());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = png.samples[i] * scale;
  return DepthMap(png.height, png.width, std::move(values));
}

void save_depth_raw(const DepthMap& depth, const std::string& path) {
  std::vector<std::uint8_t> bytes{'D', 'P', 'T', 'H'};
  const std::uint32_t header[3] = {static_cast<std::uint32_t>(depth.width()),
                                   static_cast<std::uint32_t>(depth.height()), 0};
  const auto* h = reinterpret_cast<const std::uint8_t*>(header);
  bytes.insert(bytes.end(), h, h + sizeof header);
  const auto* v = reinterpret_cast<const std::uint8_t*>(depth.values().data());
  bytes.insert(bytes.end(), v, v + depth.size() * sizeof(float));
  write_file_bytes(path, bytes);
}

}  // namespace edngtm::io
