#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "edngtm/error.hpp"
#include "edngtm/tensor.hpp"

namespace edngtm {

/// H x W x C raster (C = 1 or 3), interleaved row-major, values nominally in [0, 1].
class ImageBuf {
 public:
  ImageBuf() = default;
  ImageBuf(int height, int width, int channels, float fill = 0.0f);
  ImageBuf(int height, int width, int channels, std::vector<float> data);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(height_) * width_; }
  bool empty() const noexcept { return data_.empty(); }

  float& at(int y, int x, int c = 0) { return data_[index(y, x, c)]; }
  float at(int y, int x, int c = 0) const { return data_[index(y, x, c)]; }

  std::span<float> values() noexcept { return data_; }
  std::span<const float> values() const noexcept { return data_; }

  bool same_extent(const ImageBuf& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  friend bool operator==(const ImageBuf&, const ImageBuf&) = default;

 private:
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

/// Single-channel real raster; the tag keeps transmission and depth from mixing.
template <typename Tag>
class ScalarField {
 public:
  ScalarField() = default;
  ScalarField(int height, int width, float fill = 0.0f) : height_(height), width_(width) {
    require(height >= 1 && width >= 1, "raster extents must be >= 1, got ", height, " x ", width);
    data_.assign(static_cast<std::size_t>(height) * width, fill);
  }
  ScalarField(int height, int width, std::vector<float> data)
      : height_(height), width_(width), data_(std::move(data)) {
    require(height >= 1 && width >= 1, "raster extents must be >= 1, got ", height, " x ", width);
    require(data_.size() == static_cast<std::size_t>(height) * width, "raster data length mismatch");
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  float& at(int y, int x) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  float at(int y, int x) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  std::span<float> values() noexcept { return data_; }
  std::span<const float> values() const noexcept { return data_; }

  friend bool operator==(const ScalarField&, const ScalarField&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<float> data_;
};

struct TransmissionTag {};
struct DepthTag {};

/// Per-pixel fraction of scene radiance reaching the camera.
using TransmissionMap = ScalarField<TransmissionTag>;
/// Relative scene depth, >= 0.
using DepthMap = ScalarField<DepthTag>;

/// Global atmospheric light, one value per RGB channel.
using Airlight = std::array<float, 3>;

struct Rect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
};

template <typename Tag>
ImageBuf to_image(const ScalarField<Tag>& field) {
  return ImageBuf(field.height(), field.width(), 1, std::vector<float>(field.values().begin(), field.values().end()));
}

template <typename Field>
Field to_field(const ImageBuf& image) {
  require(image.channels() == 1, "expected a single-channel image, got ", image.channels(), " channels");
  return Field(image.height(), image.width(), std::vector<float>(image.values().begin(), image.values().end()));
}

/// BT.601 luma for 3-channel input; copy for 1-channel input.
ImageBuf grayscale(const ImageBuf& image);

ImageBuf flip_horizontal(const ImageBuf& image);

ImageBuf crop(const ImageBuf& image, const Rect& rect);

/// Bilinear resampling with half-pixel centers and edge clamping.
ImageBuf resize_bilinear(const ImageBuf& image, int height, int width);

/// Mirror-pads on the bottom and right edges (edge pixel not repeated).
ImageBuf reflect_pad(const ImageBuf& image, int bottom, int right);

ImageBuf clamp01(ImageBuf image);

/// Stacks equally sized images into an N x C x H x W tensor.
Tensor<float> to_tensor(std::span<const ImageBuf* const> images);
Tensor<float> to_tensor(const ImageBuf& image);

/// Extracts sample `n` of an N x C x H x W tensor as an image.
ImageBuf to_image(const Tensor<float>& tensor, int n = 0);

}  // namespace edngtm
