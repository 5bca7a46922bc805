#include "edngtm/image.hpp"

#include <algorithm>
#include <cmath>

namespace edngtm {

ImageBuf::ImageBuf(int height, int width, int channels, float fill)
    : height_(height), width_(width), channels_(channels) {
  require(height >= 1 && width >= 1, "image extents must be >= 1, got ", height, " x ", width);
  require(channels == 1 || channels == 3, "image must have 1 or 3 channels, got ", channels);
  data_.assign(pixel_count() * channels, fill);
}

ImageBuf::ImageBuf(int height, int width, int channels, std::vector<float> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  require(height >= 1 && width >= 1, "image extents must be >= 1, got ", height, " x ", width);
  require(channels == 1 || channels == 3, "image must have 1 or 3 channels, got ", channels);
  require(data_.size() == pixel_count() * channels, "image data length ", data_.size(), " does not match ", height,
          " x ", width, " x ", channels);
}

ImageBuf grayscale(const ImageBuf& image) {
  if (image.channels() == 1) return image;
  ImageBuf out(image.height(), image.width(), 1);
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x)
      out.at(y, x) = 0.299f * image.at(y, x, 0) + 0.587f * image.at(y, x, 1) + 0.114f * image.at(y, x, 2);
  return out;
}

ImageBuf flip_horizontal(const ImageBuf& image) {
  ImageBuf out(image.height(), image.width(), image.channels());
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x)
      for (int c = 0; c < image.channels(); ++c) out.at(y, image.width() - 1 - x, c) = image.at(y, x, c);
  return out;
}

ImageBuf crop(const ImageBuf& image, const Rect& rect) {
  require(rect.width >= 1 && rect.height >= 1 && rect.x >= 0 && rect.y >= 0 &&
              rect.x + rect.width <= image.width() && rect.y + rect.height <= image.height(),
          "crop rectangle (", rect.x, ",", rect.y, " ", rect.width, "x", rect.height, ") outside ", image.width(), "x",
          image.height(), " image");
  ImageBuf out(rect.height, rect.width, image.channels());
  for (int y = 0; y < rect.height; ++y)
    for (int x = 0; x < rect.width; ++x)
      for (int c = 0; c < image.channels(); ++c) out.at(y, x, c) = image.at(rect.y + y, rect.x + x, c);
  return out;
}

ImageBuf resize_bilinear(const ImageBuf& image, int height, int width) {
  require(height >= 1 && width >= 1, "resize target must be >= 1, got ", height, " x ", width);
  if (height == image.height() && width == image.width()) return image;
  ImageBuf out(height, width, image.channels());
  const double sy = static_cast<double>(image.height()) / height;
  const double sx = static_cast<double>(image.width()) / width;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, image.height() - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, image.height() - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, image.width() - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, image.width() - 1);
      const double wx = fx - x0;
      for (int c = 0; c < image.channels(); ++c) {
        const double top = (1 - wx) * image.at(y0, x0, c) + wx * image.at(y0, x1, c);
        const double bottom = (1 - wx) * image.at(y1, x0, c) + wx * image.at(y1, x1, c);
        out.at(y, x, c) = static_cast<float>((1 - wy) * top + wy * bottom);
      }
    }
  }
  return out;
}

namespace {

int mirror(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace

ImageBuf reflect_pad(const ImageBuf& image, int bottom, int right) {
  require(bottom >= 0 && right >= 0, "reflect_pad: padding must be non-negative");
  ImageBuf out(image.height() + bottom, image.width() + right, image.channels());
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x)
      for (int c = 0; c < image.channels(); ++c)
        out.at(y, x, c) = image.at(mirror(y, image.height()), mirror(x, image.width()), c);
  return out;
}

ImageBuf clamp01(ImageBuf image) {
  for (float& v : image.values()) v = std::clamp(v, 0.0f, 1.0f);
  return image;
}

Tensor<float> to_tensor(std::span<const ImageBuf* const> images) {
  require(!images.empty(), "to_tensor: need at least one image");
  const ImageBuf& first = *images.front();
  const int n = static_cast<int>(images.size()), c = first.channels(), h = first.height(), w = first.width();
  Tensor<float> out({n, c, h, w});
  for (int i = 0; i < n; ++i) {
    const ImageBuf& img = *images[static_cast<std::size_t>(i)];
    require(img.channels() == c && img.height() == h && img.width() == w, "to_tensor: images differ in shape");
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(i, ch, y, x) = img.at(y, x, ch);
  }
  return out;
}

Tensor<float> to_tensor(const ImageBuf& image) {
  const ImageBuf* one[] = {&image};
  return to_tensor(std::span<const ImageBuf* const>(one));
}

ImageBuf to_image(const Tensor<float>& tensor, int n) {
  require(tensor.rank() == 4 && n >= 0 && n < tensor.dim(0), "to_image: bad tensor/sample index");
  const int c = tensor.dim(1), h = tensor.dim(2), w = tensor.dim(3);
  ImageBuf out(h, w, c);
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at(y, x, ch) = tensor.at(n, ch, y, x);
  return out;
}

}  // namespace edngtm
