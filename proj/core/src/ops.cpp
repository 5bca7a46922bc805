#include "edngtm/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>

namespace edngtm::ops {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using StridedMap = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using ConstStridedMap = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;

// Upper bound on im2col buffer elements; larger outputs are processed in row bands.
constexpr std::size_t kMaxColumnElements = std::size_t{1} << 22;

struct ConvGeometry {
  int batch, in_channels, height, width;
  int out_channels, kernel, pad, stride;
  int out_height, out_width;

  int patch() const { return in_channels * kernel * kernel; }
  std::size_t in_plane() const { return static_cast<std::size_t>(height) * width; }
  std::size_t out_plane() const { return static_cast<std::size_t>(out_height) * out_width; }
};

template <typename T>
ConvGeometry conv_geometry(const Tensor<T>& input, const Tensor<T>& kernel, int stride) {
  require(input.rank() == 4, "conv2d: input must be N x C x H x W, got ", to_string(input.shape()));
  require(kernel.rank() == 4, "conv2d: kernel must be Co x Ci x K x K, got ", to_string(kernel.shape()));
  require(kernel.dim(2) == kernel.dim(3), "conv2d: kernel must be square, got ", to_string(kernel.shape()));
  require(kernel.dim(2) % 2 == 1, "conv2d: kernel size must be odd, got ", kernel.dim(2));
  require(stride == 1 || stride == 2, "conv2d: stride must be 1 or 2, got ", stride);
  require(kernel.dim(1) == input.dim(1), "conv2d: kernel expects ", kernel.dim(1), " input channels but input has ",
          input.dim(1), " (input ", to_string(input.shape()), ", kernel ", to_string(kernel.shape()), ")");
  ConvGeometry g{};
  g.batch = input.dim(0);
  g.in_channels = input.dim(1);
  g.height = input.dim(2);
  g.width = input.dim(3);
  g.out_channels = kernel.dim(0);
  g.kernel = kernel.dim(2);
  g.pad = g.kernel / 2;
  g.stride = stride;
  g.out_height = (g.height + 2 * g.pad - g.kernel) / stride + 1;
  g.out_width = (g.width + 2 * g.pad - g.kernel) / stride + 1;
  return g;
}

int band_rows(const ConvGeometry& g) {
  const std::size_t per_row = static_cast<std::size_t>(g.patch()) * g.out_width;
  const std::size_t rows = std::max<std::size_t>(1, kMaxColumnElements / std::max<std::size_t>(per_row, 1));
  return static_cast<int>(std::min<std::size_t>(rows, static_cast<std::size_t>(g.out_height)));
}

// Column layout: row r = (c * K + ky) * K + kx, column = (oy - row0) * Wo + ox.
template <typename T>
void im2col(const T* image, const ConvGeometry& g, int row0, int row1, T* columns) {
  const int cols = (row1 - row0) * g.out_width;
  for (int c = 0; c < g.in_channels; ++c) {
    const T* plane = image + c * g.in_plane();
    for (int ky = 0; ky < g.kernel; ++ky) {
      for (int kx = 0; kx < g.kernel; ++kx) {
        T* dst = columns + static_cast<std::size_t>((c * g.kernel + ky) * g.kernel + kx) * cols;
        for (int oy = row0; oy < row1; ++oy) {
          T* out = dst + static_cast<std::size_t>(oy - row0) * g.out_width;
          const int iy = oy * g.stride + ky - g.pad;
          if (iy < 0 || iy >= g.height) {
            std::fill(out, out + g.out_width, T(0));
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(iy) * g.width;
          if (g.stride == 1) {
            const int shift = kx - g.pad;
            // Kernels wider than the image leave whole rows of padding.
            const int lo = std::min(g.out_width, std::max(0, -shift));
            const int hi = std::min(g.out_width, g.width - shift);
            std::fill(out, out + lo, T(0));
            if (hi > lo) std::memcpy(out + lo, src + lo + shift, sizeof(T) * static_cast<std::size_t>(hi - lo));
            std::fill(out + std::max(hi, lo), out + g.out_width, T(0));
          } else {
            for (int ox = 0; ox < g.out_width; ++ox) {
              const int ix = ox * g.stride + kx - g.pad;
              out[ox] = (ix >= 0 && ix < g.width) ? src[ix] : T(0);
            }
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* columns, const ConvGeometry& g, int row0, int row1, T* image) {
  const int cols = (row1 - row0) * g.out_width;
  for (int c = 0; c < g.in_channels; ++c) {
    T* plane = image + c * g.in_plane();
    for (int ky = 0; ky < g.kernel; ++ky) {
      for (int kx = 0; kx < g.kernel; ++kx) {
        const T* src = columns + static_cast<std::size_t>((c * g.kernel + ky) * g.kernel + kx) * cols;
        for (int oy = row0; oy < row1; ++oy) {
          const int iy = oy * g.stride + ky - g.pad;
          if (iy < 0 || iy >= g.height) continue;
          const T* in = src + static_cast<std::size_t>(oy - row0) * g.out_width;
          T* dst = plane + static_cast<std::size_t>(iy) * g.width;
          for (int ox = 0; ox < g.out_width; ++ox) {
            const int ix = ox * g.stride + kx - g.pad;
            if (ix >= 0 && ix < g.width) dst[ix] += in[ox];
          }
        }
      }
    }
  }
}

bool is_pointwise(const ConvGeometry& g) { return g.kernel == 1 && g.stride == 1; }

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias, int stride) {
  const ConvGeometry g = conv_geometry(input, kernel, stride);
  require(bias.rank() == 1 && bias.dim(0) == g.out_channels, "conv2d: bias must have shape [", g.out_channels,
          "], got ", to_string(bias.shape()));
  Tensor<T> out({g.batch, g.out_channels, g.out_height, g.out_width});
  ConstMatMap<T> weights(kernel.data(), g.out_channels, g.patch());
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b(bias.data(), g.out_channels);
  const int band = band_rows(g);
  AlignedVector<T> columns;
  for (int n = 0; n < g.batch; ++n) {
    const T* image = input.data() + n * g.in_channels * g.in_plane();
    T* dst = out.data() + n * g.out_channels * g.out_plane();
    const auto plane = static_cast<Eigen::Index>(g.out_plane());
    if (is_pointwise(g)) {
      MatMap<T> y(dst, g.out_channels, plane);
      y.noalias() = weights * ConstMatMap<T>(image, g.in_channels, plane);
      y.colwise() += b;
      continue;
    }
    for (int row0 = 0; row0 < g.out_height; row0 += band) {
      const int row1 = std::min(g.out_height, row0 + band);
      const int cols = (row1 - row0) * g.out_width;
      columns.resize(static_cast<std::size_t>(g.patch()) * cols);
      im2col(image, g, row0, row1, columns.data());
      StridedMap<T> y(dst + row0 * g.out_width, g.out_channels, cols, Eigen::OuterStride<>(plane));
      y.noalias() = weights * ConstMatMap<T>(columns.data(), g.patch(), cols);
      y.colwise() += b;
    }
  }
  return out;
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& kernel, std::span<const T> grad_out,
                               int stride, bool want_input, bool want_params) {
  const ConvGeometry g = conv_geometry(input, kernel, stride);
  require(grad_out.size() == static_cast<std::size_t>(g.batch) * g.out_channels * g.out_plane(),
          "conv2d_backward: gradient size does not match output shape");
  Conv2dGrads<T> grads;
  if (want_input) grads.input = Tensor<T>(input.shape());
  if (want_params) {
    grads.kernel = Tensor<T>(kernel.shape());
    grads.bias = Tensor<T>({g.out_channels});
  }
  if (!want_input && !want_params) return grads;

  ConstMatMap<T> weights(kernel.data(), g.out_channels, g.patch());
  const auto plane = static_cast<Eigen::Index>(g.out_plane());
  const int band = band_rows(g);
  AlignedVector<T> columns;
  for (int n = 0; n < g.batch; ++n) {
    const T* image = input.data() + n * g.in_channels * g.in_plane();
    const T* gy = grad_out.data() + n * g.out_channels * g.out_plane();
    if (want_params) {
      ConstMatMap<T> gy_all(gy, g.out_channels, plane);
      Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>(grads.bias.data(), g.out_channels) += gy_all.rowwise().sum();
    }
    if (is_pointwise(g)) {
      ConstMatMap<T> gy_all(gy, g.out_channels, plane);
      ConstMatMap<T> x(image, g.in_channels, plane);
      if (want_params) MatMap<T>(grads.kernel.data(), g.out_channels, g.patch()).noalias() += gy_all * x.transpose();
      if (want_input) {
        MatMap<T>(grads.input.data() + n * g.in_channels * g.in_plane(), g.in_channels, plane).noalias() =
            weights.transpose() * gy_all;
      }
      continue;
    }
    for (int row0 = 0; row0 < g.out_height; row0 += band) {
      const int row1 = std::min(g.out_height, row0 + band);
      const int cols = (row1 - row0) * g.out_width;
      ConstStridedMap<T> gy_band(gy + row0 * g.out_width, g.out_channels, cols, Eigen::OuterStride<>(plane));
      columns.resize(static_cast<std::size_t>(g.patch()) * cols);
      if (want_params) {
        im2col(image, g, row0, row1, columns.data());
        MatMap<T>(grads.kernel.data(), g.out_channels, g.patch()).noalias() +=
            gy_band * ConstMatMap<T>(columns.data(), g.patch(), cols).transpose();
      }
      if (want_input) {
        MatMap<T>(columns.data(), g.patch(), cols).noalias() = weights.transpose() * gy_band;
        col2im_add(columns.data(), g, row0, row1, grads.input.data() + n * g.in_channels * g.in_plane());
      }
    }
  }
  return grads;
}

namespace {

struct TransposeGeometry {
  int batch, in_channels, height, width, out_channels;
  Eigen::Index plane() const { return static_cast<Eigen::Index>(height) * width; }
};

template <typename T>
TransposeGeometry transpose_geometry(const Tensor<T>& input, const Tensor<T>& kernel) {
  require(input.rank() == 4, "conv_transpose2x2: input must be N x C x H x W, got ", to_string(input.shape()));
  require(kernel.rank() == 4 && kernel.dim(2) == 2 && kernel.dim(3) == 2,
          "conv_transpose2x2: kernel must be Cin x Cout x 2 x 2, got ", to_string(kernel.shape()));
  require(kernel.dim(0) == input.dim(1), "conv_transpose2x2: kernel expects ", kernel.dim(0),
          " input channels but input has ", input.dim(1));
  return {input.dim(0), input.dim(1), input.dim(2), input.dim(3), kernel.dim(1)};
}

}  // namespace

template <typename T>
Tensor<T> conv_transpose2x2(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias) {
  const auto g = transpose_geometry(input, kernel);
  require(bias.rank() == 1 && bias.dim(0) == g.out_channels, "conv_transpose2x2: bias must have shape [",
          g.out_channels, "], got ", to_string(bias.shape()));
  const int out_h = 2 * g.height, out_w = 2 * g.width;
  Tensor<T> out({g.batch, g.out_channels, out_h, out_w});
  ConstMatMap<T> weights(kernel.data(), g.in_channels, g.out_channels * 4);
  RowMat<T> scattered(g.out_channels * 4, g.plane());
  for (int n = 0; n < g.batch; ++n) {
    ConstMatMap<T> x(input.data() + n * g.in_channels * g.plane(), g.in_channels, g.plane());
    scattered.noalias() = weights.transpose() * x;
    T* dst = out.data() + static_cast<std::size_t>(n) * g.out_channels * out_h * out_w;
    for (int co = 0; co < g.out_channels; ++co) {
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
          const T* src = scattered.data() + (co * 4 + a * 2 + b) * g.plane();
          for (int i = 0; i < g.height; ++i)
            for (int j = 0; j < g.width; ++j)
              dst[(static_cast<std::size_t>(co) * out_h + 2 * i + a) * out_w + 2 * j + b] =
                  src[i * g.width + j] + bias[co];
        }
      }
    }
  }
  return out;
}

template <typename T>
Conv2dGrads<T> conv_transpose2x2_backward(const Tensor<T>& input, const Tensor<T>& kernel,
                                          std::span<const T> grad_out, bool want_input, bool want_params) {
  const auto g = transpose_geometry(input, kernel);
  const int out_h = 2 * g.height, out_w = 2 * g.width;
  require(grad_out.size() == static_cast<std::size_t>(g.batch) * g.out_channels * out_h * out_w,
          "conv_transpose2x2_backward: gradient size does not match output shape");
  Conv2dGrads<T> grads;
  if (want_input) grads.input = Tensor<T>(input.shape());
  if (want_params) {
    grads.kernel = Tensor<T>(kernel.shape());
    grads.bias = Tensor<T>({g.out_channels});
  }
  if (!want_input && !want_params) return grads;
  ConstMatMap<T> weights(kernel.data(), g.in_channels, g.out_channels * 4);
  RowMat<T> gathered(g.out_channels * 4, g.plane());
  for (int n = 0; n < g.batch; ++n) {
    const T* gy = grad_out.data() + static_cast<std::size_t>(n) * g.out_channels * out_h * out_w;
    for (int co = 0; co < g.out_channels; ++co) {
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
          T* dst = gathered.data() + (co * 4 + a * 2 + b) * g.plane();
          for (int i = 0; i < g.height; ++i)
            for (int j = 0; j < g.width; ++j)
              dst[i * g.width + j] = gy[(static_cast<std::size_t>(co) * out_h + 2 * i + a) * out_w + 2 * j + b];
        }
      }
    }
    ConstMatMap<T> x(input.data() + n * g.in_channels * g.plane(), g.in_channels, g.plane());
    if (want_params) {
      MatMap<T>(grads.kernel.data(), g.in_channels, g.out_channels * 4).noalias() += x * gathered.transpose();
      for (int co = 0; co < g.out_channels; ++co) grads.bias[co] += gathered.middleRows(co * 4, 4).sum();
    }
    if (want_input) {
      MatMap<T>(grads.input.data() + n * g.in_channels * g.plane(), g.in_channels, g.plane()).noalias() =
          weights * gathered;
    }
  }
  return grads;
}

template <typename T>
PoolResult<T> maxpool2d(const Tensor<T>& input, int kernel, int stride) {
  require(input.rank() == 4, "maxpool2d: input must be N x C x H x W, got ", to_string(input.shape()));
  require(kernel >= 1, "maxpool2d: kernel must be >= 1, got ", kernel);
  require(stride >= 1, "maxpool2d: stride must be >= 1, got ", stride);
  const int batch = input.dim(0), channels = input.dim(1), h = input.dim(2), w = input.dim(3);
  int out_h, out_w, pad;
  if (stride == 1) {
    pad = (kernel - 1) / 2;
    out_h = h;
    out_w = w;
  } else {
    require(kernel <= h && kernel <= w, "maxpool2d: kernel ", kernel, " exceeds input extent ", h, " x ", w);
    pad = 0;
    out_h = (h - kernel) / stride + 1;
    out_w = (w - kernel) / stride + 1;
  }
  PoolResult<T> result{Tensor<T>({batch, channels, out_h, out_w}), {}};
  result.argmax.resize(result.output.size());
  const std::size_t in_plane = static_cast<std::size_t>(h) * w;
  std::size_t o = 0;
  for (int nc = 0; nc < batch * channels; ++nc) {
    const T* plane = input.data() + nc * in_plane;
    for (int oy = 0; oy < out_h; ++oy) {
      const int y0 = std::max(0, oy * stride - pad), y1 = std::min(h, oy * stride - pad + kernel);
      for (int ox = 0; ox < out_w; ++ox, ++o) {
        const int x0 = std::max(0, ox * stride - pad), x1 = std::min(w, ox * stride - pad + kernel);
        std::int64_t best = static_cast<std::int64_t>(y0) * w + x0;
        for (int y = y0; y < y1; ++y)
          for (int x = x0; x < x1; ++x)
            if (plane[y * w + x] > plane[best]) best = static_cast<std::int64_t>(y) * w + x;
        result.output[o] = plane[best];
        result.argmax[o] = static_cast<std::int64_t>(nc * in_plane) + best;
      }
    }
  }
  return result;
}

template <typename T>
Tensor<T> maxpool2d_backward(const Shape& input_shape, std::span<const std::int64_t> argmax,
                             std::span<const T> grad_out) {
  require(argmax.size() == grad_out.size(), "maxpool2d_backward: argmax/gradient size mismatch");
  Tensor<T> grad(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) grad[static_cast<std::size_t>(argmax[i])] += grad_out[i];
  return grad;
}

template <typename T>
Tensor<T> upsample_nearest2x(const Tensor<T>& input) {
  require(input.rank() == 4, "upsample_nearest2x: input must be N x C x H x W, got ", to_string(input.shape()));
  const int h = input.dim(2), w = input.dim(3);
  Tensor<T> out({input.dim(0), input.dim(1), 2 * h, 2 * w});
  const int planes = input.dim(0) * input.dim(1);
  for (int p = 0; p < planes; ++p) {
    const T* src = input.data() + static_cast<std::size_t>(p) * h * w;
    T* dst = out.data() + static_cast<std::size_t>(p) * 4 * h * w;
    for (int y = 0; y < 2 * h; ++y)
      for (int x = 0; x < 2 * w; ++x) dst[y * 2 * w + x] = src[(y / 2) * w + x / 2];
  }
  return out;
}

template <typename T>
Tensor<T> upsample_nearest2x_backward(const Shape& input_shape, std::span<const T> grad_out) {
  Tensor<T> grad(input_shape);
  const int h = input_shape[2], w = input_shape[3];
  require(grad_out.size() == grad.size() * 4, "upsample_nearest2x_backward: gradient size mismatch");
  const int planes = input_shape[0] * input_shape[1];
  for (int p = 0; p < planes; ++p) {
    T* dst = grad.data() + static_cast<std::size_t>(p) * h * w;
    const T* src = grad_out.data() + static_cast<std::size_t>(p) * 4 * h * w;
    for (int y = 0; y < 2 * h; ++y)
      for (int x = 0; x < 2 * w; ++x) dst[(y / 2) * w + x / 2] += src[y * 2 * w + x];
  }
  return grad;
}

template <typename T>
T sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
Tensor<T> swish(const Tensor<T>& input) {
  Tensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] * sigmoid(input[i]);
  return out;
}

template <typename T>
Tensor<T> swish_backward(const Tensor<T>& input, std::span<const T> grad_out) {
  Tensor<T> grad(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    const T s = sigmoid(input[i]);
    grad[i] = grad_out[i] * (s + input[i] * s * (T(1) - s));
  }
  return grad;
}

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>* const> parts) {
  require(!parts.empty(), "concat_channels: need at least one input");
  const Tensor<T>& first = *parts.front();
  require(first.rank() == 4, "concat_channels: inputs must be N x C x H x W, got ", to_string(first.shape()));
  int channels = 0;
  for (const Tensor<T>* p : parts) {
    require(p->rank() == 4 && p->dim(0) == first.dim(0) && p->dim(2) == first.dim(2) && p->dim(3) == first.dim(3),
            "concat_channels: spatial/batch mismatch between ", to_string(first.shape()), " and ",
            to_string(p->shape()));
    channels += p->dim(1);
  }
  const int batch = first.dim(0);
  const std::size_t plane = static_cast<std::size_t>(first.dim(2)) * first.dim(3);
  Tensor<T> out({batch, channels, first.dim(2), first.dim(3)});
  T* dst = out.data();
  for (int n = 0; n < batch; ++n) {
    for (const Tensor<T>* p : parts) {
      const std::size_t len = p->dim(1) * plane;
      std::copy_n(p->data() + n * len, len, dst);
      dst += len;
    }
  }
  return out;
}

template <typename T>
std::vector<Tensor<T>> split_channels(const Shape& whole_shape, std::span<const T> whole,
                                      std::span<const int> channels) {
  require(whole_shape.size() == 4, "split_channels: expected N x C x H x W");
  int total = 0;
  for (int c : channels) total += c;
  require(total == whole_shape[1], "split_channels: channel counts sum to ", total, " but tensor has ",
          whole_shape[1]);
  const int batch = whole_shape[0];
  const std::size_t plane = static_cast<std::size_t>(whole_shape[2]) * whole_shape[3];
  std::vector<Tensor<T>> parts;
  parts.reserve(channels.size());
  for (int c : channels) parts.emplace_back(Shape{batch, c, whole_shape[2], whole_shape[3]});
  const T* src = whole.data();
  for (int n = 0; n < batch; ++n) {
    for (std::size_t k = 0; k < channels.size(); ++k) {
      const std::size_t len = channels[k] * plane;
      std::copy_n(src, len, parts[k].data() + n * len);
      src += len;
    }
  }
  return parts;
}

template <typename T>
Tensor<T> instance_norm(const Tensor<T>& input, T eps) {
  require(input.rank() == 4, "instance_norm: input must be N x C x H x W");
  Tensor<T> out(input.shape());
  const std::size_t plane = static_cast<std::size_t>(input.dim(2)) * input.dim(3);
  for (std::size_t p = 0; p < input.size() / plane; ++p) {
    const T* x = input.data() + p * plane;
    T* y = out.data() + p * plane;
    double mean = 0, var = 0;
    for (std::size_t i = 0; i < plane; ++i) mean += x[i];
    mean /= static_cast<double>(plane);
    for (std::size_t i = 0; i < plane; ++i) var += (x[i] - mean) * (x[i] - mean);
    var /= static_cast<double>(plane);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t i = 0; i < plane; ++i) y[i] = static_cast<T>((x[i] - mean) * inv);
  }
  return out;
}

template <typename T>
Tensor<T> instance_norm_backward(const Tensor<T>& input, std::span<const T> grad_out, T eps) {
  Tensor<T> grad(input.shape());
  const std::size_t plane = static_cast<std::size_t>(input.dim(2)) * input.dim(3);
  for (std::size_t p = 0; p < input.size() / plane; ++p) {
    const T* x = input.data() + p * plane;
    const T* gy = grad_out.data() + p * plane;
    T* gx = grad.data() + p * plane;
    double mean = 0, var = 0;
    for (std::size_t i = 0; i < plane; ++i) mean += x[i];
    mean /= static_cast<double>(plane);
    for (std::size_t i = 0; i < plane; ++i) var += (x[i] - mean) * (x[i] - mean);
    var /= static_cast<double>(plane);
    const double inv = 1.0 / std::sqrt(var + eps);
    double gy_mean = 0, gy_xhat_mean = 0;
    for (std::size_t i = 0; i < plane; ++i) {
      gy_mean += gy[i];
      gy_xhat_mean += gy[i] * (x[i] - mean) * inv;
    }
    gy_mean /= static_cast<double>(plane);
    gy_xhat_mean /= static_cast<double>(plane);
    for (std::size_t i = 0; i < plane; ++i)
      gx[i] = static_cast<T>(inv * (gy[i] - gy_mean - (x[i] - mean) * inv * gy_xhat_mean));
  }
  return grad;
}

#define EDNGTM_INSTANTIATE_OPS(T)                                                                              \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int);                        \
  template Conv2dGrads<T> conv2d_backward(const Tensor<T>&, const Tensor<T>&, std::span<const T>, int, bool,   \
                                          bool);                                                               \
  template Tensor<T> conv_transpose2x2(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                  \
  template Conv2dGrads<T> conv_transpose2x2_backward(const Tensor<T>&, const Tensor<T>&, std::span<const T>,   \
                                                     bool, bool);                                              \
  template PoolResult<T> maxpool2d(const Tensor<T>&, int, int);                                                \
  template Tensor<T> maxpool2d_backward(const Shape&, std::span<const std::int64_t>, std::span<const T>);      \
  template Tensor<T> upsample_nearest2x(const Tensor<T>&);                                                     \
  template Tensor<T> upsample_nearest2x_backward(const Shape&, std::span<const T>);                            \
  template T sigmoid(T);                                                                                       \
  template Tensor<T> swish(const Tensor<T>&);                                                                  \
  template Tensor<T> swish_backward(const Tensor<T>&, std::span<const T>);                                     \
  template Tensor<T> concat_channels(std::span<const Tensor<T>* const>);                                       \
  template std::vector<Tensor<T>> split_channels(const Shape&, std::span<const T>, std::span<const int>);      \
  template Tensor<T> instance_norm(const Tensor<T>&, T);                                                       \
  template Tensor<T> instance_norm_backward(const Tensor<T>&, std::span<const T>, T);

EDNGTM_INSTANTIATE_OPS(float)
EDNGTM_INSTANTIATE_OPS(double)

#undef EDNGTM_INSTANTIATE_OPS

}  // namespace edngtm::ops
