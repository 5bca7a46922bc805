#include "edngtm/dcp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace edngtm::dcp {

void DcpParams::validate() const {
  require(patch >= 1 && patch % 2 == 1, "dcp: patch must be odd and >= 1, got ", patch);
  require(omega > 0.0 && omega <= 1.0, "dcp: omega must lie in (0, 1], got ", omega);
  require(airlight_fraction > 0.0 && airlight_fraction <= 1.0, "dcp: airlight_fraction must lie in (0, 1], got ",
          airlight_fraction);
  require(t0 > 0.0 && t0 < 1.0, "dcp: t0 must lie in (0, 1), got ", t0);
  require(gf_radius >= 1, "dcp: gf_radius must be >= 1, got ", gf_radius);
  require(gf_eps > 0.0, "dcp: gf_eps must be positive, got ", gf_eps);
}

namespace {

// Separable running-window minimum with windows clamped to the image.
ImageBuf min_filter(const ImageBuf& plane, int radius) {
  const int h = plane.height(), w = plane.width();
  ImageBuf rows(h, w, 1), out(h, w, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float m = plane.at(y, std::max(0, x - radius));
      for (int k = std::max(0, x - radius) + 1; k <= std::min(w - 1, x + radius); ++k) m = std::min(m, plane.at(y, k));
      rows.at(y, x) = m;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float m = rows.at(std::max(0, y - radius), x);
      for (int k = std::max(0, y - radius) + 1; k <= std::min(h - 1, y + radius); ++k) m = std::min(m, rows.at(k, x));
      out.at(y, x) = m;
    }
  return out;
}

ImageBuf channel_min(const ImageBuf& image) {
  ImageBuf out(image.height(), image.width(), 1);
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x)
      out.at(y, x) = std::min({image.at(y, x, 0), image.at(y, x, 1), image.at(y, x, 2)});
  return out;
}

}  // namespace

ImageBuf dark_channel(const ImageBuf& image, int patch) {
  require(image.channels() == 3, "dark_channel: expected a 3-channel image, got ", image.channels(), " channels");
  require(patch >= 1 && patch % 2 == 1, "dark_channel: patch must be odd and >= 1, got ", patch);
  return min_filter(channel_min(image), patch / 2);
}

Airlight estimate_airlight(const ImageBuf& image, const ImageBuf& dark, double fraction) {
  require(image.channels() == 3, "estimate_airlight: expected a 3-channel image");
  require(dark.channels() == 1 && dark.same_extent(image), "estimate_airlight: dark channel extent mismatch");
  require(fraction > 0.0 && fraction <= 1.0, "estimate_airlight: fraction must lie in (0, 1], got ", fraction);
  const std::size_t n = image.pixel_count();
  const double wanted = std::ceil(fraction * static_cast<double>(n) - 1e-9);
  const auto count = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(wanted, 1.0)), 1, n);
  const auto dv = dark.values();
  const auto iv = image.values();
  auto channel_sum = [&](std::size_t i) {
    return static_cast<double>(iv[3 * i]) + iv[3 * i + 1] + iv[3 * i + 2];
  };
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto brighter = [&](std::size_t a, std::size_t b) {
    if (dv[a] != dv[b]) return dv[a] > dv[b];
    const double sa = channel_sum(a), sb = channel_sum(b);
    if (sa != sb) return sa > sb;
    return a < b;
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count), order.end(), brighter);
  std::size_t best = order.front();
  for (std::size_t k = 1; k < count; ++k) {
    const std::size_t i = order[k];
    const double si = channel_sum(i), sb = channel_sum(best);
    if (si > sb || (si == sb && i < best)) best = i;
  }
  Airlight a{};
  for (int c = 0; c < 3; ++c) a[c] = std::max(iv[3 * best + c], kAirlightFloor);
  return a;
}

TransmissionMap estimate_transmission(const ImageBuf& image, const Airlight& airlight, const DcpParams& params) {
  require(image.channels() == 3, "estimate_transmission: expected a 3-channel image");
  for (float a : airlight) require(a > 0.0f, "estimate_transmission: airlight components must be positive");
  ImageBuf normalized = image;
  auto v = normalized.values();
  for (std::size_t i = 0; i < image.pixel_count(); ++i)
    for (int c = 0; c < 3; ++c) v[3 * i + c] /= airlight[c];
  const ImageBuf dark = dark_channel(normalized, params.patch);
  TransmissionMap t(image.height(), image.width());
  for (std::size_t i = 0; i < t.size(); ++i)
    t[i] = std::clamp(static_cast<float>(1.0 - params.omega * dark.values()[i]), 0.0f, 1.0f);
  return t;
}

namespace {

// Mean over the clamped (2r+1)^2 window via a summed-area table.
std::vector<double> box_mean(const std::vector<double>& src, int h, int w, int radius) {
  std::vector<double> sat(static_cast<std::size_t>(h + 1) * (w + 1), 0.0);
  auto s = [&](int y, int x) -> double& { return sat[static_cast<std::size_t>(y) * (w + 1) + x]; };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      s(y + 1, x + 1) = src[static_cast<std::size_t>(y) * w + x] + s(y, x + 1) + s(y + 1, x) - s(y, x);
  std::vector<double> out(src.size());
  for (int y = 0; y < h; ++y) {
    const int y0 = std::max(0, y - radius), y1 = std::min(h, y + radius + 1);
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(0, x - radius), x1 = std::min(w, x + radius + 1);
      const double total = s(y1, x1) - s(y0, x1) - s(y1, x0) + s(y0, x0);
      out[static_cast<std::size_t>(y) * w + x] = total / ((y1 - y0) * (x1 - x0));
    }
  }
  return out;
}

std::vector<double> widen(const ImageBuf& image) {
  return std::vector<double>(image.values().begin(), image.values().end());
}

}  // namespace

ImageBuf box_filter(const ImageBuf& image, int radius) {
  require(image.channels() == 1, "box_filter: expected a single-channel image");
  require(radius >= 0, "box_filter: radius must be >= 0");
  const auto mean = box_mean(widen(image), image.height(), image.width(), radius);
  ImageBuf out(image.height(), image.width(), 1);
  for (std::size_t i = 0; i < mean.size(); ++i) out.values()[i] = static_cast<float>(mean[i]);
  return out;
}

ImageBuf guided_filter(const ImageBuf& guide, const ImageBuf& source, int radius, double eps) {
  require(guide.channels() == 1 && source.channels() == 1, "guided_filter: guide and source must be single-channel");
  require(guide.same_extent(source), "guided_filter: guide ", guide.height(), "x", guide.width(),
          " and source ", source.height(), "x", source.width(), " differ in extent");
  require(radius >= 1, "guided_filter: radius must be >= 1, got ", radius);
  require(eps > 0.0, "guided_filter: eps must be positive, got ", eps);
  const int h = guide.height(), w = guide.width();
  const std::vector<double> g = widen(guide), p = widen(source);
  std::vector<double> gg(g.size()), gp(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    gg[i] = g[i] * g[i];
    gp[i] = g[i] * p[i];
  }
  const auto mean_g = box_mean(g, h, w, radius);
  const auto mean_p = box_mean(p, h, w, radius);
  const auto mean_gg = box_mean(gg, h, w, radius);
  const auto mean_gp = box_mean(gp, h, w, radius);
  std::vector<double> a(g.size()), b(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double var = mean_gg[i] - mean_g[i] * mean_g[i];
    const double cov = mean_gp[i] - mean_g[i] * mean_p[i];
    a[i] = cov / (var + eps);
    b[i] = mean_p[i] - a[i] * mean_g[i];
  }
  const auto mean_a = box_mean(a, h, w, radius);
  const auto mean_b = box_mean(b, h, w, radius);
  ImageBuf q(h, w, 1);
  for (std::size_t i = 0; i < g.size(); ++i) q.values()[i] = static_cast<float>(mean_a[i] * g[i] + mean_b[i]);
  return q;
}

ImageBuf recover_radiance(const ImageBuf& image, const TransmissionMap& transmission, const Airlight& airlight,
                          double t0) {
  require(image.channels() == 3, "recover_radiance: expected a 3-channel image");
  require(t0 > 0.0 && t0 < 1.0, "recover_radiance: t0 must lie in (0, 1), got ", t0);
  require(transmission.height() == image.height() && transmission.width() == image.width(),
          "recover_radiance: transmission extent mismatch");
  ImageBuf out(image.height(), image.width(), 3);
  for (std::size_t i = 0; i < image.pixel_count(); ++i) {
    const double t = std::max(static_cast<double>(transmission[i]), t0);
    for (int c = 0; c < 3; ++c) {
      const double a = airlight[c];
      const double j = (static_cast<double>(image.values()[3 * i + c]) - a) / t + a;
      out.values()[3 * i + c] = static_cast<float>(std::clamp(j, 0.0, 1.0));
    }
  }
  return out;
}

DehazeResult dcp_dehaze(const ImageBuf& image, const DcpParams& params) {
  params.validate();
  require(image.channels() == 3, "dcp_dehaze: expected a 3-channel image, got ", image.channels());
  const ImageBuf dark = dark_channel(image, params.patch);
  const Airlight airlight = estimate_airlight(image, dark, params.airlight_fraction);
  const TransmissionMap raw = estimate_transmission(image, airlight, params);
  const ImageBuf refined = guided_filter(grayscale(image), to_image(raw), params.gf_radius, params.gf_eps);
  TransmissionMap t(image.height(), image.width());
  for (std::size_t i = 0; i < t.size(); ++i)
    t[i] = std::clamp(refined.values()[i], static_cast<float>(params.t0), 1.0f);
  return {recover_radiance(image, t, airlight, params.t0), std::move(t), airlight};
}

TransmissionMap to_guidance(const TransmissionMap& refined, GuidanceMode mode) {
  if (mode == GuidanceMode::Transmission) return refined;
  TransmissionMap out = refined;
  for (float& v : out.values()) v = 1.0f - v;
  return out;
}

}  // namespace edngtm::dcp
