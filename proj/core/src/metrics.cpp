#include "edngtm/metrics.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>

#include "edngtm/png_io.hpp"

namespace edngtm::metrics {

namespace {

void check_pair(const ImageBuf& a, const ImageBuf& b, const char* who) {
  require(a.same_extent(b) && a.channels() == b.channels(), who, ": extent mismatch ", a.height(), "x", a.width(),
          "x", a.channels(), " vs ", b.height(), "x", b.width(), "x", b.channels());
}

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

// Valid-mode separable filtering of one plane: (H - 10) x (W - 10) output.
std::vector<double> filter_valid(const std::vector<double>& plane, int h, int w, const std::vector<double>& g) {
  const int oh = h - kWindow + 1, ow = w - kWindow + 1;
  std::vector<double> rows(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0;
      for (int k = 0; k < kWindow; ++k) acc += g[k] * plane[static_cast<std::size_t>(y) * w + x + k];
      rows[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0;
      for (int k = 0; k < kWindow; ++k) acc += g[k] * rows[static_cast<std::size_t>(y + k) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  return out;
}

}  // namespace

double psnr(const ImageBuf& a, const ImageBuf& b) {
  check_pair(a, b, "psnr");
  double sse = 0;
  for (std::size_t i = 0; i < a.values().size(); ++i) {
    const double d = static_cast<double>(a.values()[i]) - b.values()[i];
    sse += d * d;
  }
  const double mse = sse / static_cast<double>(a.values().size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

std::vector<double> ssim_window() {
  std::vector<double> g(kWindow);
  double total = 0;
  for (int k = 0; k < kWindow; ++k) {
    const double d = k - kWindow / 2;
    g[k] = std::exp(-d * d / (2 * kSigma * kSigma));
    total += g[k];
  }
  for (double& v : g) v /= total;
  return g;
}

double ssim(const ImageBuf& a, const ImageBuf& b) {
  check_pair(a, b, "ssim");
  require(a.height() >= kWindow && a.width() >= kWindow, "ssim: images must be at least ", kWindow, "x", kWindow,
          ", got ", a.height(), "x", a.width());
  const auto g = ssim_window();
  const int h = a.height(), w = a.width(), c = a.channels();
  const std::size_t n = a.pixel_count();
  double channel_total = 0;
  for (int ch = 0; ch < c; ++ch) {
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = a.values()[i * c + ch];
      y[i] = b.values()[i * c + ch];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = filter_valid(x, h, w, g), my = filter_valid(y, h, w, g);
    const auto sxx = filter_valid(xx, h, w, g), syy = filter_valid(yy, h, w, g), sxy = filter_valid(xy, h, w, g);
    double acc = 0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cxy = sxy[i] - mx[i] * my[i];
      acc += ((2 * mx[i] * my[i] + kC1) * (2 * cxy + kC2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + kC1) * (vx + vy + kC2));
    }
    channel_total += acc / static_cast<double>(mx.size());
  }
  return channel_total / c;
}

MetricReport evaluate_dirs(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir) {
  namespace fs = std::filesystem;
  require(fs::is_directory(pred_dir), "evaluate_dirs: '", pred_dir.string(), "' is not a directory");
  require(fs::is_directory(gt_dir), "evaluate_dirs: '", gt_dir.string(), "' is not a directory");
  auto list = [](const fs::path& dir) {
    std::set<std::string> names;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file() && e.path().extension() == ".png") names.insert(e.path().filename().string());
    return names;
  };
  const auto preds = list(pred_dir), gts = list(gt_dir);
  MetricReport report;
  for (const auto& name : preds) {
    if (!gts.count(name)) {
      report.skipped.push_back(name);
      continue;
    }
    try {
      const ImageBuf p = io::load_image((pred_dir / name).string());
      const ImageBuf t = io::load_image((gt_dir / name).string());
      report.rows.push_back({name, psnr(p, t), ssim(p, t)});
    } catch (const IoError& e) {
      spdlog::warn("evaluate_dirs: skipping {}: {}", name, e.what());
      report.skipped.push_back(name);
    } catch (const ContractViolation& e) {
      spdlog::warn("evaluate_dirs: skipping {}: {}", name, e.what());
      report.skipped.push_back(name);
    }
  }
  for (const auto& name : gts)
    if (!preds.count(name)) report.skipped.push_back(name);
  std::sort(report.skipped.begin(), report.skipped.end());
  if (!report.rows.empty()) {
    double sp = 0, ss = 0;
    for (const auto& r : report.rows) {
      sp += r.psnr;
      ss += r.ssim;
    }
    report.mean_psnr = sp / static_cast<double>(report.rows.size());
    report.mean_ssim = ss / static_cast<double>(report.rows.size());
  }
  return report;
}

std::string format_metric(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", value);
  return buf;
}

void write_csv(const MetricReport& report, std::ostream& out) {
  out << "name,psnr_db,ssim\n";
  for (const auto& r : report.rows) out << r.name << ',' << format_metric(r.psnr) << ',' << format_metric(r.ssim) << '\n';
  if (!report.rows.empty())
    out << "mean," << format_metric(report.mean_psnr) << ',' << format_metric(report.mean_ssim) << '\n';
  for (const auto& s : report.skipped) out << "# skipped: " << s << '\n';
}

}  // namespace edngtm::metrics
