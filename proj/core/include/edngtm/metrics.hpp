#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "edngtm/image.hpp"

namespace edngtm::metrics {

/// 10 log10(1 / MSE) with peak 1.0; +infinity when the images are identical.
double psnr(const ImageBuf& a, const ImageBuf& b);

/// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03 on
/// the [0, 1] range, valid window positions only, averaged over channels.
double ssim(const ImageBuf& a, const ImageBuf& b);

/// Normalized 11-tap Gaussian used by ssim().
std::vector<double> ssim_window();

struct MetricRow {
  std::string name;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct MetricReport {
  std::vector<MetricRow> rows;      ///< sorted by name
  std::vector<std::string> skipped; ///< files without a partner (or unreadable)
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
};

/// Pairs same-named PNG files in the two directories and scores each pair.
MetricReport evaluate_dirs(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir);

/// CSV with header "name,psnr_db,ssim", 6 decimals, "inf" for identical pairs,
/// followed by a mean row and one "# skipped: NAME" comment line per skipped file.
void write_csv(const MetricReport& report, std::ostream& out);

/// Formats a PSNR/SSIM value the way write_csv() does.
std::string format_metric(double value);

}  // namespace edngtm::metrics
