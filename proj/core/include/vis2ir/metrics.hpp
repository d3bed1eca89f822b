#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vis2ir/detection.hpp"
#include "vis2ir/image.hpp"

namespace vis2ir::metrics {

/// PSNR reported for identical images.
inline constexpr double kPsnrCap = 100.0;

/// Mean structural similarity on luminance mapped to [0, 1]: 11x11 Gaussian window with
/// sigma 1.5, C1 = (0.01)^2, C2 = (0.03)^2, averaged over all fully contained windows.
double ssim(const ImageBuf& a, const ImageBuf& b);

/// 10 log10(1 / MSE) over all channels mapped to [0, 1]; kPsnrCap when MSE is zero.
double psnr(const ImageBuf& a, const ImageBuf& b);

/// Mean absolute difference in the images' shared value range.
double mean_abs_error(const ImageBuf& a, const ImageBuf& b);

struct ImageScore {
  std::string name;
  double ssim = 0.0;
  double psnr = 0.0;
};

struct MetricsReport {
  std::optional<double> mean_ssim;
  std::optional<double> mean_psnr;
  std::map<int, double> per_class_ap;
  std::optional<double> map50;
  std::size_t sample_count = 0;
  std::vector<ImageScore> per_image;
  std::vector<std::string> excluded;  // unmatched or unreadable inputs
  std::vector<std::string> warnings;

  /// Fixed field names: mean_ssim, mean_psnr, map50, map50_percent, per_class_ap,
  /// sample_count, per_image, excluded, warnings.
  std::string to_json() const;
};

MetricsReport summarize_images(std::vector<ImageScore> scores);
MetricsReport summarize_detections(const DetectionReport& det);

}  // namespace vis2ir::metrics
