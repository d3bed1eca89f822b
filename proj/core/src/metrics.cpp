#include "vis2ir/metrics.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "vis2ir/error.hpp"

namespace vis2ir::metrics {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;

std::vector<double> gaussian_taps() {
  std::vector<double> taps(kWindow);
  double sum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    taps[static_cast<std::size_t>(i)] = std::exp(-(d * d) / (2.0 * kSigma * kSigma));
    sum += taps[static_cast<std::size_t>(i)];
  }
  for (auto& t : taps) t /= sum;
  return taps;
}

// Separable 'valid' Gaussian filtering of an H x W plane.
std::vector<double> filter_valid(const std::vector<double>& plane, int h, int w, const std::vector<double>& taps) {
  const int ow = w - kWindow + 1;
  const int oh = h - kWindow + 1;
  std::vector<double> rows(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += taps[static_cast<std::size_t>(k)] * plane[static_cast<std::size_t>(y) * w + x + k];
      rows[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += taps[static_cast<std::size_t>(k)] * rows[static_cast<std::size_t>(y + k) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  return out;
}

std::vector<double> unit_luma(const ImageBuf& img) {
  const ImageBuf l = luminance(remap(img, kUnit));
  return {l.pixels.values().begin(), l.pixels.values().end()};
}

void require_same_extent(const ImageBuf& a, const ImageBuf& b, const char* op) {
  if (!a.same_extent(b)) {
    throw PreconditionError(std::string(op) + ": image extents differ (" + std::to_string(a.height()) + "x" +
                            std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                            std::to_string(b.width()) + ")");
  }
}

}  // namespace

double ssim(const ImageBuf& a, const ImageBuf& b) {
  require_same_extent(a, b, "ssim");
  const int h = a.height();
  const int w = a.width();
  if (h < kWindow || w < kWindow) {
    throw PreconditionError("ssim: image " + std::to_string(h) + "x" + std::to_string(w) + " smaller than the " +
                            std::to_string(kWindow) + "x" + std::to_string(kWindow) + " window");
  }
  const auto taps = gaussian_taps();
  const auto x = unit_luma(a);
  const auto y = unit_luma(b);
  std::vector<double> xx(x.size());
  std::vector<double> yy(x.size());
  std::vector<double> xy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mu_x = filter_valid(x, h, w, taps);
  const auto mu_y = filter_valid(y, h, w, taps);
  const auto e_xx = filter_valid(xx, h, w, taps);
  const auto e_yy = filter_valid(yy, h, w, taps);
  const auto e_xy = filter_valid(xy, h, w, taps);

  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  double acc = 0.0;
  for (std::size_t i = 0; i < mu_x.size(); ++i) {
    const double mxy = mu_x[i] * mu_y[i];
    const double mxx = mu_x[i] * mu_x[i];
    const double myy = mu_y[i] * mu_y[i];
    const double sxy = e_xy[i] - mxy;
    const double num = (2.0 * mxy + c1) * (2.0 * sxy + c2);
    const double den = (mxx + myy + c1) * ((e_xx[i] - mxx) + (e_yy[i] - myy) + c2);
    acc += num / den;
  }
  return acc / static_cast<double>(mu_x.size());
}

double psnr(const ImageBuf& a, const ImageBuf& b) {
  require_same_extent(a, b, "psnr");
  if (a.channels() != b.channels()) throw PreconditionError("psnr: channel counts differ");
  const ImageBuf ua = remap(a, kUnit);
  const ImageBuf ub = remap(b, kUnit);
  double se = 0.0;
  for (std::size_t i = 0; i < ua.pixels.numel(); ++i) {
    const double d = ua.pixels[i] - ub.pixels[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(ua.pixels.numel());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double mean_abs_error(const ImageBuf& a, const ImageBuf& b) {
  if (a.pixels.shape() != b.pixels.shape()) throw PreconditionError("mean_abs_error: shapes differ");
  const ImageBuf rb = remap(b, a.range);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.pixels.numel(); ++i) acc += std::abs(a.pixels[i] - rb.pixels[i]);
  return acc / static_cast<double>(a.pixels.numel());
}

MetricsReport summarize_images(std::vector<ImageScore> scores) {
  MetricsReport r;
  r.sample_count = scores.size();
  if (!scores.empty()) {
    double s = 0.0;
    double p = 0.0;
    for (const auto& sc : scores) {
      s += sc.ssim;
      p += sc.psnr;
    }
    r.mean_ssim = s / static_cast<double>(scores.size());
    r.mean_psnr = p / static_cast<double>(scores.size());
  }
  r.per_image = std::move(scores);
  return r;
}

MetricsReport summarize_detections(const DetectionReport& det) {
  MetricsReport r;
  r.per_class_ap = det.per_class_ap;
  r.map50 = det.map;
  r.sample_count = det.ground_truth_count;
  if (det.empty_ground_truth) r.warnings.push_back("ground truth is empty for all classes; mAP defined as 0");
  return r;
}

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["mean_ssim"] = mean_ssim ? nlohmann::ordered_json(*mean_ssim) : nlohmann::ordered_json(nullptr);
  j["mean_psnr"] = mean_psnr ? nlohmann::ordered_json(*mean_psnr) : nlohmann::ordered_json(nullptr);
  j["map50"] = map50 ? nlohmann::ordered_json(*map50) : nlohmann::ordered_json(nullptr);
  j["map50_percent"] = map50 ? nlohmann::ordered_json(*map50 * 100.0) : nlohmann::ordered_json(nullptr);
  nlohmann::ordered_json ap = nlohmann::ordered_json::object();
  for (const auto& [cls, v] : per_class_ap) ap[std::to_string(cls)] = v;
  j["per_class_ap"] = ap;
  j["sample_count"] = sample_count;
  nlohmann::ordered_json images = nlohmann::ordered_json::array();
  for (const auto& s : per_image) images.push_back({{"name", s.name}, {"ssim", s.ssim}, {"psnr", s.psnr}});
  j["per_image"] = images;
  j["excluded"] = excluded;
  j["warnings"] = warnings;
  return j.dump(2) + "\n";
}

}  // namespace vis2ir::metrics
