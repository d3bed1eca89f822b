#include "vis2ir/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "vis2ir/error.hpp"
#include "vis2ir/ops.hpp"

namespace vis2ir::data {

namespace {

constexpr double kMarker[3] = {0.9, 0.2, 0.15};

struct Rect {
  int y0, x0, y1, x1;  // half-open
  double color[3];
};

std::string box_line(int cls, double y0, double x0, double y1, double x1, int h, int w) {
  y0 = std::clamp(y0, 0.0, static_cast<double>(h));
  y1 = std::clamp(y1, 0.0, static_cast<double>(h));
  x0 = std::clamp(x0, 0.0, static_cast<double>(w));
  x1 = std::clamp(x1, 0.0, static_cast<double>(w));
  metrics::DetectionRecord r;
  r.class_id = cls;
  r.box = {(x0 + x1) / 2.0 / w, (y0 + y1) / 2.0 / h, (x1 - x0) / w, (y1 - y0) / h};
  return metrics::format_label(r) + "\n";
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void SynthesisRecipe::validate() const {
  if (height < 4 || width < 4) throw ConfigError("synthetic.height/width", "must be >= 4");
  if (hotspot_count < 0) throw ConfigError("synthetic.hotspot_count", "must be >= 0");
  if (!(blur_radius >= 0.0)) throw ConfigError("synthetic.blur_radius", "must be >= 0");
}

ImageBuf gaussian_blur(const ImageBuf& img, double sigma) {
  if (sigma <= 0.0) return img;
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(static_cast<std::size_t>(2 * r + 1));
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    taps[static_cast<std::size_t>(i + r)] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    sum += taps[static_cast<std::size_t>(i + r)];
  }
  for (auto& t : taps) t /= sum;
  const int h = img.height();
  const int w = img.width();
  ImageBuf tmp = img;
  ImageBuf out = img;
  for (int c = 0; c < img.channels(); ++c) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) acc += taps[static_cast<std::size_t>(i + r)] * img.at(c, y, ops::reflect_index(x + i, w));
        tmp.at(c, y, x) = acc;
      }
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) acc += taps[static_cast<std::size_t>(i + r)] * tmp.at(c, ops::reflect_index(y + i, h), x);
        out.at(c, y, x) = acc;
      }
  }
  return out;
}

ImageBuf infrared_from_visible(const ImageBuf& visible_unit, const std::vector<Hotspot>& hotspots, double blur_radius) {
  if (!(visible_unit.range == kUnit)) throw PreconditionError("infrared_from_visible expects a [0, 1] image");
  ImageBuf inverted = luminance(visible_unit);
  for (auto& v : inverted.pixels.values()) v = 1.0 - v;
  ImageBuf ir = gaussian_blur(inverted, blur_radius);
  if (hotspots.empty()) return ir;
  for (int y = 0; y < ir.height(); ++y)
    for (int x = 0; x < ir.width(); ++x) {
      double v = ir.at(0, y, x);
      for (const auto& hs : hotspots) {
        const double s = hs.radius / 1.5;
        const double d2 = (y + 0.5 - hs.cy) * (y + 0.5 - hs.cy) + (x + 0.5 - hs.cx) * (x + 0.5 - hs.cx);
        v += hs.amplitude * std::exp(-d2 / (2.0 * s * s));
      }
      ir.at(0, y, x) = std::clamp(v, 0.0, 1.0);
    }
  return ir;
}

SyntheticPair synthesize(const SynthesisRecipe& recipe, ValueRange range, std::string id) {
  recipe.validate();
  const int h = recipe.height;
  const int w = recipe.width;
  std::mt19937_64 rng(recipe.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };

  ImageBuf vis(3, h, w, kUnit);
  const double level = uniform(0.45, 0.7);
  const double gy = uniform(-0.15, 0.15);
  const double gx = uniform(-0.15, 0.15);
  double tint[3];
  for (double& t : tint) t = uniform(-0.08, 0.08);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double fy = (y + 0.5) / h - 0.5;
        const double fx = (x + 0.5) / w - 0.5;
        vis.at(c, y, x) = std::clamp(level + gy * fy + gx * fx + tint[c], 0.0, 1.0);
      }

  std::string labels;
  for (int k = 0; k < 2; ++k) {
    Rect r{};
    const int rh = std::max(2, static_cast<int>(uniform(0.15, 0.4) * h));
    const int rw = std::max(2, static_cast<int>(uniform(0.1, 0.3) * w));
    r.y0 = static_cast<int>(uniform(0.0, h - rh));
    r.x0 = static_cast<int>(uniform(0.0, w - rw));
    r.y1 = r.y0 + rh;
    r.x1 = r.x0 + rw;
    const double g = uniform(0.3, 0.9);
    for (double& c : r.color) c = std::clamp(g + uniform(-0.05, 0.05), 0.0, 1.0);
    for (int c = 0; c < 3; ++c)
      for (int y = r.y0; y < r.y1; ++y)
        for (int x = r.x0; x < r.x1; ++x) vis.at(c, y, x) = r.color[c];
    labels += box_line(1, r.y0, r.x0, r.y1, r.x1, h, w);
  }

  std::vector<Hotspot> hotspots;
  const double min_side = std::min(h, w);
  for (int k = 0; k < recipe.hotspot_count; ++k) {
    Hotspot hs;
    hs.radius = std::max(1.5, uniform(0.1, 0.18) * min_side);
    hs.cy = uniform(hs.radius, h - hs.radius);
    hs.cx = uniform(hs.radius, w - hs.radius);
    hs.amplitude = kHotspotAmplitude;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double dy = y + 0.5 - hs.cy;
        const double dx = x + 0.5 - hs.cx;
        if (dy * dy + dx * dx <= hs.radius * hs.radius)
          for (int c = 0; c < 3; ++c) vis.at(c, y, x) = kMarker[c];
      }
    labels += box_line(0, hs.cy - hs.radius, hs.cx - hs.radius, hs.cy + hs.radius, hs.cx + hs.radius, h, w);
    hotspots.push_back(hs);
  }

  SyntheticPair out;
  out.hotspots = hotspots;
  out.sample.id = std::move(id);
  out.sample.infrared = remap(infrared_from_visible(vis, hotspots, recipe.blur_radius), range);
  out.sample.visible = remap(vis, range);
  out.sample.label_text = std::move(labels);
  return out;
}

PairedSample synthesize_pair(const SynthesisRecipe& recipe, ValueRange range) {
  return synthesize(recipe, range).sample;
}

Dataset synthesize_dataset(const SynthesisRecipe& base, int count, Direction direction, ValueRange range) {
  if (count < 0) throw PreconditionError("synthesize_dataset: negative count");
  std::vector<PairedSample> samples;
  for (int i = 0; i < count; ++i) {
    SynthesisRecipe r = base;
    r.seed = mix_seed(base.seed, static_cast<std::uint64_t>(i));
    char id[32];
    std::snprintf(id, sizeof id, "pair_%04d", i);
    samples.push_back(synthesize(r, range, id).sample);
  }
  return Dataset(std::move(samples), direction);
}

}  // namespace vis2ir::data
