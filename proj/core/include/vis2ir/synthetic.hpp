#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vis2ir/data.hpp"

namespace vis2ir::data {

/// Seeded recipe for one synthetic co-registered pair.
///
/// The visible image is a smooth tinted gradient with two flat rectangles and
/// `hotspot_count` marker disks. The infrared image is a closed-form function of it:
///   ir = clamp(blur(1 - luma(visible), blur_radius) + sum_k A * exp(-d_k^2 / (2 s_k^2)), 0, 1)
/// where each bump is centred on a marker disk and s_k = radius_k / 1.5.
struct SynthesisRecipe {
  std::uint64_t seed = 1;
  int height = 32;
  int width = 64;
  int hotspot_count = 3;
  double blur_radius = 1.0;  // Gaussian sigma in pixels; 0 disables blurring

  void validate() const;
  friend bool operator==(const SynthesisRecipe&, const SynthesisRecipe&) = default;
};

struct Hotspot {
  double cy = 0.0;
  double cx = 0.0;
  double radius = 0.0;  // marker disk radius in pixels
  double amplitude = 0.0;
};

struct SyntheticPair {
  PairedSample sample;
  std::vector<Hotspot> hotspots;
};

inline constexpr double kHotspotAmplitude = 0.35;

SyntheticPair synthesize(const SynthesisRecipe& recipe, ValueRange range = kSignedUnit, std::string id = {});
PairedSample synthesize_pair(const SynthesisRecipe& recipe, ValueRange range = kSignedUnit);

/// Infrared target for a visible image in [0, 1] given the hotspot geometry.
ImageBuf infrared_from_visible(const ImageBuf& visible_unit, const std::vector<Hotspot>& hotspots, double blur_radius);

/// Separable Gaussian blur with reflect borders; sigma 0 returns the input unchanged.
ImageBuf gaussian_blur(const ImageBuf& img, double sigma);

/// `count` pairs with ids pair_0000.. and per-pair seeds derived from `base.seed`.
Dataset synthesize_dataset(const SynthesisRecipe& base, int count, Direction direction = Direction::visible_to_infrared,
                           ValueRange range = kSignedUnit);

/// SplitMix64 finaliser of (a, b); used to derive independent seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace vis2ir::data
