#include <gtest/gtest.h>

#include "support.hpp"
#include "vis2ir/error.hpp"
#include "vis2ir/synthetic.hpp"

using namespace vis2ir;

TEST(Synthetic, SameSeedSamePair) {
  data::SynthesisRecipe r;
  r.seed = 42;
  const auto a = data::synthesize(r);
  const auto b = data::synthesize(r);
  EXPECT_EQ(a.sample.visible, b.sample.visible);
  EXPECT_EQ(a.sample.infrared, b.sample.infrared);
  EXPECT_EQ(a.sample.label_text, b.sample.label_text);
  r.seed = 43;
  EXPECT_NE(data::synthesize(r).sample.visible, a.sample.visible);
}

TEST(Synthetic, NoHotspotsNoBlurIsInvertedLuma) {
  data::SynthesisRecipe r;
  r.seed = 5;
  r.hotspot_count = 0;
  r.blur_radius = 0.0;
  const auto p = data::synthesize(r, kUnit);
  const auto& vis = p.sample.visible;
  for (int y = 0; y < r.height; ++y)
    for (int x = 0; x < r.width; ++x) {
      const double luma = 0.299 * vis.at(0, y, x) + 0.587 * vis.at(1, y, x) + 0.114 * vis.at(2, y, x);
      ASSERT_NEAR(p.sample.infrared.at(0, y, x), 1.0 - luma, 1e-12);
    }
}

TEST(Synthetic, InfraredPeaksOnAMarkerDisk) {
  for (std::uint64_t seed : {7, 8, 9, 10}) {
    data::SynthesisRecipe r;
    r.seed = seed;
    r.height = 64;
    r.width = 64;
    r.hotspot_count = 3;
    const auto p = data::synthesize(r, kUnit);
    ASSERT_EQ(p.hotspots.size(), 3u);
    int by = 0, bx = 0;
    double best = -1.0;
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x)
        if (p.sample.infrared.at(0, y, x) > best) {
          best = p.sample.infrared.at(0, y, x);
          by = y;
          bx = x;
        }
    bool inside = false;
    for (const auto& h : p.hotspots) {
      const double dy = by + 0.5 - h.cy, dx = bx + 0.5 - h.cx;
      inside = inside || dy * dy + dx * dx <= h.radius * h.radius;
    }
    EXPECT_TRUE(inside) << "seed " << seed << " peak at " << by << "," << bx;
  }
}

TEST(Synthetic, RangeAndRemapAgree) {
  data::SynthesisRecipe r;
  const auto unit = data::synthesize(r, kUnit);
  const auto sgn = data::synthesize(r, kSignedUnit);
  EXPECT_EQ(remap(unit.sample.infrared, kSignedUnit), sgn.sample.infrared);
  for (double v : sgn.sample.visible.pixels.values()) ASSERT_TRUE(v >= -1.0 && v <= 1.0);
}

TEST(Synthetic, LabelsParseAndCoverEveryObject) {
  data::SynthesisRecipe r;
  r.hotspot_count = 4;
  const auto p = data::synthesize(r, kSignedUnit, "x");
  const auto labels = p.sample.labels();
  ASSERT_TRUE(labels.has_value());
  ASSERT_EQ(labels->size(), 6u);
  int markers = 0;
  for (const auto& l : *labels) {
    EXPECT_TRUE(l.box.valid());
    EXPECT_EQ(l.image_id, "x");
    markers += l.class_id == 0;
  }
  EXPECT_EQ(markers, 4);
}

TEST(Synthetic, DatasetIdsAndSeeds) {
  data::SynthesisRecipe r;
  const auto ds = data::synthesize_dataset(r, 3, data::Direction::infrared_to_visible);
  ASSERT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds[2].id, "pair_0002");
  EXPECT_EQ(ds[0].source().channels(), 1);
  data::SynthesisRecipe r1 = r;
  r1.seed = data::mix_seed(r.seed, 1);
  EXPECT_EQ(ds[1].visible, data::synthesize_pair(r1).visible);
  EXPECT_NE(data::mix_seed(1, 0), data::mix_seed(1, 1));
}

TEST(Synthetic, RecipeValidation) {
  data::SynthesisRecipe r;
  r.height = 2;
  EXPECT_THROW(data::synthesize(r), ConfigError);
  r = {};
  r.blur_radius = -1.0;
  EXPECT_THROW(r.validate(), ConfigError);
}

TEST(Synthetic, BlurPreservesConstants) {
  ImageBuf c(1, 9, 11, kUnit, 0.4);
  const auto blurred = data::gaussian_blur(c, 1.7);
  for (double v : blurred.pixels.values()) ASSERT_NEAR(v, 0.4, 1e-12);
  ImageBuf img(test::random_tensor({1, 1, 6, 6}, 2), kUnit);
  EXPECT_EQ(data::gaussian_blur(img, 0.0), img);
}
