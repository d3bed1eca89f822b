#include <gtest/gtest.h>

#include <fstream>

#include "support.hpp"
#include "vis2ir/data.hpp"
#include "vis2ir/error.hpp"
#include "vis2ir/synthetic.hpp"

using namespace vis2ir;
namespace fs = std::filesystem;

namespace {

io::RawImage gray_raw(int h, int w, std::vector<std::uint8_t> px) { return {1, h, w, std::move(px)}; }

data::Dataset small_dataset(int count) {
  data::SynthesisRecipe r;
  r.height = 16;
  r.width = 24;
  return data::synthesize_dataset(r, count);
}

}  // namespace

TEST(Normalize, EndpointsMapOntoSignedUnit) {
  const auto img = data::normalize(gray_raw(1, 3, {0, 255, 128}));
  EXPECT_EQ(img.at(0, 0, 0), -1.0);
  EXPECT_EQ(img.at(0, 0, 1), 1.0);
  EXPECT_NEAR(img.at(0, 0, 2), 128.0 / 127.5 - 1.0, 1e-15);
  const double mid[] = {0.0, 127.5, 255.0};
  const auto m = data::normalize(mid, 1, 1, 3, {0.0, 255.0});
  EXPECT_NEAR(m.at(0, 0, 1), 0.0, 1e-15);
}

TEST(Normalize, DeclaredUnitRangeAndRejection) {
  const double v[] = {0.0, 0.5, 1.0};
  const auto img = data::normalize(v, 1, 1, 3, kUnit);
  EXPECT_EQ(img.at(0, 0, 0), -1.0);
  EXPECT_EQ(img.at(0, 0, 1), 0.0);
  EXPECT_EQ(img.at(0, 0, 2), 1.0);
  const double bad[] = {0.0, 1.5};
  EXPECT_THROW(data::normalize(bad, 1, 1, 2, kUnit), PreconditionError);
  EXPECT_THROW(data::normalize(v, 1, 1, 2, kUnit), PreconditionError);
}

TEST(Normalize, RoundTripWithinOneLevel) {
  std::mt19937_64 rng(3);
  io::RawImage raw{3, 5, 7, {}};
  for (int i = 0; i < 3 * 5 * 7; ++i) raw.pixels.push_back(static_cast<std::uint8_t>(rng() % 256));
  const auto img = data::normalize(raw);
  EXPECT_EQ(data::denormalize(img), raw);
  // Arbitrary in-range values come back within one 8-bit level.
  ImageBuf noisy(test::random_tensor({1, 1, 4, 4}, 9), kSignedUnit);
  const auto back = data::normalize(data::denormalize(noisy));
  for (std::size_t i = 0; i < 16; ++i) EXPECT_LE(std::abs(back.pixels[i] - noisy.pixels[i]), 2.0 / 255.0);
}

TEST(PadCrop, ExampleExtent) {
  ImageBuf img(1, 100, 100, kSignedUnit);
  const auto [padded, rec] = data::pad_to_multiple(img, 32);
  EXPECT_EQ(padded.height(), 128);
  EXPECT_EQ(padded.width(), 128);
  EXPECT_EQ(rec.pad_bottom, 28);
  EXPECT_EQ(rec.pad_right, 28);
}

TEST(PadCrop, RoundTripProperty) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 60; ++trial) {
    const int h = 1 + static_cast<int>(rng() % 70);
    const int w = 1 + static_cast<int>(rng() % 70);
    const int m = 1 << (rng() % 6);
    const int c = rng() % 2 ? 3 : 1;
    ImageBuf img(test::random_tensor({1, c, h, w}, rng()), kSignedUnit);
    const auto [padded, rec] = data::pad_to_multiple(img, m);
    ASSERT_EQ(padded.height() % m, 0);
    ASSERT_EQ(padded.width() % m, 0);
    ASSERT_LT(padded.height() - h, m);
    ASSERT_LT(padded.width() - w, m);
    // The original region is untouched and cropping restores the input exactly.
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) ASSERT_EQ(padded.at(0, y, x), img.at(0, y, x));
    EXPECT_EQ(data::crop_back(padded, rec), img);
  }
}

TEST(Pyramid, ExtentsAreCeilHalves) {
  for (int h = 8; h <= 257; h += 7) {
    const int w = 265 - h;
    ImageBuf img(1, h, w, kSignedUnit, 0.3);
    const auto p = data::make_pyramid(img, 3);
    ASSERT_EQ(p.size(), 3u);
    for (int j = 0; j < 3; ++j) {
      EXPECT_EQ(p.factors[static_cast<std::size_t>(j)], 1 << j);
      EXPECT_EQ(p.levels[static_cast<std::size_t>(j)].height(), data::pyramid_extent(h, j));
      EXPECT_EQ(data::pyramid_extent(h, j), (h + (1 << j) - 1) >> j);
      EXPECT_EQ(p.levels[static_cast<std::size_t>(j)].width(), (w + (1 << j) - 1) >> j);
      for (double v : p.levels[static_cast<std::size_t>(j)].pixels.values()) ASSERT_NEAR(v, 0.3, 1e-15);
    }
  }
}

TEST(Pyramid, BatchVersionAgreesWithImageVersion) {
  const Tensor t = test::random_tensor({1, 3, 13, 10}, 4);
  const auto a = data::make_pyramid(ImageBuf(t, kSignedUnit), 3);
  const auto b = data::make_pyramid(Var::constant(t), 3);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(a.levels[j].pixels, b[j].value());
}

TEST(Dataset, WriteThenLoadInIdOrder) {
  test::TempDir dir("ds");
  const auto ds = small_dataset(8);
  data::write_dataset(ds, dir.path());
  data::DatasetManifest m;
  m.root = dir.path();
  const auto loaded = data::load_paired_dataset(m);
  ASSERT_EQ(loaded.size(), 8u);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(loaded[i].id, ds[i].id);
    EXPECT_EQ(loaded[i].label_text, ds[i].label_text);
    EXPECT_EQ(loaded[i].visible.channels(), 3);
    EXPECT_EQ(loaded[i].infrared.channels(), 1);
    for (std::size_t k = 0; k < ds[i].infrared.pixels.numel(); ++k)
      ASSERT_LE(std::abs(loaded[i].infrared.pixels[k] - ds[i].infrared.pixels[k]), 1.0 / 255.0 + 1e-12);
  }
  for (std::size_t i = 1; i < 8; ++i) EXPECT_LT(loaded[i - 1].id, loaded[i].id);
}

TEST(Dataset, DirectionSwapsRoles) {
  test::TempDir dir("swap");
  data::write_dataset(small_dataset(4), dir.path());
  data::DatasetManifest fwd;
  fwd.root = dir.path();
  data::DatasetManifest rev = fwd;
  rev.direction = data::Direction::infrared_to_visible;
  data::write_manifest(dir / "rev.json", rev);
  const auto a = data::load_paired_dataset(fwd);
  const auto b = data::load_paired_dataset(data::read_manifest(dir / "rev.json"));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].source(), b[i].target());
    EXPECT_EQ(a[i].target(), b[i].source());
  }
}

TEST(Dataset, MissingCounterpartNamesTheId) {
  test::TempDir dir("missing");
  data::write_dataset(small_dataset(3), dir.path());
  fs::remove(dir / "infrared" / "pair_0001.png");
  data::DatasetManifest m;
  m.root = dir.path();
  try {
    data::load_paired_dataset(m);
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("pair_0001"), std::string::npos) << e.what();
  }
}

TEST(Dataset, ExtentMismatchIsRejected) {
  test::TempDir dir("extent");
  data::write_dataset(small_dataset(2), dir.path());
  io::write_png(dir / "infrared" / "pair_0000.png", gray_raw(2, 2, {0, 0, 0, 0}));
  data::DatasetManifest m;
  m.root = dir.path();
  EXPECT_THROW(data::load_paired_dataset(m), PreconditionError);
}

TEST(Manifest, UnknownKeyAndRelativeRoot) {
  test::TempDir dir("manifest");
  {
    std::ofstream(dir / "a.json") << R"({"root": "sub", "direction": "infrared_to_visible"})";
    std::ofstream(dir / "b.json") << R"({"root": ".", "colour": "red"})";
  }
  const auto m = data::read_manifest(dir / "a.json");
  EXPECT_EQ(m.root, dir.path() / "sub");
  EXPECT_EQ(m.direction, data::Direction::infrared_to_visible);
  EXPECT_THROW(data::read_manifest(dir / "b.json"), ConfigError);
  EXPECT_THROW(data::read_manifest(dir / "nope.json"), IoError);
}

TEST(Manifest, ExplicitIdsSelectSubset) {
  test::TempDir dir("ids");
  data::write_dataset(small_dataset(4), dir.path());
  data::DatasetManifest m;
  m.root = dir.path();
  m.ids = {"pair_0003", "pair_0001"};
  const auto ds = data::load_paired_dataset(m);
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds[0].id, "pair_0001");
  EXPECT_EQ(ds[1].id, "pair_0003");
}

TEST(Image, ChannelConversion) {
  ImageBuf rgb(3, 2, 2, kUnit);
  rgb.at(0, 0, 0) = 1.0;
  const auto y = to_channels(rgb, 1);
  EXPECT_NEAR(y.at(0, 0, 0), 0.299, 1e-12);
  EXPECT_EQ(to_channels(y, 3).channels(), 3);
  const auto r = remap(ImageBuf(1, 1, 1, kUnit, 0.25), kSignedUnit);
  EXPECT_EQ(r.at(0, 0, 0), -0.5);
}
