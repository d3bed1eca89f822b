#include <gtest/gtest.h>

#include <fstream>

#include "support.hpp"
#include "vis2ir/config.hpp"
#include "vis2ir/error.hpp"

using namespace vis2ir;

namespace {

std::string message_of(const std::string& text) {
  try {
    config::parse_run_config(text, "t.ini");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Config, DeskConfigLoads) {
  const auto cfg = config::load_run_config(VIS2IR_SOURCE_DIR "/configs/desk.ini");
  EXPECT_EQ(cfg.generator.input_channels, 3);
  EXPECT_EQ(cfg.generator.output_channels, 1);
  EXPECT_EQ(cfg.discriminator.input_channels, 4);
  EXPECT_EQ(cfg.train.stage1_steps, 400);
  EXPECT_EQ(cfg.train.joint_steps, 400);
  EXPECT_EQ(cfg.train.train_height, 32);
  EXPECT_EQ(cfg.train.train_width, 64);
  EXPECT_EQ(cfg.data.synthetic_count, 8);
  EXPECT_EQ(cfg.superres.spec.channels, 1);
  EXPECT_TRUE(cfg.output.dir.is_absolute());
}

TEST(Config, DefaultsAreValid) {
  config::RunConfig cfg;
  EXPECT_NO_THROW(cfg.finalize());
  const auto back = config::parse_run_config(config::to_ini(cfg), "defaults");
  EXPECT_EQ(config::to_ini(back), config::to_ini(cfg));
}

TEST(Config, RoundTripPreservesEveryValue) {
  const auto cfg = config::parse_run_config(
      "[generator]\nbase_width = 16\nvalue_range = 0, 1\n[loss]\nlambda_fm = 2.5\ngan_mode = log_likelihood\n"
      "[train]\nlr_g = 0.001\noptimizer = sgd\nflip = false\n[data]\ndirection = infrared_to_visible\n",
      "t.ini");
  EXPECT_EQ(cfg.generator.value_range, kUnit);
  EXPECT_EQ(cfg.train.weights.gan_mode, losses::GanMode::log_likelihood);
  EXPECT_EQ(cfg.train.optimizer, OptimizerKind::sgd);
  EXPECT_FALSE(cfg.train.flip);
  const auto back = config::parse_run_config(config::to_ini(cfg), "t2.ini");
  EXPECT_EQ(back.train, cfg.train);
  EXPECT_EQ(back.generator, cfg.generator);
  EXPECT_EQ(back.data.direction, cfg.data.direction);
}

TEST(Config, UnknownKeyNamesKeyAndLine) {
  const auto msg = message_of("# comment\n[train]\nseed = 3\nsede = 4\n");
  EXPECT_NE(msg.find("t.ini:4"), std::string::npos) << msg;
  EXPECT_NE(msg.find("train.sede"), std::string::npos) << msg;
}

TEST(Config, UnknownSectionAndMalformedLines) {
  EXPECT_NE(message_of("[trian]\n").find("t.ini:1"), std::string::npos);
  EXPECT_NE(message_of("seed = 1\n").find("outside"), std::string::npos);
  EXPECT_NE(message_of("[train]\nseed\n").find("t.ini:2"), std::string::npos);
  EXPECT_NE(message_of("[train\n").find("malformed"), std::string::npos);
}

TEST(Config, BadValuesNameTheField) {
  const auto msg = message_of("[train]\nbatch_size = eight\n");
  EXPECT_NE(msg.find("train.batch_size"), std::string::npos) << msg;
  EXPECT_NE(message_of("[train]\nflip = maybe\n").find("t.ini:2"), std::string::npos);
  EXPECT_NE(message_of("[generator]\nvalue_range = 1\n").find("value_range"), std::string::npos);
  EXPECT_FALSE(message_of("[train]\nheight = 33\n").empty());
  EXPECT_FALSE(message_of("[loss]\nlambda_fm = -1\n").empty());
}

TEST(Config, RelativePathsResolveAgainstConfigFile) {
  test::TempDir dir("cfg");
  {
    std::ofstream(dir / "r.ini") << "[data]\nmanifest = data/m.json\n[output]\ndir = runs/x\n";
  }
  const auto cfg = config::load_run_config(dir / "r.ini");
  EXPECT_EQ(cfg.data.manifest, dir.path() / "data/m.json");
  EXPECT_EQ(cfg.output.dir, dir.path() / "runs/x");
  EXPECT_THROW(config::load_run_config(dir / "missing.ini"), ConfigError);
}
