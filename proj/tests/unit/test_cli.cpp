#include <gtest/gtest.h>

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "cli.hpp"
#include "support.hpp"
#include "vis2ir/data.hpp"
#include "vis2ir/metrics.hpp"
#include "vis2ir/png_io.hpp"
#include "vis2ir/synthetic.hpp"

using namespace vis2ir;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> listing(const fs::path& dir) {
  std::vector<std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), dir).string());
  std::sort(out.begin(), out.end());
  return out;
}

// A run small enough to train in well under a second.
std::string tiny_config(const std::string& extra = "") {
  return "[generator]\ninput_channels = 3\noutput_channels = 1\nbase_width = 8\ng1_downsamples = 1\n"
         "g1_res_blocks = 1\ng2_res_blocks = 1\nenhancer_count = 1\n"
         "[discriminator]\nn_scales = 2\nconv_layers = 2\nbase_width = 4\n"
         "[train]\nstage1_steps = 1\njoint_steps = 2\nbatch_size = 2\nheight = 16\nwidth = 32\nsnapshot_every = 1\n"
         "[data]\nsynthetic_count = 2\n"
         "[synthetic]\nheight = 16\nwidth = 32\n"
         "[superres]\nres_blocks = 1\nbase_width = 4\nsteps = 2\nbatch_size = 2\n"
         "[output]\ndir = out\n" +
         extra;
}

void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << text;
}

}  // namespace

TEST(Cli, GenSyntheticIsReproducible) {
  test::TempDir dir("cli_syn");
  const auto a = run({"gen-synthetic", "--out", (dir / "a").string(), "--count", "8", "--seed", "1"});
  const auto b = run({"gen-synthetic", "--out", (dir / "b").string(), "--count", "8", "--seed", "1"});
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  const auto files = listing(dir / "a");
  ASSERT_EQ(files, listing(dir / "b"));
  EXPECT_EQ(std::count_if(files.begin(), files.end(), [](const std::string& f) { return f.rfind("visible/", 0) == 0; }), 8);
  for (const auto& f : files) EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  const auto ds = data::load_paired_dataset(data::read_manifest(dir / "a" / "manifest.json"));
  EXPECT_EQ(ds.size(), 8u);
}

TEST(Cli, GenSyntheticZeroCountIsAValidEmptyDataset) {
  test::TempDir dir("cli_zero");
  const auto r = run({"gen-synthetic", "--out", (dir / "z").string(), "--count", "0"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "z" / "manifest.json"));
  EXPECT_EQ(data::load_paired_dataset(data::read_manifest(dir / "z" / "manifest.json")).size(), 0u);
}

TEST(Cli, EvaluateIdentityAndDisjoint) {
  test::TempDir dir("cli_eval");
  ASSERT_EQ(run({"gen-synthetic", "--out", (dir / "d").string(), "--count", "2", "--height", "16", "--width", "16"}).code, 0);
  const auto same = run({"evaluate", "--generated", (dir / "d" / "infrared").string(), "--reference",
                         (dir / "d" / "infrared").string()});
  ASSERT_EQ(same.code, 0) << same.err;
  const auto j = nlohmann::json::parse(same.out);
  EXPECT_EQ(j.at("mean_ssim").get<double>(), 1.0);
  EXPECT_EQ(j.at("mean_psnr").get<double>(), 100.0);
  EXPECT_EQ(j.at("sample_count").get<int>(), 2);

  fs::create_directories(dir / "other");
  fs::copy_file(dir / "d" / "infrared" / "pair_0000.png", dir / "other" / "renamed.png");
  const auto disjoint = run({"evaluate", "--generated", (dir / "other").string(), "--reference",
                             (dir / "d" / "infrared").string()});
  EXPECT_EQ(disjoint.code, 1);
  EXPECT_NE(disjoint.err.find("no filenames in common"), std::string::npos);
}

TEST(Cli, EvaluateMatchesDirectMetricCallsAndFlagsUnmatched) {
  test::TempDir dir("cli_eval2");
  fs::create_directories(dir / "gen");
  fs::create_directories(dir / "ref");
  io::RawImage ref{1, 16, 16, std::vector<std::uint8_t>(256)};
  for (int i = 0; i < 256; ++i) ref.pixels[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(i);
  io::RawImage gen = ref;
  for (auto& p : gen.pixels) p = static_cast<std::uint8_t>(std::min(255, p + 9));
  io::write_png(dir / "ref" / "a.png", ref);
  io::write_png(dir / "gen" / "a.png", gen);
  io::write_png(dir / "gen" / "extra.png", gen);
  const auto r = run({"evaluate", "--generated", (dir / "gen").string(), "--reference", (dir / "ref").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  const auto g = data::normalize(gen, kUnit), f = data::normalize(ref, kUnit);
  EXPECT_NEAR(j.at("mean_ssim").get<double>(), metrics::ssim(g, f), 1e-12);
  EXPECT_NEAR(j.at("mean_psnr").get<double>(), metrics::psnr(g, f), 1e-12);
  EXPECT_EQ(j.at("excluded"), nlohmann::json::array({"extra.png"}));
  EXPECT_NE(r.err.find("extra.png"), std::string::npos);
}

TEST(Cli, EvalDetections) {
  test::TempDir dir("cli_det");
  write_file(dir / "gt" / "img1.txt", "0 0.5 0.5 0.2 0.2\n1 0.3 0.3 0.1 0.1\n");
  write_file(dir / "pred" / "img1.txt", "0 0.5 0.5 0.2 0.2 0.9\n1 0.3 0.3 0.1 0.1 0.8\n");
  const auto r = run({"eval-detections", "--pred", (dir / "pred").string(), "--gt", (dir / "gt").string(), "--output",
                      (dir / "report.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("mAP@0.5: 100 %"), std::string::npos) << r.out;
  EXPECT_EQ(nlohmann::json::parse(slurp(dir / "report.json")).at("map50_percent").get<double>(), 100.0);

  const auto missing = run({"eval-detections", "--pred", (dir / "pred").string(), "--gt", (dir / "nope").string()});
  EXPECT_EQ(missing.code, 1);

  write_file(dir / "bad" / "img1.txt", "0 0.5 0.5 0.2\n");
  const auto bad = run({"eval-detections", "--pred", (dir / "pred").string(), "--gt", (dir / "bad").string()});
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.err.find("img1:1"), std::string::npos) << bad.err;
}

TEST(Cli, TrainRejectsUnknownKeyByName) {
  test::TempDir dir("cli_badkey");
  write_file(dir / "run.ini", tiny_config("[train]\nlearning_rate = 3\n"));
  const auto r = run({"train", (dir / "run.ini").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("train.learning_rate"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("run.ini:"), std::string::npos) << r.err;
  EXPECT_EQ(run({"train", (dir / "absent.ini").string()}).code, 1);
  EXPECT_EQ(run({"no-such-command"}).code, 1);
}

TEST(Cli, TrainTranslateAndResume) {
  test::TempDir dir("cli_train");
  write_file(dir / "run.ini", tiny_config());
  const auto r = run({"train", (dir / "run.ini").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const fs::path out = dir / "out";
  for (const char* f : {"checkpoint.ckpt", "train_log.jsonl", "summary.json", "config.ini", "snapshots/step_000001.ckpt"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  const auto summary = nlohmann::json::parse(slurp(out / "summary.json"));
  EXPECT_EQ(summary.at("steps").get<int>(), 3);

  // Resuming from the step-1 snapshot reproduces the final checkpoint byte for byte.
  const std::string full = slurp(out / "checkpoint.ckpt");
  const auto resumed = run({"train", (dir / "run.ini").string(), "--resume", (out / "snapshots" / "step_000001.ckpt").string()});
  ASSERT_EQ(resumed.code, 0) << resumed.err;
  EXPECT_EQ(slurp(out / "checkpoint.ckpt"), full);

  // Translate: same filenames and extents; empty directory reports zero.
  ASSERT_EQ(run({"gen-synthetic", "--out", (dir / "ds").string(), "--count", "2", "--height", "12", "--width", "20"}).code, 0);
  const auto t = run({"translate", "--checkpoint", (out / "checkpoint.ckpt").string(), "--input",
                      (dir / "ds" / "visible").string(), "--output", (dir / "tr").string()});
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_NE(t.out.find("2 translated, 0 skipped"), std::string::npos) << t.out;
  const auto img = io::read_png(dir / "tr" / "pair_0001.png");
  EXPECT_EQ(img.height, 12);
  EXPECT_EQ(img.width, 20);
  EXPECT_EQ(img.channels, 1);

  fs::create_directories(dir / "empty");
  const auto e = run({"translate", "--checkpoint", (out / "checkpoint.ckpt").string(), "--input",
                      (dir / "empty").string(), "--output", (dir / "tr0").string()});
  EXPECT_EQ(e.code, 0) << e.err;
  EXPECT_NE(e.out.find("0 translated"), std::string::npos);

  // Unreadable images are skipped with a warning.
  write_file(dir / "ds" / "visible" / "broken.png", "not a png");
  const auto s = run({"translate", "--checkpoint", (out / "checkpoint.ckpt").string(), "--input",
                      (dir / "ds" / "visible").string(), "--output", (dir / "tr2").string()});
  EXPECT_EQ(s.code, 0);
  EXPECT_NE(s.out.find("2 translated, 1 skipped"), std::string::npos) << s.out;
  EXPECT_NE(s.err.find("broken.png"), std::string::npos);
  fs::remove(dir / "ds" / "visible" / "broken.png");

  // Super-resolution doubles the output extent.
  const auto sr = run({"train-sr", (dir / "run.ini").string()});
  ASSERT_EQ(sr.code, 0) << sr.err;
  const auto t2 = run({"translate", "--checkpoint", (out / "checkpoint.ckpt").string(), "--input",
                       (dir / "ds" / "visible").string(), "--output", (dir / "sr").string(), "--superres",
                       (out / "superres.ckpt").string()});
  ASSERT_EQ(t2.code, 0) << t2.err;
  const auto big = io::read_png(dir / "sr" / "pair_0001.png");
  EXPECT_EQ(big.height, 24);
  EXPECT_EQ(big.width, 40);

  // Export copies labels verbatim next to translated images.
  const auto x = run({"export", "--checkpoint", (out / "checkpoint.ckpt").string(), "--manifest",
                      (dir / "ds" / "manifest.json").string(), "--out", (dir / "exp").string()});
  ASSERT_EQ(x.code, 0) << x.err;
  EXPECT_EQ(slurp(dir / "exp" / "labels" / "pair_0000.txt"), slurp(dir / "ds" / "labels" / "pair_0000.txt"));
  EXPECT_TRUE(fs::exists(dir / "exp" / "images" / "pair_0000.png"));
}

TEST(Cli, TranslateRejectsWrongCheckpointKind) {
  test::TempDir dir("cli_kind");
  write_file(dir / "junk.ckpt", "garbage");
  fs::create_directories(dir / "in");
  const auto r = run({"translate", "--checkpoint", (dir / "junk.ckpt").string(), "--input", (dir / "in").string(),
                      "--output", (dir / "o").string()});
  EXPECT_EQ(r.code, 1);
}

TEST(Cli, ConfigDefaultsParseBack) {
  const auto r = run({"config-defaults"});
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("[generator]"), std::string::npos);
  EXPECT_NE(r.out.find("lambda_fm = 10"), std::string::npos);
}
