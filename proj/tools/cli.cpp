#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>
#include <sstream>

#include "vis2ir/checkpoint.hpp"
#include "vis2ir/config.hpp"
#include "vis2ir/detection.hpp"
#include "vis2ir/error.hpp"
#include "vis2ir/metrics.hpp"
#include "vis2ir/pipeline.hpp"
#include "vis2ir/png_io.hpp"
#include "vis2ir/superres.hpp"
#include "vis2ir/synthetic.hpp"
#include "vis2ir/training.hpp"

namespace vis2ir::cli {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> files_with_extension(const fs::path& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext) names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  return names;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
  if (!out) throw IoError("cannot write " + p.string());
}

data::Dataset run_dataset(const config::RunConfig& cfg) {
  if (!cfg.data.manifest.empty()) {
    return data::load_paired_dataset(data::read_manifest(cfg.data.manifest), cfg.generator.value_range);
  }
  return data::synthesize_dataset(cfg.synthetic, cfg.data.synthetic_count, cfg.data.direction,
                                  cfg.generator.value_range);
}

std::string hex(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string resume;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  config::RunConfig cfg = config::load_run_config(a.config);
  const data::Dataset dataset = run_dataset(cfg);
  if (dataset.empty()) throw PreconditionError("training dataset is empty");

  training::TrainState state;
  if (!a.resume.empty()) {
    state = training::load_checkpoint(a.resume);
    if (!(state.config == cfg.train) || !(state.generator_spec == cfg.generator) ||
        !(state.discriminator_spec == cfg.discriminator)) {
      err << "warning: checkpoint settings differ from " << a.config << "; continuing with the checkpoint's\n";
    }
    out << "resuming at step " << state.step << " of " << state.config.total_steps() << "\n";
  } else {
    state = training::TrainState::initialize(cfg.generator, cfg.discriminator, cfg.train);
  }

  const fs::path dir = cfg.output.dir;
  fs::create_directories(dir);
  write_text(dir / "config.ini", config::to_ini(cfg));
  std::ofstream log(dir / "train_log.jsonl", a.resume.empty() ? std::ios::trunc : std::ios::app);
  if (!log) throw IoError("cannot open training log in " + dir.string());

  training::ScheduleOptions opts;
  opts.log = &log;
  opts.snapshot_dir = dir / "snapshots";
  opts.on_step = [&](const training::StepRecord& r, const training::TrainState& s) {
    if (r.step % 50 == 0 || r.step == s.config.total_steps()) {
      out << "step " << r.step << "/" << s.config.total_steps() << " [" << training::to_string(r.stage)
          << "] gan_g=" << r.report.gan_g << " gan_d=" << r.report.gan_d << " fm=" << r.report.fm << "\n";
    }
  };
  std::optional<training::StepRecord> last;
  auto progress = opts.on_step;
  opts.on_step = [&](const training::StepRecord& r, const training::TrainState& s) {
    last = r;
    progress(r, s);
  };
  training::run_schedule(state, dataset, opts);

  const fs::path ckpt = dir / "checkpoint.ckpt";
  training::save_checkpoint(ckpt, state);
  nlohmann::ordered_json summary;
  summary["steps"] = state.step;
  summary["stage1_steps"] = state.config.stage1_steps;
  summary["joint_steps"] = state.config.joint_steps;
  summary["dataset_size"] = dataset.size();
  summary["generator_parameters"] = parameter_count(state.generator.parameters());
  summary["generator_hash"] = hex(parameter_hash(state.generator.parameters()));
  if (last) {
    summary["final"] = {{"gan_g", last->report.gan_g},
                        {"gan_d", last->report.gan_d},
                        {"fm", last->report.fm},
                        {"total_g", last->report.total_g}};
  }
  summary["checkpoint"] = ckpt.filename().string();
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  out << "trained to step " << state.step << "; checkpoint " << ckpt.string() << "\n";
  return kExitOk;
}

// ---- translate ------------------------------------------------------------

struct TranslateArgs {
  std::string checkpoint;
  std::string input;
  std::string output;
  std::string superres;
};

int cmd_translate(const TranslateArgs& a, std::ostream& out, std::ostream& err) {
  const training::TrainState state = training::load_checkpoint(a.checkpoint);
  std::optional<superres::SrState> sr;
  if (!a.superres.empty()) sr = superres::load_sr_checkpoint(a.superres);
  const auto names = files_with_extension(a.input, ".png");
  fs::create_directories(a.output);
  std::size_t translated = 0;
  std::size_t skipped = 0;
  for (const auto& name : names) {
    io::RawImage raw;
    try {
      raw = io::read_png(fs::path(a.input) / name);
    } catch (const IoError& e) {
      err << "warning: skipping " << name << ": " << e.what() << "\n";
      ++skipped;
      continue;
    }
    const ImageBuf src = data::normalize(raw, state.generator_spec.value_range);
    const ImageBuf result = data::translate_image(state.generator, src, sr ? &sr->net : nullptr);
    io::write_png(fs::path(a.output) / name, data::denormalize(result));
    ++translated;
  }
  out << translated << " translated, " << skipped << " skipped\n";
  return kExitOk;
}

// ---- evaluate -------------------------------------------------------------

struct EvaluateArgs {
  std::string generated;
  std::string reference;
  std::string output;
};

void emit_report(const metrics::MetricsReport& report, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << report.to_json();
  } else {
    write_text(path, report.to_json());
  }
}

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out, std::ostream& err) {
  const auto gen = files_with_extension(a.generated, ".png");
  const auto ref = files_with_extension(a.reference, ".png");
  std::vector<std::string> matched;
  std::vector<std::string> unmatched;
  std::set_intersection(gen.begin(), gen.end(), ref.begin(), ref.end(), std::back_inserter(matched));
  std::set_symmetric_difference(gen.begin(), gen.end(), ref.begin(), ref.end(), std::back_inserter(unmatched));
  if (matched.empty()) {
    err << "error: no filenames in common between " << a.generated << " and " << a.reference << "\n";
    return kExitUser;
  }
  std::vector<metrics::ImageScore> scores;
  std::vector<std::string> excluded = unmatched;
  std::vector<std::string> warnings;
  for (const auto& u : unmatched) warnings.push_back("unmatched file " + u + " excluded");
  for (const auto& name : matched) {
    try {
      const ImageBuf r = data::normalize(io::read_png(fs::path(a.reference) / name), kUnit);
      const ImageBuf g = to_channels(data::normalize(io::read_png(fs::path(a.generated) / name), kUnit), r.channels());
      scores.push_back({name, metrics::ssim(g, r), metrics::psnr(g, r)});
    } catch (const std::exception& e) {
      excluded.push_back(name);
      warnings.push_back(name + ": " + e.what());
    }
  }
  metrics::MetricsReport report = metrics::summarize_images(std::move(scores));
  std::sort(excluded.begin(), excluded.end());
  report.excluded = excluded;
  report.warnings = warnings;
  for (const auto& w : warnings) err << "warning: " << w << "\n";
  emit_report(report, a.output, out);
  if (!a.output.empty() && report.mean_ssim) {
    out << "scored " << report.sample_count << " pairs: mean SSIM " << *report.mean_ssim << ", mean PSNR "
        << *report.mean_psnr << " dB\n";
  }
  return kExitOk;
}

// ---- eval-detections ------------------------------------------------------

struct DetectionArgs {
  std::string predictions;
  std::string ground_truth;
  std::string output;
  double iou = 0.5;
  std::string convention = "all_point";
};

std::vector<metrics::DetectionRecord> read_label_dir(const fs::path& dir, bool with_score) {
  std::vector<metrics::DetectionRecord> out;
  for (const auto& name : files_with_extension(dir, ".txt")) {
    const fs::path p = dir / name;
    auto recs = metrics::parse_labels(read_text(p), p.stem().string(), with_score);
    out.insert(out.end(), recs.begin(), recs.end());
  }
  return out;
}

int cmd_eval_detections(const DetectionArgs& a, std::ostream& out, std::ostream& err) {
  if (!fs::is_directory(a.ground_truth)) {
    err << "error: ground-truth directory " << a.ground_truth << " does not exist\n";
    return kExitUser;
  }
  const auto gts = read_label_dir(a.ground_truth, false);
  const auto preds = read_label_dir(a.predictions, true);
  const auto det = metrics::mean_average_precision(preds, gts, a.iou, metrics::parse_ap_convention(a.convention));
  const metrics::MetricsReport report = metrics::summarize_detections(det);
  for (const auto& w : report.warnings) err << "warning: " << w << "\n";
  emit_report(report, a.output, out);
  if (!a.output.empty()) out << "mAP@" << a.iou << ": " << det.map * 100.0 << " %\n";
  return kExitOk;
}

// ---- gen-synthetic --------------------------------------------------------

struct SyntheticArgs {
  std::string config;
  std::string output;
  int count = 8;
  std::optional<std::uint64_t> seed;
  std::optional<int> height;
  std::optional<int> width;
  std::optional<int> hotspots;
  std::optional<double> blur;
  std::string direction = "visible_to_infrared";
};

int cmd_gen_synthetic(const SyntheticArgs& a, std::ostream& out, std::ostream&) {
  data::SynthesisRecipe recipe;
  if (!a.config.empty()) recipe = config::load_run_config(a.config).synthetic;
  if (a.seed) recipe.seed = *a.seed;
  if (a.height) recipe.height = *a.height;
  if (a.width) recipe.width = *a.width;
  if (a.hotspots) recipe.hotspot_count = *a.hotspots;
  if (a.blur) recipe.blur_radius = *a.blur;
  if (a.count < 0) throw ConfigError("--count", "must be >= 0");
  const auto direction = data::parse_direction(a.direction);
  const data::Dataset ds = data::synthesize_dataset(recipe, a.count, direction);
  data::write_dataset(ds, a.output);
  data::DatasetManifest m;
  m.root = ".";
  m.direction = direction;
  for (const auto& s : ds) m.ids.push_back(s.id);
  data::write_manifest(fs::path(a.output) / "manifest.json", m);
  out << "wrote " << ds.size() << " synthetic pairs to " << a.output << "\n";
  return kExitOk;
}

// ---- train-sr -------------------------------------------------------------

struct TrainSrArgs {
  std::string config;
};

int cmd_train_sr(const TrainSrArgs& a, std::ostream& out, std::ostream&) {
  const config::RunConfig cfg = config::load_run_config(a.config);
  const data::Dataset dataset = run_dataset(cfg);
  std::vector<ImageBuf> highs;
  for (const auto& s : dataset) highs.push_back(s.target());
  const auto pairs = superres::make_sr_pairs(highs);

  superres::SrState state = superres::SrState::initialize(cfg.superres.spec, cfg.superres.train);
  const double before = superres::sr_l1(state.net, pairs);
  fs::create_directories(cfg.output.dir);
  std::ofstream log(cfg.output.dir / "sr_log.jsonl", std::ios::trunc);
  superres::train_sr(state, pairs, [&](const superres::SrStepReport& r) {
    log << nlohmann::json{{"step", r.step}, {"l1", r.l1}, {"fm", r.fm}, {"gan_d", r.gan_d}, {"total", r.total}}.dump()
        << '\n';
  });
  const double after = superres::sr_l1(state.net, pairs);
  superres::SrNetwork bicubic_only = superres::SrNetwork::build(
      [&] {
        auto s = cfg.superres.spec;
        s.zero_init_residual = true;
        return s;
      }(),
      0);
  const fs::path ckpt = cfg.superres.checkpoint.empty() ? cfg.output.dir / "superres.ckpt" : cfg.superres.checkpoint;
  superres::save_sr_checkpoint(ckpt, state);
  out << "superres L1 on training pairs: init " << before << ", trained " << after << ", bicubic "
      << superres::sr_l1(bicubic_only, pairs) << "; checkpoint " << ckpt.string() << "\n";
  return kExitOk;
}

// ---- export ---------------------------------------------------------------

struct ExportArgs {
  std::string checkpoint;
  std::string manifest;
  std::string output;
  std::string superres;
};

int cmd_export(const ExportArgs& a, std::ostream& out, std::ostream& err) {
  const training::TrainState state = training::load_checkpoint(a.checkpoint);
  std::optional<superres::SrState> sr;
  if (!a.superres.empty()) sr = superres::load_sr_checkpoint(a.superres);
  const data::Dataset ds = data::load_paired_dataset(data::read_manifest(a.manifest), state.generator_spec.value_range);
  const auto summary = data::export_detection_dataset(ds, state.generator, a.output, sr ? &sr->net : nullptr);
  for (const auto& w : summary.warnings) err << "warning: " << w << "\n";
  out << summary.exported << " exported, " << summary.skipped.size() << " skipped (no labels)\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Visible-to-infrared translation toolkit", "vis2ir"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Run the two-stage training schedule from a config file");
  c_train->add_option("config", train.config, "INI config file")->required();
  c_train->add_option("--resume", train.resume, "Continue from a snapshot or checkpoint");

  TranslateArgs translate;
  auto* c_translate = app.add_subcommand("translate", "Translate every PNG in a directory");
  c_translate->add_option("--checkpoint", translate.checkpoint, "Translator checkpoint")->required();
  c_translate->add_option("--input", translate.input, "Directory of source images")->required();
  c_translate->add_option("--output", translate.output, "Destination directory")->required();
  c_translate->add_option("--superres", translate.superres, "Super-resolution checkpoint; doubles output size");

  EvaluateArgs evaluate;
  auto* c_eval = app.add_subcommand("evaluate", "Mean SSIM/PSNR between generated and reference images");
  c_eval->add_option("--generated", evaluate.generated)->required();
  c_eval->add_option("--reference", evaluate.reference)->required();
  c_eval->add_option("--output", evaluate.output, "Report path (default: stdout)");

  DetectionArgs det;
  auto* c_det = app.add_subcommand("eval-detections", "mAP of detection files against ground truth");
  c_det->add_option("--pred", det.predictions, "Directory of <image>.txt with scored detections")->required();
  c_det->add_option("--gt", det.ground_truth, "Directory of <image>.txt ground-truth labels")->required();
  c_det->add_option("--iou", det.iou, "IoU threshold")->check(CLI::Range(0.0, 1.0));
  c_det->add_option("--convention", det.convention, "all_point or voc11");
  c_det->add_option("--output", det.output, "Report path (default: stdout)");

  SyntheticArgs syn;
  auto* c_syn = app.add_subcommand("gen-synthetic", "Write seeded synthetic pairs in the dataset layout");
  c_syn->add_option("--out", syn.output)->required();
  c_syn->add_option("--count", syn.count);
  c_syn->add_option("--config", syn.config, "Take the [synthetic] recipe from a config file");
  c_syn->add_option("--seed", syn.seed);
  c_syn->add_option("--height", syn.height);
  c_syn->add_option("--width", syn.width);
  c_syn->add_option("--hotspots", syn.hotspots);
  c_syn->add_option("--blur", syn.blur);
  c_syn->add_option("--direction", syn.direction);

  TrainSrArgs train_sr;
  auto* c_sr = app.add_subcommand("train-sr", "Train the 2x super-resolution stage on target-modality images");
  c_sr->add_option("config", train_sr.config, "INI config file")->required();

  ExportArgs exp;
  auto* c_exp = app.add_subcommand("export", "Write a translated detection dataset with copied labels");
  c_exp->add_option("--checkpoint", exp.checkpoint)->required();
  c_exp->add_option("--manifest", exp.manifest, "Dataset manifest (JSON)")->required();
  c_exp->add_option("--out", exp.output)->required();
  c_exp->add_option("--superres", exp.superres);

  auto* c_defaults = app.add_subcommand("config-defaults", "Print every config key with its default");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUser;
  }

  try {
    if (*c_train) return cmd_train(train, out, err);
    if (*c_translate) return cmd_translate(translate, out, err);
    if (*c_eval) return cmd_evaluate(evaluate, out, err);
    if (*c_det) return cmd_eval_detections(det, out, err);
    if (*c_syn) return cmd_gen_synthetic(syn, out, err);
    if (*c_sr) return cmd_train_sr(train_sr, out, err);
    if (*c_exp) return cmd_export(exp, out, err);
    if (*c_defaults) {
      out << config::to_ini(config::RunConfig{});
      return kExitOk;
    }
  } catch (const NonFiniteLossError& e) {
    err << "aborted: " << e.what() << "\n";
    if (!e.snapshot().empty()) err << "diagnostic snapshot: " << e.snapshot() << "\n";
    return kExitRuntime;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUser;
  } catch (const PreconditionError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUser;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUser;
  } catch (const IntegrityError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUser;
  } catch (const VersionError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUser;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUser;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUser;
}

}  // namespace vis2ir::cli
