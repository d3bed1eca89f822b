#include "vis2ir/training.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <numeric>
#include <random>

#include "spec_json.hpp"
#include "vis2ir/checkpoint.hpp"
#include "vis2ir/error.hpp"
#include "vis2ir/ops.hpp"
#include "vis2ir/synthetic.hpp"

namespace vis2ir::training {

namespace {

constexpr std::uint64_t kDiscriminatorStream = 0xd15c;
constexpr std::uint64_t kShuffleStream = 0x5b0ff1e;
constexpr std::uint64_t kFlipStream = 0xf11b;
constexpr const char* kComponent = "translator";

std::vector<std::size_t> epoch_permutation(std::uint64_t seed, std::int64_t epoch, std::size_t n) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(data::mix_seed(data::mix_seed(seed, kShuffleStream), static_cast<std::uint64_t>(epoch)));
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

std::string nonfinite_message(std::int64_t step, const char* which, const losses::LossReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "non-finite %s loss at step %lld (gan_g=%g gan_d=%g fm=%g total_g=%g)", which,
                static_cast<long long>(step + 1), r.gan_g, r.gan_d, r.fm, r.total_g);
  return buf;
}

detail::Json config_json(const TrainConfig& c) {
  return {{"stage1_steps", c.stage1_steps},
          {"joint_steps", c.joint_steps},
          {"batch_size", c.batch_size},
          {"lr_g", c.lr_g},
          {"lr_d", c.lr_d},
          {"optimizer", to_string(c.optimizer)},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"lambda_fm", c.weights.lambda_fm},
          {"gan_mode", losses::to_string(c.weights.gan_mode)},
          {"seed", c.seed},
          {"train_height", c.train_height},
          {"train_width", c.train_width},
          {"snapshot_every", c.snapshot_every},
          {"flip", c.flip}};
}

TrainConfig config_from(const nlohmann::json& j) {
  detail::require_keys(j,
                       {"stage1_steps", "joint_steps", "batch_size", "lr_g", "lr_d", "optimizer", "beta1", "beta2",
                        "lambda_fm", "gan_mode", "seed", "train_height", "train_width", "snapshot_every", "flip"},
                       "train config");
  TrainConfig c;
  c.stage1_steps = j.at("stage1_steps").get<std::int64_t>();
  c.joint_steps = j.at("joint_steps").get<std::int64_t>();
  c.batch_size = j.at("batch_size").get<int>();
  c.lr_g = j.at("lr_g").get<double>();
  c.lr_d = j.at("lr_d").get<double>();
  c.optimizer = parse_optimizer_kind(j.at("optimizer").get<std::string>());
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.weights.lambda_fm = j.at("lambda_fm").get<double>();
  c.weights.gan_mode = losses::parse_gan_mode(j.at("gan_mode").get<std::string>());
  c.seed = j.at("seed").get<std::uint64_t>();
  c.train_height = j.at("train_height").get<int>();
  c.train_width = j.at("train_width").get<int>();
  c.snapshot_every = j.at("snapshot_every").get<std::int64_t>();
  c.flip = j.at("flip").get<bool>();
  return c;
}

void append_params(checkpoint::Archive& a, const std::string& prefix, const ParameterList& params) {
  for (const auto& p : params) a.tensors.push_back({prefix + p.name, p.var.value()});
}

void append_slots(checkpoint::Archive& a, const std::string& prefix, const Optimizer& opt, detail::Json& steps) {
  steps = detail::Json::array();
  for (std::size_t k = 0; k < opt.parameters().size(); ++k) {
    const auto& name = opt.parameters()[k].name;
    a.tensors.push_back({prefix + name + "/m", opt.slots()[k].first_moment});
    a.tensors.push_back({prefix + name + "/v", opt.slots()[k].second_moment});
    steps.push_back(opt.slots()[k].steps);
  }
}

void assign(const checkpoint::Archive& a, const std::string& name, Tensor& dst) {
  const Tensor& src = a.tensor(name);
  if (src.shape() != dst.shape()) {
    throw IntegrityError("tensor '" + name + "' has shape " + to_string(src.shape()) + ", expected " +
                         to_string(dst.shape()));
  }
  dst = src;
}

void restore_params(const checkpoint::Archive& a, const std::string& prefix, const ParameterList& params) {
  for (auto p : params) assign(a, prefix + p.name, p.var.mutable_value());
}

void restore_slots(const checkpoint::Archive& a, const std::string& prefix, Optimizer& opt,
                   const nlohmann::json& steps) {
  if (steps.size() != opt.slots().size()) throw IntegrityError("optimizer slot count mismatch for " + prefix);
  for (std::size_t k = 0; k < opt.slots().size(); ++k) {
    const auto& name = opt.parameters()[k].name;
    assign(a, prefix + name + "/m", opt.slots()[k].first_moment);
    assign(a, prefix + name + "/v", opt.slots()[k].second_moment);
    opt.slots()[k].steps = steps.at(k).get<std::int64_t>();
  }
}

}  // namespace

std::string to_string(Stage s) { return s == Stage::global_only ? "global_only" : "joint"; }

void TrainConfig::validate() const {
  if (stage1_steps < 0) throw ConfigError("train.stage1_steps", "must be >= 0");
  if (joint_steps < 0) throw ConfigError("train.joint_steps", "must be >= 0");
  if (batch_size < 1) throw ConfigError("train.batch_size", "must be >= 1");
  if (!(lr_g > 0.0)) throw ConfigError("train.lr_g", "must be > 0");
  if (!(lr_d > 0.0)) throw ConfigError("train.lr_d", "must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("train.beta1", "must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("train.beta2", "must be in [0, 1)");
  if (train_height < 2 || train_width < 2) throw ConfigError("train.resolution", "must be at least 2x2");
  if (train_height % 2 != 0 || train_width % 2 != 0) {
    throw ConfigError("train.resolution", "must be even so stage 1 can run at half resolution");
  }
  if (snapshot_every < 0) throw ConfigError("train.snapshot_every", "must be >= 0");
  weights.validate();
}

TrainState TrainState::initialize(const model::GeneratorSpec& g, const model::DiscriminatorSpec& d,
                                  const TrainConfig& config) {
  config.validate();
  g.validate();
  d.validate();
  if (d.input_channels != g.input_channels + g.output_channels) {
    throw ConfigError("discriminator.input_channels", "must equal generator input + output channels (" +
                                                          std::to_string(g.input_channels + g.output_channels) + ")");
  }
  const int div = g.divisor();
  if (config.train_height % div != 0 || config.train_width % div != 0) {
    throw ConfigError("train.resolution", "must be divisible by " + std::to_string(div) +
                                              " (2^(g1_downsamples + enhancer_count))");
  }
  TrainState s;
  s.generator_spec = g;
  s.discriminator_spec = d;
  s.config = config;
  s.generator = model::Generator::build(g, config.seed);
  s.discriminators = model::DiscriminatorBank::build(d, data::mix_seed(config.seed, kDiscriminatorStream));
  OptimizerConfig og{config.optimizer, config.lr_g, config.beta1, config.beta2, 1e-8};
  OptimizerConfig od{config.optimizer, config.lr_d, config.beta1, config.beta2, 1e-8};
  s.opt_g = Optimizer(s.generator.parameters(), og);
  s.opt_d = Optimizer(s.discriminators.parameters(), od);
  return s;
}

std::vector<std::size_t> batch_indices(const TrainConfig& config, std::size_t dataset_size, std::int64_t step) {
  if (dataset_size == 0) throw PreconditionError("batch_indices: empty dataset");
  const auto n = static_cast<std::int64_t>(dataset_size);
  std::vector<std::size_t> out;
  std::int64_t cached_epoch = -1;
  std::vector<std::size_t> perm;
  for (int j = 0; j < config.batch_size; ++j) {
    const std::int64_t pos = step * config.batch_size + j;
    const std::int64_t epoch = pos / n;
    if (epoch != cached_epoch) {
      perm = epoch_permutation(config.seed, epoch, dataset_size);
      cached_epoch = epoch;
    }
    out.push_back(perm[static_cast<std::size_t>(pos % n)]);
  }
  return out;
}

std::vector<bool> batch_flips(const TrainConfig& config, int batch_size, std::int64_t step) {
  std::mt19937_64 rng(data::mix_seed(data::mix_seed(config.seed, kFlipStream), static_cast<std::uint64_t>(step)));
  std::vector<bool> out;
  for (int j = 0; j < batch_size; ++j) {
    const bool coin = (rng() >> 63) != 0;
    out.push_back(config.flip && coin);
  }
  return out;
}

Batch make_batch(const std::vector<const data::PairedSample*>& samples, const std::vector<bool>& flips) {
  if (samples.empty()) throw PreconditionError("make_batch: empty batch");
  if (flips.size() != samples.size()) throw PreconditionError("make_batch: one flip flag per sample required");
  std::vector<Tensor> src;
  std::vector<Tensor> tgt;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Tensor& s = samples[i]->source().pixels;
    const Tensor& t = samples[i]->target().pixels;
    src.push_back(flips[i] ? flip_horizontal(s) : s);
    tgt.push_back(flips[i] ? flip_horizontal(t) : t);
  }
  return {stack_batch(src), stack_batch(tgt)};
}

StepContext prepare_step(const TrainState& state, const Batch& batch) {
  const Stage stage = state.stage();
  const int div = stage == Stage::global_only ? 2 : 1;
  const Shape ss = batch.source.shape();
  const Shape ts = batch.target.shape();
  if (ss.n < 1) throw PreconditionError("train_step: empty batch");
  if (ss.h != state.config.train_height / div || ss.w != state.config.train_width / div || ts.n != ss.n ||
      ts.h != ss.h || ts.w != ss.w) {
    throw PreconditionError("train_step: batch " + to_string(ss) + " / " + to_string(ts) + " does not match the " +
                            to_string(stage) + " resolution " + std::to_string(state.config.train_height / div) +
                            "x" + std::to_string(state.config.train_width / div));
  }
  if (ts.c != state.generator_spec.output_channels) {
    throw PreconditionError("train_step: target has " + std::to_string(ts.c) + " channels, generator emits " +
                            std::to_string(state.generator_spec.output_channels));
  }
  StepContext ctx;
  ctx.source = Var::constant(batch.source);
  ctx.target = Var::constant(batch.target);
  const auto mode = stage == Stage::global_only ? model::GeneratorMode::g1_only : model::GeneratorMode::full;
  ctx.fake = state.generator.forward(ctx.source, mode);
  return ctx;
}

void discriminator_step(TrainState& state, const StepContext& ctx, losses::LossReport& report) {
  const int n_scales = state.discriminator_spec.n_scales;
  report.per_scale.resize(static_cast<std::size_t>(n_scales));
  auto real_out = state.discriminators.forward_images(ctx.source, ctx.target);
  auto fake_out = state.discriminators.forward_images(ctx.source, ctx.fake.detach());
  std::vector<Var> terms;
  for (int k = 0; k < n_scales; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    terms.push_back(losses::gan_loss_d_scale(real_out[uk].scores, fake_out[uk].scores, state.config.weights.gan_mode));
    report.per_scale[uk].gan_d = terms.back().value().item();
  }
  Var loss_d = ops::add_n(terms);
  report.gan_d = loss_d.value().item();
  if (!std::isfinite(report.gan_d)) {
    throw NonFiniteLossError(nonfinite_message(state.step, "discriminator", report), "");
  }
  state.opt_d.zero_grad();
  backward(loss_d);
  state.opt_d.step();
  state.opt_d.zero_grad();
}

void generator_step(TrainState& state, const StepContext& ctx, losses::LossReport& report) {
  const int n_scales = state.discriminator_spec.n_scales;
  report.per_scale.resize(static_cast<std::size_t>(n_scales));
  std::vector<model::DiscriminatorOutput> real_out;
  {
    NoGradGuard no_grad;
    real_out = state.discriminators.forward_images(ctx.source, ctx.target);
  }
  auto fake_out = state.discriminators.forward_images(ctx.source, ctx.fake);
  std::vector<Var> gan_terms;
  std::vector<Var> fm_terms;
  for (int k = 0; k < n_scales; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    gan_terms.push_back(losses::gan_loss_g_scale(fake_out[uk].scores, state.config.weights.gan_mode));
    fm_terms.push_back(losses::feature_matching_scale(real_out[uk].features, fake_out[uk].features));
    report.per_scale[uk].gan_g = gan_terms.back().value().item();
    report.per_scale[uk].fm = fm_terms.back().value().item();
  }
  Var gan_g = ops::add_n(gan_terms);
  Var fm = ops::add_n(fm_terms);
  Var total = losses::total_generator_objective(gan_g, fm, state.config.weights);
  report.gan_g = gan_g.value().item();
  report.fm = fm.value().item();
  report.total_g = total.value().item();
  if (!report.finite()) throw NonFiniteLossError(nonfinite_message(state.step, "generator", report), "");

  state.opt_g.zero_grad();
  backward(total);
  state.opt_g.step();
  state.opt_g.zero_grad();
  state.opt_d.zero_grad();
}

losses::LossReport train_step(TrainState& state, const Batch& batch) {
  // The generator graph does not depend on D, so one forward serves both sub-steps.
  const StepContext ctx = prepare_step(state, batch);
  losses::LossReport report;
  discriminator_step(state, ctx, report);
  generator_step(state, ctx, report);
  ++state.step;
  return report;
}

std::string to_json_line(const StepRecord& r) {
  detail::Json j;
  j["step"] = r.step;
  j["stage"] = to_string(r.stage);
  j["gan_g"] = r.report.gan_g;
  j["gan_d"] = r.report.gan_d;
  j["fm"] = r.report.fm;
  j["total_g"] = r.report.total_g;
  j["wall_ms"] = r.wall_ms;
  detail::Json scales = detail::Json::array();
  for (const auto& s : r.report.per_scale) scales.push_back({{"gan_g", s.gan_g}, {"gan_d", s.gan_d}, {"fm", s.fm}});
  j["per_scale"] = scales;
  return j.dump();
}

data::Dataset half_resolution(const data::Dataset& dataset) {
  NoGradGuard no_grad;
  std::vector<data::PairedSample> out;
  for (const auto& s : dataset) {
    data::PairedSample h = s;
    h.visible = ImageBuf(ops::downsample2(Var::constant(s.visible.pixels)).value(), s.visible.range);
    h.infrared = ImageBuf(ops::downsample2(Var::constant(s.infrared.pixels)).value(), s.infrared.range);
    out.push_back(std::move(h));
  }
  return data::Dataset(std::move(out), dataset.direction());
}

void run_schedule(TrainState& state, const data::Dataset& dataset, const ScheduleOptions& options) {
  state.config.validate();
  if (dataset.empty()) throw PreconditionError("run_schedule: dataset is empty");
  for (const auto& s : dataset) {
    if (s.visible.height() != state.config.train_height || s.visible.width() != state.config.train_width) {
      throw PreconditionError("sample '" + s.id + "' is " + std::to_string(s.visible.height()) + "x" +
                              std::to_string(s.visible.width()) + ", training resolution is " +
                              std::to_string(state.config.train_height) + "x" +
                              std::to_string(state.config.train_width));
    }
  }
  std::optional<data::Dataset> half;
  if (state.step < state.config.stage1_steps) half = half_resolution(dataset);

  std::int64_t end = state.config.total_steps();
  if (options.stop_at) end = std::min(end, *options.stop_at);
  while (state.step < end) {
    const Stage stage = state.stage();
    const data::Dataset& source = stage == Stage::global_only ? *half : dataset;
    const auto idx = batch_indices(state.config, source.size(), state.step);
    std::vector<const data::PairedSample*> samples;
    for (auto i : idx) samples.push_back(&source[i]);
    const Batch batch = make_batch(samples, batch_flips(state.config, state.config.batch_size, state.step));

    const auto t0 = std::chrono::steady_clock::now();
    StepRecord rec;
    rec.stage = stage;
    try {
      rec.report = train_step(state, batch);
    } catch (const NonFiniteLossError& e) {
      std::string where;
      if (options.snapshot_dir) {
        char name[64];
        std::snprintf(name, sizeof name, "nonfinite_step_%06lld.ckpt", static_cast<long long>(state.step + 1));
        const auto path = *options.snapshot_dir / name;
        save_checkpoint(path, state);
        where = path.string();
      }
      throw NonFiniteLossError(e.what(), where);
    }
    rec.step = state.step;
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (options.log) *options.log << to_json_line(rec) << '\n' << std::flush;
    if (options.on_step) options.on_step(rec, state);
    if (options.snapshot_dir && state.config.snapshot_every > 0 && state.step % state.config.snapshot_every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "step_%06lld.ckpt", static_cast<long long>(state.step));
      save_checkpoint(*options.snapshot_dir / name, state);
    }
  }
}

void save_checkpoint(const std::filesystem::path& file, const TrainState& state) {
  checkpoint::Archive a;
  a.component = kComponent;
  detail::Json m;
  m["step"] = state.step;
  m["stage"] = to_string(state.stage());
  m["generator"] = detail::to_json(state.generator_spec);
  m["discriminator"] = detail::to_json(state.discriminator_spec);
  m["train"] = config_json(state.config);
  append_params(a, "g/", state.generator.parameters());
  append_params(a, "d/", state.discriminators.parameters());
  append_slots(a, "opt_g/", state.opt_g, m["opt_g_steps"]);
  append_slots(a, "opt_d/", state.opt_d, m["opt_d_steps"]);
  a.manifest_json = m.dump();
  checkpoint::write_archive(file, a);
}

TrainState load_checkpoint(const std::filesystem::path& file) {
  const checkpoint::Archive a = checkpoint::read_archive(file, kComponent);
  try {
    const auto m = nlohmann::json::parse(a.manifest_json);
    detail::require_keys(m, {"step", "stage", "generator", "discriminator", "train", "opt_g_steps", "opt_d_steps"},
                         "translator manifest");
    TrainState s = TrainState::initialize(detail::generator_spec_from(m.at("generator")),
                                          detail::discriminator_spec_from(m.at("discriminator")),
                                          config_from(m.at("train")));
    s.step = m.at("step").get<std::int64_t>();
    restore_params(a, "g/", s.generator.parameters());
    restore_params(a, "d/", s.discriminators.parameters());
    restore_slots(a, "opt_g/", s.opt_g, m.at("opt_g_steps"));
    restore_slots(a, "opt_d/", s.opt_d, m.at("opt_d_steps"));
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(file.string() + ": malformed manifest: " + e.what());
  } catch (const ConfigError& e) {
    throw IntegrityError(file.string() + ": invalid stored configuration: " + e.what());
  }
}

}  // namespace vis2ir::training
