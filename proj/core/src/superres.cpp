#include "vis2ir/superres.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "spec_json.hpp"
#include "vis2ir/checkpoint.hpp"
#include "vis2ir/error.hpp"
#include "vis2ir/losses.hpp"
#include "vis2ir/ops.hpp"
#include "vis2ir/synthetic.hpp"

namespace vis2ir::superres {

namespace {

constexpr const char* kComponent = "superres";
constexpr std::uint64_t kDiscriminatorStream = 0x5ad15c;
constexpr std::uint64_t kShuffleStream = 0x5b5f;

double keys(double x) {
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

struct Taps {
  int index[4];
  double weight[4];
};

std::vector<Taps> axis_taps(int in, int factor) {
  std::vector<Taps> out(static_cast<std::size_t>(in * factor));
  for (int d = 0; d < in * factor; ++d) {
    const double src = (d + 0.5) / factor - 0.5;
    const int base = static_cast<int>(std::floor(src));
    const double t = src - base;
    Taps& tp = out[static_cast<std::size_t>(d)];
    for (int k = 0; k < 4; ++k) {
      tp.index[k] = std::clamp(base - 1 + k, 0, in - 1);
      tp.weight[k] = keys(t - (k - 1));
    }
  }
  return out;
}

Var mean_abs(const Var& a, const Var& b) {
  return ops::scale(ops::l1_sum(a, b), 1.0 / static_cast<double>(a.value().numel()));
}

detail::Json spec_json(const SrSpec& s) {
  return {{"scale_factor", s.scale_factor},
          {"res_blocks", s.res_blocks},
          {"base_width", s.base_width},
          {"channels", s.channels},
          {"value_range", detail::range_json(s.value_range)},
          {"train_weight_l1", s.train_weight_l1},
          {"train_weight_fm", s.train_weight_fm},
          {"zero_init_residual", s.zero_init_residual}};
}

SrSpec spec_from(const nlohmann::json& j) {
  detail::require_keys(j,
                       {"scale_factor", "res_blocks", "base_width", "channels", "value_range", "train_weight_l1",
                        "train_weight_fm", "zero_init_residual"},
                       "superres spec");
  SrSpec s;
  s.scale_factor = j.at("scale_factor").get<int>();
  s.res_blocks = j.at("res_blocks").get<int>();
  s.base_width = j.at("base_width").get<int>();
  s.channels = j.at("channels").get<int>();
  s.value_range = detail::range_from(j.at("value_range"));
  s.train_weight_l1 = j.at("train_weight_l1").get<double>();
  s.train_weight_fm = j.at("train_weight_fm").get<double>();
  s.zero_init_residual = j.at("zero_init_residual").get<bool>();
  return s;
}

detail::Json config_json(const SrTrainConfig& c) {
  return {{"steps", c.steps}, {"batch_size", c.batch_size}, {"lr", c.lr},     {"lr_d", c.lr_d},
          {"beta1", c.beta1}, {"beta2", c.beta2},           {"seed", c.seed}, {"discriminator", detail::to_json(c.discriminator)}};
}

SrTrainConfig config_from(const nlohmann::json& j) {
  detail::require_keys(j, {"steps", "batch_size", "lr", "lr_d", "beta1", "beta2", "seed", "discriminator"},
                       "superres train config");
  SrTrainConfig c;
  c.steps = j.at("steps").get<std::int64_t>();
  c.batch_size = j.at("batch_size").get<int>();
  c.lr = j.at("lr").get<double>();
  c.lr_d = j.at("lr_d").get<double>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.discriminator = detail::discriminator_spec_from(j.at("discriminator"));
  return c;
}

}  // namespace

Tensor bicubic_upsample(const Tensor& img, int factor) {
  if (factor < 1) throw PreconditionError("bicubic_upsample: factor must be >= 1");
  const Shape s = img.shape();
  if (factor == 1) return img;
  const int oh = s.h * factor;
  const int ow = s.w * factor;
  const auto ty = axis_taps(s.h, factor);
  const auto tx = axis_taps(s.w, factor);
  Tensor rows({s.n, s.c, s.h, ow});
  Tensor out({s.n, s.c, oh, ow});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < ow; ++x) {
          const Taps& t = tx[static_cast<std::size_t>(x)];
          double acc = 0.0;
          for (int k = 0; k < 4; ++k) acc += t.weight[k] * img.at(n, c, y, t.index[k]);
          rows.at(n, c, y, x) = acc;
        }
      for (int y = 0; y < oh; ++y) {
        const Taps& t = ty[static_cast<std::size_t>(y)];
        for (int x = 0; x < ow; ++x) {
          double acc = 0.0;
          for (int k = 0; k < 4; ++k) acc += t.weight[k] * rows.at(n, c, t.index[k], x);
          out.at(n, c, y, x) = acc;
        }
      }
    }
  return out;
}

ImageBuf bicubic_upsample(const ImageBuf& img, int factor) {
  return ImageBuf(bicubic_upsample(img.pixels, factor), img.range);
}

void SrSpec::validate() const {
  if (scale_factor != 2) throw ConfigError("superres.scale_factor", "only 2 is supported");
  if (res_blocks < 0) throw ConfigError("superres.res_blocks", "must be >= 0");
  if (base_width < 1) throw ConfigError("superres.base_width", "must be >= 1");
  if (channels < 1) throw ConfigError("superres.channels", "must be >= 1");
  if (!(value_range.hi > value_range.lo)) throw ConfigError("superres.value_range", "hi must exceed lo");
  if (!(train_weight_l1 >= 0.0)) throw ConfigError("superres.train_weight_l1", "must be >= 0");
  if (!(train_weight_fm >= 0.0)) throw ConfigError("superres.train_weight_fm", "must be >= 0");
}

SrNetwork SrNetwork::build(const SrSpec& spec, std::uint64_t seed) {
  spec.validate();
  WeightInit init(seed);
  SrNetwork net;
  net.spec_ = spec;
  net.ingress_ = Conv2d(spec.channels, spec.base_width, 3, 1, 1, init);
  for (int i = 0; i < spec.res_blocks; ++i) net.blocks_.emplace_back(spec.base_width, false, init);
  net.up_ = UpConv2d(spec.base_width, spec.base_width, init);
  net.egress_ = Conv2d(spec.base_width, spec.channels, 3, 1, 1, init);
  if (spec.zero_init_residual) {
    net.egress_.weight().mutable_value().fill(0.0);
    net.egress_.bias().mutable_value().fill(0.0);
  }
  return net;
}

Var SrNetwork::residual(const Var& low) const {
  if (low.shape().c != spec_.channels) {
    throw PreconditionError("superres network expects " + std::to_string(spec_.channels) + " channels, got " +
                            std::to_string(low.shape().c));
  }
  Var h = ops::relu(ingress_(low));
  for (const auto& b : blocks_) h = b(h);
  return egress_(ops::relu(up_(h)));
}

Var SrNetwork::forward(const Var& low) const {
  Var base = Var::constant(bicubic_upsample(low.value(), spec_.scale_factor));
  return ops::clamp(ops::add(base, residual(low)), spec_.value_range.lo, spec_.value_range.hi);
}

ParameterList SrNetwork::parameters() const {
  ParameterList out;
  ingress_.collect("sr.ingress", out);
  for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].collect("sr.res" + std::to_string(i), out);
  up_.collect("sr.up", out);
  egress_.collect("sr.egress", out);
  return out;
}

ImageBuf sr_forward(const SrNetwork& net, const ImageBuf& img) {
  NoGradGuard no_grad;
  const ImageBuf in = remap(img, net.spec().value_range);
  const ImageBuf out(net.forward(Var::constant(in.pixels)).value(), net.spec().value_range);
  if (out.height() != 2 * img.height() || out.width() != 2 * img.width()) {
    throw ConsistencyError("superres output is not exactly twice the input extent");
  }
  return remap(out, img.range);
}

std::vector<SrPair> make_sr_pairs(const std::vector<ImageBuf>& highs) {
  NoGradGuard no_grad;
  std::vector<SrPair> out;
  for (const auto& h : highs) {
    if (h.height() % 2 != 0 || h.width() % 2 != 0) {
      throw PreconditionError("make_sr_pairs: extent " + std::to_string(h.height()) + "x" +
                              std::to_string(h.width()) + " is not even");
    }
    out.push_back({ImageBuf(ops::downsample2(Var::constant(h.pixels)).value(), h.range), h});
  }
  return out;
}

void SrTrainConfig::validate() const {
  if (steps < 0) throw ConfigError("superres.steps", "must be >= 0");
  if (batch_size < 1) throw ConfigError("superres.batch_size", "must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("superres.lr", "must be > 0");
  if (!(lr_d > 0.0)) throw ConfigError("superres.lr_d", "must be > 0");
}

SrState SrState::initialize(const SrSpec& spec, const SrTrainConfig& config) {
  spec.validate();
  config.validate();
  SrState s;
  s.spec = spec;
  s.config = config;
  s.config.discriminator.input_channels = 2 * spec.channels;
  s.config.discriminator.validate();
  s.net = SrNetwork::build(spec, config.seed);
  s.discriminators = model::DiscriminatorBank::build(s.config.discriminator, data::mix_seed(config.seed, kDiscriminatorStream));
  s.opt = Optimizer(s.net.parameters(), {OptimizerKind::adam, config.lr, config.beta1, config.beta2, 1e-8});
  s.opt_d = Optimizer(s.discriminators.parameters(), {OptimizerKind::adam, config.lr_d, 0.5, 0.999, 1e-8});
  return s;
}

double sr_l1(const SrNetwork& net, const std::vector<SrPair>& pairs) {
  NoGradGuard no_grad;
  double acc = 0.0;
  std::size_t count = 0;
  for (const auto& p : pairs) {
    const ImageBuf out = sr_forward(net, p.low);
    const ImageBuf high = remap(p.high, p.low.range);
    for (std::size_t i = 0; i < out.pixels.numel(); ++i) acc += std::abs(out.pixels[i] - high.pixels[i]);
    count += out.pixels.numel();
  }
  return count == 0 ? 0.0 : acc / static_cast<double>(count);
}

SrStepReport sr_train_step(SrState& state, const std::vector<const SrPair*>& batch) {
  if (batch.empty()) throw PreconditionError("sr_train_step: empty batch");
  std::vector<Tensor> lows;
  std::vector<Tensor> highs;
  for (const auto* p : batch) {
    if (p->high.height() != 2 * p->low.height() || p->high.width() != 2 * p->low.width()) {
      throw PreconditionError("sr_train_step: pair is not an exact 2x relation");
    }
    lows.push_back(remap(p->low, state.spec.value_range).pixels);
    highs.push_back(remap(p->high, state.spec.value_range).pixels);
  }
  Var low = Var::constant(stack_batch(lows));
  Var high = Var::constant(stack_batch(highs));
  Var condition = Var::constant(bicubic_upsample(low.value(), state.spec.scale_factor));
  Var out = state.net.forward(low);

  SrStepReport r;
  const bool use_fm = state.spec.train_weight_fm > 0.0;
  if (use_fm) {
    auto real = state.discriminators.forward_images(condition, high);
    auto fake = state.discriminators.forward_images(condition, out.detach());
    Var loss_d = losses::gan_loss_d(losses::scores_of(real), losses::scores_of(fake), losses::GanMode::least_squares);
    r.gan_d = loss_d.value().item();
    if (!std::isfinite(r.gan_d)) throw NonFiniteLossError("non-finite superres discriminator loss", "");
    state.opt_d.zero_grad();
    backward(loss_d);
    state.opt_d.step();
    state.opt_d.zero_grad();
  }

  Var l1 = mean_abs(out, high);
  Var total = ops::scale(l1, state.spec.train_weight_l1);
  r.l1 = l1.value().item();
  if (use_fm) {
    std::vector<model::DiscriminatorOutput> real;
    {
      NoGradGuard no_grad;
      real = state.discriminators.forward_images(condition, high);
    }
    auto fake = state.discriminators.forward_images(condition, out);
    Var fm = losses::feature_matching_loss(losses::features_of(real), losses::features_of(fake));
    r.fm = fm.value().item();
    total = ops::add(total, ops::scale(fm, state.spec.train_weight_fm));
  }
  r.total = total.value().item();
  if (!std::isfinite(r.total) || !std::isfinite(r.l1) || !std::isfinite(r.fm)) {
    throw NonFiniteLossError("non-finite superres loss at step " + std::to_string(state.step + 1), "");
  }
  state.opt.zero_grad();
  backward(total);
  state.opt.step();
  state.opt.zero_grad();
  state.opt_d.zero_grad();
  r.step = ++state.step;
  return r;
}

void train_sr(SrState& state, const std::vector<SrPair>& pairs, const std::function<void(const SrStepReport&)>& on_step) {
  if (pairs.empty()) throw PreconditionError("train_sr: no training pairs");
  const auto n = static_cast<std::int64_t>(pairs.size());
  while (state.step < state.config.steps) {
    std::vector<const SrPair*> batch;
    std::int64_t cached_epoch = -1;
    std::vector<std::size_t> perm(pairs.size());
    for (int j = 0; j < state.config.batch_size; ++j) {
      const std::int64_t pos = state.step * state.config.batch_size + j;
      if (pos / n != cached_epoch) {
        cached_epoch = pos / n;
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::mt19937_64 rng(data::mix_seed(data::mix_seed(state.config.seed, kShuffleStream),
                                           static_cast<std::uint64_t>(cached_epoch)));
        std::shuffle(perm.begin(), perm.end(), rng);
      }
      batch.push_back(&pairs[perm[static_cast<std::size_t>(pos % n)]]);
    }
    const SrStepReport r = sr_train_step(state, batch);
    if (on_step) on_step(r);
  }
}

void save_sr_checkpoint(const std::filesystem::path& file, const SrState& state) {
  checkpoint::Archive a;
  a.component = kComponent;
  detail::Json m;
  m["step"] = state.step;
  m["spec"] = spec_json(state.spec);
  m["train"] = config_json(state.config);
  detail::Json steps = detail::Json::array();
  for (const auto& p : state.net.parameters()) a.tensors.push_back({"net/" + p.name, p.var.value()});
  for (const auto& p : state.discriminators.parameters()) a.tensors.push_back({"d/" + p.name, p.var.value()});
  const Optimizer* opts[2] = {&state.opt, &state.opt_d};
  const char* prefixes[2] = {"opt/", "opt_d/"};
  for (int o = 0; o < 2; ++o) {
    detail::Json counts = detail::Json::array();
    for (std::size_t k = 0; k < opts[o]->slots().size(); ++k) {
      const auto& name = opts[o]->parameters()[k].name;
      a.tensors.push_back({prefixes[o] + name + "/m", opts[o]->slots()[k].first_moment});
      a.tensors.push_back({prefixes[o] + name + "/v", opts[o]->slots()[k].second_moment});
      counts.push_back(opts[o]->slots()[k].steps);
    }
    steps.push_back(counts);
  }
  m["optimizer_steps"] = steps;
  a.manifest_json = m.dump();
  checkpoint::write_archive(file, a);
}

SrState load_sr_checkpoint(const std::filesystem::path& file) {
  const checkpoint::Archive a = checkpoint::read_archive(file, kComponent);
  try {
    const auto m = nlohmann::json::parse(a.manifest_json);
    detail::require_keys(m, {"step", "spec", "train", "optimizer_steps"}, "superres manifest");
    SrState s = SrState::initialize(spec_from(m.at("spec")), config_from(m.at("train")));
    s.step = m.at("step").get<std::int64_t>();
    auto load = [&](const std::string& name, Tensor& dst) {
      const Tensor& src = a.tensor(name);
      if (src.shape() != dst.shape()) throw IntegrityError("tensor '" + name + "' has the wrong shape");
      dst = src;
    };
    for (auto p : s.net.parameters()) load("net/" + p.name, p.var.mutable_value());
    for (auto p : s.discriminators.parameters()) load("d/" + p.name, p.var.mutable_value());
    Optimizer* opts[2] = {&s.opt, &s.opt_d};
    const char* prefixes[2] = {"opt/", "opt_d/"};
    for (int o = 0; o < 2; ++o) {
      const auto& counts = m.at("optimizer_steps").at(static_cast<std::size_t>(o));
      if (counts.size() != opts[o]->slots().size()) throw IntegrityError("optimizer slot count mismatch");
      for (std::size_t k = 0; k < opts[o]->slots().size(); ++k) {
        const auto& name = opts[o]->parameters()[k].name;
        load(prefixes[o] + name + "/m", opts[o]->slots()[k].first_moment);
        load(prefixes[o] + name + "/v", opts[o]->slots()[k].second_moment);
        opts[o]->slots()[k].steps = counts.at(k).get<std::int64_t>();
      }
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(file.string() + ": malformed manifest: " + e.what());
  } catch (const ConfigError& e) {
    throw IntegrityError(file.string() + ": invalid stored configuration: " + e.what());
  }
}

}  // namespace vis2ir::superres
