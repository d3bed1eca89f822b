#include "vis2ir/model.hpp"

#include <algorithm>

#include "vis2ir/error.hpp"
#include "vis2ir/ops.hpp"

namespace vis2ir::model {

namespace {

void require_positive(int v, const char* field) {
  if (v < 1) throw ConfigError(field, "must be >= 1, got " + std::to_string(v));
}

}  // namespace

void GeneratorSpec::validate() const {
  require_positive(input_channels, "generator.input_channels");
  require_positive(output_channels, "generator.output_channels");
  require_positive(base_width, "generator.base_width");
  require_positive(g1_downsamples, "generator.g1_downsamples");
  require_positive(g1_res_blocks, "generator.g1_res_blocks");
  if (g2_res_blocks < 0) throw ConfigError("generator.g2_res_blocks", "must be >= 0");
  if (enhancer_count < 0 || enhancer_count > 2) {
    throw ConfigError("generator.enhancer_count", "must be 0, 1 or 2, got " + std::to_string(enhancer_count));
  }
  if (base_width % (1 << enhancer_count) != 0) {
    throw ConfigError("generator.base_width", "must be divisible by 2^enhancer_count so fused feature widths agree");
  }
  if (g1_downsamples > 8) throw ConfigError("generator.g1_downsamples", "must be <= 8");
  if (!(value_range.lo < value_range.hi)) throw ConfigError("generator.value_range", "empty interval");
}

GeneratorStage::GeneratorStage(int in_channels, int ingress_width, int downsamples, int res_blocks, WeightInit& init) {
  front_.emplace_back(in_channels, ingress_width, 7, 1, 0, init);
  int width = ingress_width;
  for (int i = 0; i < downsamples; ++i, width *= 2) front_.emplace_back(width, width * 2, 3, 2, 1, init);
  for (int i = 0; i < res_blocks; ++i) res_.emplace_back(width, true, init);
  for (int i = 0; i < downsamples; ++i, width /= 2) back_.emplace_back(width, width / 2, init);
}

Var GeneratorStage::frontend(const Var& x) const {
  Var h = ops::relu(ops::instance_norm(front_.front()(ops::reflect_pad(x, 3))));
  for (std::size_t i = 1; i < front_.size(); ++i) h = ops::relu(ops::instance_norm(front_[i](h)));
  return h;
}

Var GeneratorStage::residual(const Var& x) const {
  Var h = x;
  for (const auto& block : res_) h = block(h);
  return h;
}

Var GeneratorStage::backend(const Var& x) const {
  Var h = x;
  for (const auto& up : back_) h = ops::relu(ops::instance_norm(up(h)));
  return h;
}

void GeneratorStage::collect(const std::string& prefix, ParameterList& out) const {
  for (std::size_t i = 0; i < front_.size(); ++i) front_[i].collect(prefix + ".front" + std::to_string(i), out);
  for (std::size_t i = 0; i < res_.size(); ++i) res_[i].collect(prefix + ".res" + std::to_string(i), out);
  for (std::size_t i = 0; i < back_.size(); ++i) back_[i].collect(prefix + ".back" + std::to_string(i), out);
}

Generator Generator::build(const GeneratorSpec& spec, std::uint64_t seed) {
  spec.validate();
  WeightInit init(seed);
  Generator g;
  g.spec_ = spec;
  g.global_ = GeneratorStage(spec.input_channels, spec.base_width, spec.g1_downsamples, spec.g1_res_blocks, init);
  g.global_egress_ = Conv2d(spec.base_width, spec.output_channels, 7, 1, 0, init);
  for (int e = 1; e <= spec.enhancer_count; ++e) {
    g.enhancers_.emplace_back(spec.input_channels, spec.base_width >> e, 1, spec.g2_res_blocks, init);
  }
  if (spec.enhancer_count > 0) {
    g.enhancer_egress_ = Conv2d(spec.base_width >> spec.enhancer_count, spec.output_channels, 7, 1, 0, init);
  }
  return g;
}

void Generator::check_input(const Shape& s, GeneratorMode mode) const {
  if (s.c != spec_.input_channels) {
    throw PreconditionError("generator expects " + std::to_string(spec_.input_channels) + " input channels, got " +
                            std::to_string(s.c));
  }
  const int div = mode == GeneratorMode::full ? spec_.divisor() : (1 << spec_.g1_downsamples);
  if (s.h % div != 0 || s.w % div != 0) {
    throw PreconditionError("generator input " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                            " must be divisible by " + std::to_string(div) + "; pad first");
  }
}

Var Generator::egress(const Conv2d& conv, const Var& feature) const {
  Var t = ops::tanh(conv(ops::reflect_pad(feature, 3)));
  const ValueRange& r = spec_.value_range;
  if (r == kSignedUnit) return t;
  return ops::affine(t, r.span() / 2.0, r.lo + r.span() / 2.0);
}

Var Generator::forward(const Var& visible, GeneratorMode mode) const {
  if (mode == GeneratorMode::g1_only || spec_.enhancer_count == 0) {
    check_input(visible.shape(), GeneratorMode::g1_only);
    Var out = egress(global_egress_, global_.backend(global_.residual(global_.frontend(visible))));
    if (out.shape().h != visible.shape().h || out.shape().w != visible.shape().w) {
      throw ConsistencyError("G1 output " + to_string(out.shape()) + " does not match input " +
                             to_string(visible.shape()));
    }
    return out;
  }
  return forward_traced(visible).output;
}

ImageBuf Generator::forward(const ImageBuf& visible, GeneratorMode mode) const {
  NoGradGuard no_grad;
  return ImageBuf(forward(Var::constant(visible.pixels), mode).value(), spec_.value_range);
}

Generator::Trace Generator::forward_traced(const Var& visible) const {
  if (spec_.enhancer_count == 0) {
    throw PreconditionError("forward_traced needs at least one local enhancer");
  }
  check_input(visible.shape(), GeneratorMode::full);
  Trace t;
  t.inputs = data::make_pyramid(visible, spec_.enhancer_count + 1);
  t.global_feature = global_.backend(global_.residual(global_.frontend(t.inputs.back())));
  Var feature = t.global_feature;
  for (int e = 1; e <= spec_.enhancer_count; ++e) {
    const GeneratorStage& stage = enhancers_[static_cast<std::size_t>(e - 1)];
    Var front = stage.frontend(t.inputs[static_cast<std::size_t>(spec_.enhancer_count - e)]);
    Var fused = ops::add(front, feature);
    feature = stage.backend(stage.residual(fused));
    t.enhancer_front.push_back(front);
    t.fused.push_back(fused);
  }
  t.output = egress(enhancer_egress_, feature);
  if (t.output.shape().h != visible.shape().h || t.output.shape().w != visible.shape().w) {
    throw ConsistencyError("generator output " + to_string(t.output.shape()) + " does not match input " +
                           to_string(visible.shape()));
  }
  return t;
}

Var Generator::enhance(const Var& visible, const Var& global_feature) const {
  if (spec_.enhancer_count == 0) throw PreconditionError("enhance needs at least one local enhancer");
  check_input(visible.shape(), GeneratorMode::full);
  const auto inputs = data::make_pyramid(visible, spec_.enhancer_count + 1);
  Var feature = global_feature;
  for (int e = 1; e <= spec_.enhancer_count; ++e) {
    const GeneratorStage& stage = enhancers_[static_cast<std::size_t>(e - 1)];
    Var front = stage.frontend(inputs[static_cast<std::size_t>(spec_.enhancer_count - e)]);
    feature = stage.backend(stage.residual(ops::add(front, feature)));
  }
  return egress(enhancer_egress_, feature);
}

ParameterList Generator::global_parameters() const {
  ParameterList out;
  global_.collect("g1", out);
  global_egress_.collect("g1.egress", out);
  return out;
}

ParameterList Generator::enhancer_parameters() const {
  ParameterList out;
  for (std::size_t e = 0; e < enhancers_.size(); ++e) enhancers_[e].collect("g2_" + std::to_string(e + 1), out);
  if (!enhancers_.empty()) enhancer_egress_.collect("g2.egress", out);
  return out;
}

ParameterList Generator::parameters() const {
  ParameterList out = global_parameters();
  ParameterList enh = enhancer_parameters();
  out.insert(out.end(), enh.begin(), enh.end());
  return out;
}

void DiscriminatorSpec::validate() const {
  require_positive(n_scales, "discriminator.n_scales");
  require_positive(conv_layers, "discriminator.conv_layers");
  require_positive(base_width, "discriminator.base_width");
  require_positive(input_channels, "discriminator.input_channels");
}

Discriminator::Discriminator(const DiscriminatorSpec& spec, WeightInit& init) : input_channels_(spec.input_channels) {
  int in = spec.input_channels;
  for (int i = 0; i < spec.conv_layers; ++i) {
    const int out = std::min(spec.base_width << i, spec.base_width * 8);
    blocks_.emplace_back(in, out, 4, 2, 1, init);
    in = out;
  }
  head_ = Conv2d(in, 1, 3, 1, 1, init);
}

DiscriminatorOutput Discriminator::forward(const Var& visible, const Var& candidate, int scale_index) const {
  const Shape& vs = visible.shape();
  const Shape& cs = candidate.shape();
  if (vs.h != cs.h || vs.w != cs.w || vs.n != cs.n) {
    throw PreconditionError("discriminator: visible " + to_string(vs) + " and candidate " + to_string(cs) +
                            " differ in batch or spatial extent");
  }
  if (vs.c + cs.c != input_channels_) {
    throw PreconditionError("discriminator expects " + std::to_string(input_channels_) + " input channels, got " +
                            std::to_string(vs.c + cs.c));
  }
  DiscriminatorOutput out;
  Var h = ops::concat_channels(visible, candidate);
  for (const auto& block : blocks_) {
    if (h.shape().h < 2 || h.shape().w < 2) {
      throw PreconditionError("discriminator input " + to_string(vs) + " too small for " +
                              std::to_string(blocks_.size()) + " stride-2 layers");
    }
    h = ops::leaky_relu(block(h), 0.2);
    out.features.layers.push_back(h);
    out.features.element_counts.push_back(h.shape().sample());
  }
  out.scores = ScoreMap{head_(h), scale_index};
  return out;
}

void Discriminator::collect(const std::string& prefix, ParameterList& out) const {
  for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].collect(prefix + ".conv" + std::to_string(i), out);
  head_.collect(prefix + ".head", out);
}

std::pair<int, int> Discriminator::score_grid(const DiscriminatorSpec& spec, int height, int width) {
  for (int i = 0; i < spec.conv_layers; ++i) {
    height = ops::conv_out(height, 4, 2, 1);
    width = ops::conv_out(width, 4, 2, 1);
  }
  return {ops::conv_out(height, 3, 1, 1), ops::conv_out(width, 3, 1, 1)};
}

DiscriminatorBank DiscriminatorBank::build(const DiscriminatorSpec& spec, std::uint64_t seed) {
  spec.validate();
  WeightInit init(seed);
  DiscriminatorBank bank;
  bank.spec_ = spec;
  for (int k = 0; k < spec.n_scales; ++k) bank.discs_.emplace_back(spec, init);
  return bank;
}

std::vector<DiscriminatorOutput> DiscriminatorBank::forward(std::span<const Var> visible_pyramid,
                                                            std::span<const Var> candidate_pyramid) const {
  const auto n = static_cast<std::size_t>(spec_.n_scales);
  if (visible_pyramid.size() != n || candidate_pyramid.size() != n) {
    throw PreconditionError("discriminator bank has " + std::to_string(n) + " scales but got pyramids of " +
                            std::to_string(visible_pyramid.size()) + " and " +
                            std::to_string(candidate_pyramid.size()) + " levels");
  }
  std::vector<DiscriminatorOutput> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    out.push_back(discs_[k].forward(visible_pyramid[k], candidate_pyramid[k], static_cast<int>(k)));
  }
  return out;
}

std::vector<DiscriminatorOutput> DiscriminatorBank::forward(const data::ImagePyramid& visible,
                                                            const data::ImagePyramid& candidate) const {
  std::vector<Var> v;
  std::vector<Var> c;
  for (const auto& l : visible.levels) v.push_back(Var::constant(l.pixels));
  for (const auto& l : candidate.levels) c.push_back(Var::constant(l.pixels));
  return forward(v, c);
}

std::vector<DiscriminatorOutput> DiscriminatorBank::forward_images(const Var& visible, const Var& candidate) const {
  const auto v = data::make_pyramid(visible, spec_.n_scales);
  const auto c = data::make_pyramid(candidate, spec_.n_scales);
  return forward(v, c);
}

ParameterList DiscriminatorBank::parameters() const {
  ParameterList out;
  for (std::size_t k = 0; k < discs_.size(); ++k) discs_[k].collect("d" + std::to_string(k + 1), out);
  return out;
}

}  // namespace vis2ir::model
