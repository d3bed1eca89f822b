#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "vis2ir/image.hpp"
#include "vis2ir/layers.hpp"
#include "vis2ir/pyramid.hpp"

namespace vis2ir::model {

/// Architecture of the coarse-to-fine generator: a global network G1 plus
/// `enhancer_count` local enhancers, each doubling the working resolution.
struct GeneratorSpec {
  int input_channels = 3;
  int output_channels = 3;
  int base_width = 64;  // first-layer width of G1; enhancer e uses base_width >> e
  int g1_downsamples = 4;
  int g1_res_blocks = 9;
  int g2_res_blocks = 3;
  int enhancer_count = 1;
  ValueRange value_range = kSignedUnit;

  /// Throws ConfigError naming the first offending field.
  void validate() const;
  /// Input height and width must be multiples of this.
  int divisor() const { return 1 << (g1_downsamples + enhancer_count); }

  friend bool operator==(const GeneratorSpec&, const GeneratorSpec&) = default;
};

enum class GeneratorMode { g1_only, full };

/// Front end (downsampling convolutions), residual stack, and back end (transposed
/// convolutions) of one generator stage. Front end and back end apply instance norm + ReLU
/// after every convolution.
class GeneratorStage {
 public:
  GeneratorStage() = default;
  /// `ingress_width` channels after the 7x7 ingress; each of `downsamples` stride-2 convs
  /// doubles the width; the back end mirrors the front end.
  GeneratorStage(int in_channels, int ingress_width, int downsamples, int res_blocks, WeightInit& init);

  Var frontend(const Var& x) const;
  Var residual(const Var& x) const;
  Var backend(const Var& x) const;

  void collect(const std::string& prefix, ParameterList& out) const;

 private:
  std::vector<Conv2d> front_;
  std::vector<ResidualBlock> res_;
  std::vector<UpConv2d> back_;
};

class Generator {
 public:
  /// Intermediates of a full-mode pass, exposed for fusion checks.
  struct Trace {
    std::vector<Var> inputs;          // visible pyramid, finest first, length enhancer_count + 1
    Var global_feature;               // final G1 back-end map
    std::vector<Var> enhancer_front;  // per enhancer, coarsest first
    std::vector<Var> fused;           // residual-stack inputs, coarsest first
    Var output;
  };

  /// Weights ~ N(0, 0.02) drawn from `seed`; biases zero.
  static Generator build(const GeneratorSpec& spec, std::uint64_t seed);

  Var forward(const Var& visible, GeneratorMode mode) const;
  /// Inference without graph recording.
  ImageBuf forward(const ImageBuf& visible, GeneratorMode mode) const;
  Trace forward_traced(const Var& visible) const;
  /// Enhancer path with an externally supplied G1 feature map (full mode minus G1).
  Var enhance(const Var& visible, const Var& global_feature) const;

  const GeneratorSpec& spec() const { return spec_; }
  const GeneratorStage& global_stage() const { return global_; }
  const GeneratorStage& enhancer_stage(int i) const { return enhancers_.at(static_cast<std::size_t>(i)); }

  ParameterList parameters() const;
  /// G1 stage and G1 egress.
  ParameterList global_parameters() const;
  /// Every enhancer stage and the enhancer egress.
  ParameterList enhancer_parameters() const;

 private:
  void check_input(const Shape& s, GeneratorMode mode) const;
  Var egress(const Conv2d& conv, const Var& feature) const;

  GeneratorSpec spec_;
  GeneratorStage global_;
  Conv2d global_egress_;
  std::vector<GeneratorStage> enhancers_;
  Conv2d enhancer_egress_;
};

struct DiscriminatorSpec {
  int n_scales = 3;
  int conv_layers = 4;
  int base_width = 64;
  int input_channels = 6;  // visible + candidate channels

  void validate() const;
  friend bool operator==(const DiscriminatorSpec&, const DiscriminatorSpec&) = default;
};

/// Patch logits [batch, 1, rows, cols] from one pyramid level.
struct ScoreMap {
  Var logits;
  int scale_index = 0;

  int rows() const { return logits.shape().h; }
  int cols() const { return logits.shape().w; }
  int patches() const { return rows() * cols(); }
};

/// Activations of every conv block in forward order. element_counts[i] is the per-sample
/// element count N_i of layers[i].
struct FeatureStack {
  std::vector<Var> layers;
  std::vector<std::size_t> element_counts;

  std::size_t size() const { return layers.size(); }
};

struct DiscriminatorOutput {
  ScoreMap scores;
  FeatureStack features;
};

/// Fully convolutional patch critic: `conv_layers` 4x4 stride-2 convolutions with leaky ReLU
/// (slope 0.2), then a 3x3 stride-1 convolution to one logit channel.
class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(const DiscriminatorSpec& spec, WeightInit& init);

  DiscriminatorOutput forward(const Var& visible, const Var& candidate, int scale_index = 0) const;
  void collect(const std::string& prefix, ParameterList& out) const;

  /// Score grid (rows, cols) for an input of the given extent.
  static std::pair<int, int> score_grid(const DiscriminatorSpec& spec, int height, int width);

 private:
  int input_channels_ = 0;
  std::vector<Conv2d> blocks_;
  Conv2d head_;
};

/// n_scales identically structured discriminators, one per pyramid level.
class DiscriminatorBank {
 public:
  static DiscriminatorBank build(const DiscriminatorSpec& spec, std::uint64_t seed);

  std::vector<DiscriminatorOutput> forward(std::span<const Var> visible_pyramid,
                                           std::span<const Var> candidate_pyramid) const;
  std::vector<DiscriminatorOutput> forward(const data::ImagePyramid& visible,
                                           const data::ImagePyramid& candidate) const;
  /// Builds both pyramids with ops::downsample2 and runs every scale.
  std::vector<DiscriminatorOutput> forward_images(const Var& visible, const Var& candidate) const;

  const DiscriminatorSpec& spec() const { return spec_; }
  const Discriminator& at(int k) const { return discs_.at(static_cast<std::size_t>(k)); }
  ParameterList parameters() const;

 private:
  DiscriminatorSpec spec_;
  std::vector<Discriminator> discs_;
};

}  // namespace vis2ir::model
