#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "vis2ir/image.hpp"
#include "vis2ir/layers.hpp"
#include "vis2ir/model.hpp"
#include "vis2ir/optimizer.hpp"

namespace vis2ir::superres {

/// Keys cubic convolution (a = -0.5) with clamped borders; pixel centres are aligned, so
/// source coordinate = (dst + 0.5) / factor - 0.5.
Tensor bicubic_upsample(const Tensor& img, int factor);
ImageBuf bicubic_upsample(const ImageBuf& img, int factor);

struct SrSpec {
  int scale_factor = 2;
  int res_blocks = 8;
  int base_width = 32;
  int channels = 3;
  ValueRange value_range = kSignedUnit;
  double train_weight_l1 = 1.0;
  double train_weight_fm = 1.0;
  bool zero_init_residual = false;  // zero egress weights: the untrained net is exactly bicubic

  void validate() const;
  friend bool operator==(const SrSpec&, const SrSpec&) = default;
};

/// output = clamp(bicubic(x) + R(x)), where R is conv-relu, residual blocks without
/// normalization, a 2x transposed conv with relu, and a 3x3 egress conv.
class SrNetwork {
 public:
  static SrNetwork build(const SrSpec& spec, std::uint64_t seed);

  Var residual(const Var& low) const;
  Var forward(const Var& low) const;
  const SrSpec& spec() const { return spec_; }
  ParameterList parameters() const;

 private:
  SrSpec spec_;
  Conv2d ingress_;
  std::vector<ResidualBlock> blocks_;
  UpConv2d up_;
  Conv2d egress_;
};

/// Inference on one image; the result has exactly twice the input extent and the input's range.
ImageBuf sr_forward(const SrNetwork& net, const ImageBuf& img);

struct SrPair {
  ImageBuf low;
  ImageBuf high;
};

/// low = ops::downsample2(high). Heights and widths must be even.
std::vector<SrPair> make_sr_pairs(const std::vector<ImageBuf>& highs);

struct SrTrainConfig {
  std::int64_t steps = 300;
  int batch_size = 4;
  double lr = 1e-3;
  double lr_d = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::uint64_t seed = 1;
  model::DiscriminatorSpec discriminator{2, 2, 16, 0};  // input_channels derived from channels

  void validate() const;
  friend bool operator==(const SrTrainConfig&, const SrTrainConfig&) = default;
};

struct SrState {
  SrSpec spec;
  SrTrainConfig config;
  SrNetwork net;
  model::DiscriminatorBank discriminators;
  Optimizer opt;
  Optimizer opt_d;
  std::int64_t step = 0;

  static SrState initialize(const SrSpec& spec, const SrTrainConfig& config);
};

struct SrStepReport {
  std::int64_t step = 0;
  double l1 = 0.0;
  double fm = 0.0;
  double gan_d = 0.0;  // 0 when the feature-matching weight is 0 (no discriminator update)
  double total = 0.0;
  friend bool operator==(const SrStepReport&, const SrStepReport&) = default;
};

/// Mean absolute error between the network output and the high-resolution targets.
double sr_l1(const SrNetwork& net, const std::vector<SrPair>& pairs);

/// One update of train_weight_l1 * L1 + train_weight_fm * FM. When the FM weight is
/// positive the discriminator bank (conditioned on the bicubic image) is updated first.
SrStepReport sr_train_step(SrState& state, const std::vector<const SrPair*>& batch);

/// Runs the remaining steps. Throws NonFiniteLossError on NaN/Inf.
void train_sr(SrState& state, const std::vector<SrPair>& pairs,
              const std::function<void(const SrStepReport&)>& on_step = {});

void save_sr_checkpoint(const std::filesystem::path& file, const SrState& state);
SrState load_sr_checkpoint(const std::filesystem::path& file);

}  // namespace vis2ir::superres
