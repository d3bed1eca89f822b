#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "vis2ir/autograd.hpp"

namespace vis2ir {

struct NamedParameter {
  std::string name;
  Var var;
};

using ParameterList = std::vector<NamedParameter>;

/// Draws N(0, stddev) weights from a seeded engine. Construction order fixes the draw order,
/// so identical seeds give bit-identical parameters.
class WeightInit {
 public:
  explicit WeightInit(std::uint64_t seed, double stddev = 0.02) : engine_(seed), dist_(0.0, stddev) {}

  Tensor gaussian(Shape shape);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> dist_;
};

/// Square-kernel convolution with zero padding and a bias.
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad, WeightInit& init);

  Var operator()(const Var& x) const;
  void collect(const std::string& prefix, ParameterList& out) const;

  int in_channels() const { return weight_.shape().c; }
  int out_channels() const { return weight_.shape().n; }
  int kernel() const { return weight_.shape().h; }
  int stride() const { return stride_; }
  int pad() const { return pad_; }
  Var& weight() { return weight_; }
  Var& bias() { return bias_; }

 private:
  Var weight_;
  Var bias_;
  int stride_ = 1;
  int pad_ = 0;
};

/// Stride-2 3x3 transposed convolution that exactly doubles both spatial extents.
class UpConv2d {
 public:
  UpConv2d() = default;
  UpConv2d(int in_channels, int out_channels, WeightInit& init);

  Var operator()(const Var& x) const;
  void collect(const std::string& prefix, ParameterList& out) const;

 private:
  Var weight_;
  Var bias_;
};

/// x + F(x) where F = pad-conv3-[norm]-relu-pad-conv3-[norm]. Preserves shape.
class ResidualBlock {
 public:
  ResidualBlock() = default;
  ResidualBlock(int channels, bool normalize, WeightInit& init);

  Var operator()(const Var& x) const;
  void collect(const std::string& prefix, ParameterList& out) const;

 private:
  Conv2d first_;
  Conv2d second_;
  bool normalize_ = true;
};

/// FNV-1a over the raw bytes of every parameter value, in list order.
std::uint64_t parameter_hash(const ParameterList& params);
std::size_t parameter_count(const ParameterList& params);

}  // namespace vis2ir
