#include "vis2ir/layers.hpp"

#include <cstring>

#include "vis2ir/ops.hpp"

namespace vis2ir {

Tensor WeightInit::gaussian(Shape shape) {
  Tensor t(shape);
  for (auto& v : t.values()) v = dist_(engine_);
  return t;
}

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad, WeightInit& init)
    : weight_(Var::leaf(init.gaussian({out_channels, in_channels, kernel, kernel}))),
      bias_(Var::leaf(Tensor({1, out_channels, 1, 1}))),
      stride_(stride),
      pad_(pad) {}

Var Conv2d::operator()(const Var& x) const { return ops::conv2d(x, weight_, bias_, stride_, pad_); }

void Conv2d::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".weight", weight_});
  out.push_back({prefix + ".bias", bias_});
}

UpConv2d::UpConv2d(int in_channels, int out_channels, WeightInit& init)
    : weight_(Var::leaf(init.gaussian({in_channels, out_channels, 3, 3}))),
      bias_(Var::leaf(Tensor({1, out_channels, 1, 1}))) {}

Var UpConv2d::operator()(const Var& x) const { return ops::conv_transpose2d(x, weight_, bias_, 2, 1, 1); }

void UpConv2d::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".weight", weight_});
  out.push_back({prefix + ".bias", bias_});
}

ResidualBlock::ResidualBlock(int channels, bool normalize, WeightInit& init)
    : first_(channels, channels, 3, 1, 0, init), second_(channels, channels, 3, 1, 0, init), normalize_(normalize) {}

Var ResidualBlock::operator()(const Var& x) const {
  Var h = first_(ops::reflect_pad(x, 1));
  if (normalize_) h = ops::instance_norm(h);
  h = second_(ops::reflect_pad(ops::relu(h), 1));
  if (normalize_) h = ops::instance_norm(h);
  return ops::add(x, h);
}

void ResidualBlock::collect(const std::string& prefix, ParameterList& out) const {
  first_.collect(prefix + ".conv1", out);
  second_.collect(prefix + ".conv2", out);
}

std::uint64_t parameter_hash(const ParameterList& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : params) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p.var.value().data());
    const std::size_t len = p.var.value().numel() * sizeof(double);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::size_t parameter_count(const ParameterList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.var.value().numel();
  return n;
}

}  // namespace vis2ir
