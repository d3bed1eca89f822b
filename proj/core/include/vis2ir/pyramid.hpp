#pragma once

#include <vector>

#include "vis2ir/autograd.hpp"
#include "vis2ir/image.hpp"

namespace vis2ir::data {

/// Finest-first image pyramid. Level j has extent ceil(extent_0 / factors[j]), factors[j] = 2^j.
struct ImagePyramid {
  std::vector<ImageBuf> levels;
  std::vector<int> factors;

  std::size_t size() const { return levels.size(); }
};

/// Level j is produced by j successive 3x3 stride-2 average pools over a reflect-padded input.
ImagePyramid make_pyramid(const ImageBuf& img, int n_scales);

/// Differentiable counterpart over a batch tensor.
std::vector<Var> make_pyramid(const Var& batch, int n_scales);

/// ceil(extent / 2^level)
int pyramid_extent(int extent, int level);

}  // namespace vis2ir::data
