#include "vis2ir/pyramid.hpp"

#include "vis2ir/error.hpp"
#include "vis2ir/ops.hpp"

namespace vis2ir::data {

namespace {
void check(int n_scales, const Shape& s) {
  if (n_scales < 1) throw PreconditionError("make_pyramid: n_scales must be >= 1");
  if (s.h < 1 || s.w < 1) throw PreconditionError("make_pyramid: empty image " + to_string(s));
}
}  // namespace

int pyramid_extent(int extent, int level) {
  const int f = 1 << level;
  return (extent + f - 1) / f;
}

std::vector<Var> make_pyramid(const Var& batch, int n_scales) {
  check(n_scales, batch.shape());
  std::vector<Var> levels{batch};
  for (int j = 1; j < n_scales; ++j) levels.push_back(ops::downsample2(levels.back()));
  return levels;
}

ImagePyramid make_pyramid(const ImageBuf& img, int n_scales) {
  check(n_scales, img.pixels.shape());
  NoGradGuard no_grad;
  ImagePyramid out;
  const auto vars = make_pyramid(Var::constant(img.pixels), n_scales);
  for (std::size_t j = 0; j < vars.size(); ++j) {
    out.levels.emplace_back(vars[j].value(), img.range);
    out.factors.push_back(1 << j);
  }
  return out;
}

}  // namespace vis2ir::data
