#include "vis2ir/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vis2ir/error.hpp"

namespace vis2ir {

std::string to_string(const Shape& s) {
  return std::to_string(s.n) + "x" + std::to_string(s.c) + "x" + std::to_string(s.h) + "x" + std::to_string(s.w);
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape), data_(shape.numel(), fill) {
  if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
    throw PreconditionError("negative tensor extent " + to_string(shape));
  }
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.numel()) {
    throw PreconditionError("tensor data size " + std::to_string(data_.size()) + " does not match shape " +
                            to_string(shape_));
  }
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Tensor::add_(const Tensor& other) {
  if (other.shape_ != shape_) {
    throw ConsistencyError("add_: shape " + to_string(other.shape_) + " vs " + to_string(shape_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
}

double Tensor::item() const {
  if (data_.size() != 1) throw PreconditionError("item() on tensor of shape " + to_string(shape_));
  return data_[0];
}

double Tensor::sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

double Tensor::min() const {
  if (data_.empty()) throw PreconditionError("min() of empty tensor");
  return *std::min_element(data_.begin(), data_.end());
}

double Tensor::max() const {
  if (data_.empty()) throw PreconditionError("max() of empty tensor");
  return *std::max_element(data_.begin(), data_.end());
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor stack_batch(std::span<const Tensor> samples) {
  if (samples.empty()) throw PreconditionError("stack_batch: no samples");
  Shape s = samples.front().shape();
  if (s.n != 1) throw PreconditionError("stack_batch: expected batch-of-one inputs");
  Shape out_shape{static_cast<int>(samples.size()), s.c, s.h, s.w};
  std::vector<double> data;
  data.reserve(out_shape.numel());
  for (const auto& t : samples) {
    if (t.shape() != s) {
      throw PreconditionError("stack_batch: mismatched shapes " + to_string(t.shape()) + " vs " + to_string(s));
    }
    data.insert(data.end(), t.values().begin(), t.values().end());
  }
  return Tensor(out_shape, std::move(data));
}

Tensor slice_batch(const Tensor& t, int n) {
  const Shape& s = t.shape();
  if (n < 0 || n >= s.n) throw PreconditionError("slice_batch: index out of range");
  const double* begin = t.sample(n);
  return Tensor({1, s.c, s.h, s.w}, std::vector<double>(begin, begin + s.sample()));
}

Tensor flip_horizontal(const Tensor& t) {
  Tensor out(t.shape());
  const Shape& s = t.shape();
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) out.at(n, c, y, x) = t.at(n, c, y, s.w - 1 - x);
  return out;
}

}  // namespace vis2ir
