#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace vis2ir {

/// NCHW extents. Every tensor in the library is four-dimensional; scalars are 1x1x1x1.
struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t numel() const noexcept {
    return static_cast<std::size_t>(n) * static_cast<std::size_t>(c) * static_cast<std::size_t>(h) *
           static_cast<std::size_t>(w);
  }
  std::size_t plane() const noexcept { return static_cast<std::size_t>(h) * static_cast<std::size_t>(w); }
  std::size_t sample() const noexcept { return static_cast<std::size_t>(c) * plane(); }

  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

/// Dense row-major NCHW buffer of doubles with value semantics.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor({1, 1, 1, 1}, v); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t numel() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  double& at(int n, int c, int y, int x) noexcept { return data_[index(n, c, y, x)]; }
  double at(int n, int c, int y, int x) const noexcept { return data_[index(n, c, y, x)]; }

  /// Pointer to the first element of sample `n`.
  double* sample(int n) noexcept { return data_.data() + static_cast<std::size_t>(n) * shape_.sample(); }
  const double* sample(int n) const noexcept {
    return data_.data() + static_cast<std::size_t>(n) * shape_.sample();
  }

  void fill(double v);
  /// Elementwise `this += other`. Shapes must match.
  void add_(const Tensor& other);

  double item() const;
  double sum() const;
  double min() const;
  double max() const;
  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t index(int n, int c, int y, int x) const noexcept {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }

  Shape shape_{};
  std::vector<double> data_;
};

/// Stacks single-sample tensors along the batch dimension.
Tensor stack_batch(std::span<const Tensor> samples);
/// Extracts sample `n` as a batch-of-one tensor.
Tensor slice_batch(const Tensor& t, int n);
/// Mirror along the width axis.
Tensor flip_horizontal(const Tensor& t);

}  // namespace vis2ir
