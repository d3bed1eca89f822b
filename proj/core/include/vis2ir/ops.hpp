#pragma once

#include <span>
#include <vector>

#include "vis2ir/autograd.hpp"

namespace vis2ir::ops {

// Geometry helpers shared by ops, layers, and shape oracles in tests.

/// Output extent of a strided window with zero padding: floor((in + 2*pad - kernel) / stride) + 1.
int conv_out(int in, int kernel, int stride, int pad);
/// Output extent of a transposed convolution.
int conv_transpose_out(int in, int kernel, int stride, int pad, int output_pad);
/// Index into [0, n) under mirror reflection without repeating the edge sample.
int reflect_index(int i, int n);

// Differentiable ops. All take NCHW Vars.

/// weight: [out, in, k, k]; bias: [1, out, 1, 1] or empty Var.
Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad);
/// weight: [in, out, k, k] (transposed-convolution layout); bias as conv2d.
Var conv_transpose2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad, int output_pad);
/// Mirror-pads the spatial dimensions.
Var reflect_pad(const Var& x, int top, int bottom, int left, int right);
inline Var reflect_pad(const Var& x, int pad) { return reflect_pad(x, pad, pad, pad, pad); }
/// Per-sample, per-channel normalisation without affine parameters.
Var instance_norm(const Var& x, double eps = 1e-5);
Var relu(const Var& x);
Var leaky_relu(const Var& x, double slope);
Var tanh(const Var& x);
/// Clamps to [lo, hi]; gradient passes only where the input is strictly inside.
Var clamp(const Var& x, double lo, double hi);
/// Unpadded average pooling with a square window.
Var avg_pool(const Var& x, int kernel, int stride);
/// 3x3 stride-2 average pooling over a reflect-padded input; output extent ceil(in / 2).
Var downsample2(const Var& x);

/// Elementwise sum. Mismatched shapes raise ConsistencyError.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var scale(const Var& x, double factor);
/// x * mul + shift
Var affine(const Var& x, double mul, double shift);
/// Concatenates along the channel axis.
Var concat_channels(const Var& a, const Var& b);

// Reductions to scalars.

Var sum_all(const Var& x);
Var mean_all(const Var& x);
/// mean((x - target)^2)
Var mean_squared_to(const Var& x, double target);
/// mean of binary cross-entropy between sigmoid(x) and a constant label, in the stable
/// log-sum-exp form.
Var bce_with_logits_mean(const Var& x, double label);
/// Sum of |a - b| over all elements.
Var l1_sum(const Var& a, const Var& b);
/// Sum of scalar Vars.
Var add_n(std::span<const Var> scalars);

}  // namespace vis2ir::ops
