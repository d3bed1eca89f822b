#include "vis2ir/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "vis2ir/error.hpp"

namespace vis2ir::ops {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

struct Window {
  int channels, height, width;  // image side
  int kernel, stride, pad;
  int out_h, out_w;  // column side
};

// cols: [channels * k * k, out_h * out_w]
void im2col(const double* img, const Window& g, double* cols) {
  const int positions = g.out_h * g.out_w;
  for (int c = 0; c < g.channels; ++c) {
    const double* plane = img + static_cast<std::size_t>(c) * g.height * g.width;
    for (int ky = 0; ky < g.kernel; ++ky) {
      for (int kx = 0; kx < g.kernel; ++kx) {
        double* row = cols + (static_cast<std::size_t>(c * g.kernel + ky) * g.kernel + kx) * positions;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          double* dst = row + static_cast<std::size_t>(oy) * g.out_w;
          if (iy < 0 || iy >= g.height) {
            std::fill(dst, dst + g.out_w, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(iy) * g.width;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            dst[ox] = (ix >= 0 && ix < g.width) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

// Adjoint of im2col: accumulates columns back into the image.
void col2im(const double* cols, const Window& g, double* img) {
  const int positions = g.out_h * g.out_w;
  for (int c = 0; c < g.channels; ++c) {
    double* plane = img + static_cast<std::size_t>(c) * g.height * g.width;
    for (int ky = 0; ky < g.kernel; ++ky) {
      for (int kx = 0; kx < g.kernel; ++kx) {
        const double* row = cols + (static_cast<std::size_t>(c * g.kernel + ky) * g.kernel + kx) * positions;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.height) continue;
          const double* src = row + static_cast<std::size_t>(oy) * g.out_w;
          double* dst = plane + static_cast<std::size_t>(iy) * g.width;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.width) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

void add_bias(Tensor& out, const Tensor& bias) {
  const Shape& s = out.shape();
  const std::size_t plane = s.plane();
  for (int n = 0; n < s.n; ++n) {
    double* p = out.sample(n);
    for (int c = 0; c < s.c; ++c) {
      const double b = bias[static_cast<std::size_t>(c)];
      for (std::size_t i = 0; i < plane; ++i) p[c * plane + i] += b;
    }
  }
}

void accumulate_bias_grad(const Tensor& grad_out, Tensor& bias_grad) {
  const Shape& s = grad_out.shape();
  const std::size_t plane = s.plane();
  for (int n = 0; n < s.n; ++n) {
    const double* p = grad_out.sample(n);
    for (int c = 0; c < s.c; ++c) {
      double acc = 0.0;
      for (std::size_t i = 0; i < plane; ++i) acc += p[c * plane + i];
      bias_grad[static_cast<std::size_t>(c)] += acc;
    }
  }
}

void check_bias(const Var& bias, int channels, const char* op) {
  if (!bias) return;
  if (bias.shape() != Shape{1, channels, 1, 1}) {
    throw PreconditionError(std::string(op) + ": bias shape " + to_string(bias.shape()) + " for " +
                            std::to_string(channels) + " channels");
  }
}

template <typename F>
Var unary(const Var& x, F&& forward, Var::BackwardFn bwd) {
  Tensor out(x.shape());
  const Tensor& in = x.value();
  for (std::size_t i = 0; i < in.numel(); ++i) out[i] = forward(in[i]);
  return Var::from_op(std::move(out), {x}, std::move(bwd));
}

}  // namespace

int conv_out(int in, int kernel, int stride, int pad) { return (in + 2 * pad - kernel) / stride + 1; }

int conv_transpose_out(int in, int kernel, int stride, int pad, int output_pad) {
  return (in - 1) * stride - 2 * pad + kernel + output_pad;
}

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad) {
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  if (ws.c != xs.c || ws.h != ws.w) {
    throw PreconditionError("conv2d: weight " + to_string(ws) + " incompatible with input " + to_string(xs));
  }
  check_bias(bias, ws.n, "conv2d");
  const Window g{xs.c, xs.h, xs.w, ws.h, stride, pad, conv_out(xs.h, ws.h, stride, pad),
                 conv_out(xs.w, ws.h, stride, pad)};
  if (g.out_h <= 0 || g.out_w <= 0) {
    throw PreconditionError("conv2d: input " + to_string(xs) + " too small for kernel " + std::to_string(ws.h));
  }
  const int rows = xs.c * g.kernel * g.kernel;
  const int positions = g.out_h * g.out_w;

  Tensor out({xs.n, ws.n, g.out_h, g.out_w});
  std::vector<double> cols(static_cast<std::size_t>(rows) * positions);
  ConstMapMat w(weight.value().data(), ws.n, rows);
  for (int n = 0; n < xs.n; ++n) {
    im2col(x.value().sample(n), g, cols.data());
    MapMat o(out.sample(n), ws.n, positions);
    o.noalias() = w * ConstMapMat(cols.data(), rows, positions);
  }
  if (bias) add_bias(out, bias.value());

  std::vector<Var> inputs{x, weight};
  if (bias) inputs.push_back(bias);
  return Var::from_op(std::move(out), std::move(inputs),
                      [g, rows, positions](const Tensor&, const Tensor& gout, std::vector<Var>& in) {
                        const Var& xin = in[0];
                        Var& w = in[1];
                        const int out_c = w.shape().n;
                        std::vector<double> cols(static_cast<std::size_t>(rows) * positions);
                        ConstMapMat wm(w.value().data(), out_c, rows);
                        for (int n = 0; n < gout.shape().n; ++n) {
                          ConstMapMat go(gout.sample(n), out_c, positions);
                          if (w.requires_grad()) {
                            im2col(xin.value().sample(n), g, cols.data());
                            MapMat(w.grad_buffer().data(), out_c, rows).noalias() +=
                                go * ConstMapMat(cols.data(), rows, positions).transpose();
                          }
                          if (in[0].requires_grad()) {
                            MapMat(cols.data(), rows, positions).noalias() = wm.transpose() * go;
                            col2im(cols.data(), g, in[0].grad_buffer().sample(n));
                          }
                        }
                        if (in.size() > 2 && in[2].requires_grad()) accumulate_bias_grad(gout, in[2].grad_buffer());
                      });
}

Var conv_transpose2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad, int output_pad) {
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  if (ws.n != xs.c || ws.h != ws.w) {
    throw PreconditionError("conv_transpose2d: weight " + to_string(ws) + " incompatible with input " +
                            to_string(xs));
  }
  check_bias(bias, ws.c, "conv_transpose2d");
  const int out_h = conv_transpose_out(xs.h, ws.h, stride, pad, output_pad);
  const int out_w = conv_transpose_out(xs.w, ws.h, stride, pad, output_pad);
  // The column side of the window is the (smaller) input grid.
  const Window g{ws.c, out_h, out_w, ws.h, stride, pad, xs.h, xs.w};
  if (conv_out(out_h, ws.h, stride, pad) != xs.h || conv_out(out_w, ws.h, stride, pad) != xs.w) {
    throw PreconditionError("conv_transpose2d: inconsistent geometry for input " + to_string(xs));
  }
  const int rows = ws.c * g.kernel * g.kernel;
  const int positions = xs.h * xs.w;

  Tensor out({xs.n, ws.c, out_h, out_w});
  std::vector<double> cols(static_cast<std::size_t>(rows) * positions);
  ConstMapMat w(weight.value().data(), xs.c, rows);
  for (int n = 0; n < xs.n; ++n) {
    MapMat(cols.data(), rows, positions).noalias() =
        w.transpose() * ConstMapMat(x.value().sample(n), xs.c, positions);
    col2im(cols.data(), g, out.sample(n));
  }
  if (bias) add_bias(out, bias.value());

  std::vector<Var> inputs{x, weight};
  if (bias) inputs.push_back(bias);
  return Var::from_op(std::move(out), std::move(inputs),
                      [g, rows, positions](const Tensor&, const Tensor& gout, std::vector<Var>& in) {
                        Var& w = in[1];
                        const int in_c = w.shape().n;
                        std::vector<double> cols(static_cast<std::size_t>(rows) * positions);
                        ConstMapMat wm(w.value().data(), in_c, rows);
                        for (int n = 0; n < gout.shape().n; ++n) {
                          im2col(gout.sample(n), g, cols.data());
                          ConstMapMat gc(cols.data(), rows, positions);
                          if (w.requires_grad()) {
                            MapMat(w.grad_buffer().data(), in_c, rows).noalias() +=
                                ConstMapMat(in[0].value().sample(n), in_c, positions) * gc.transpose();
                          }
                          if (in[0].requires_grad()) {
                            MapMat(in[0].grad_buffer().sample(n), in_c, positions).noalias() += wm * gc;
                          }
                        }
                        if (in.size() > 2 && in[2].requires_grad()) accumulate_bias_grad(gout, in[2].grad_buffer());
                      });
}

Var reflect_pad(const Var& x, int top, int bottom, int left, int right) {
  const Shape& s = x.shape();
  if (top < 0 || bottom < 0 || left < 0 || right < 0) throw PreconditionError("reflect_pad: negative pad");
  const Shape os{s.n, s.c, s.h + top + bottom, s.w + left + right};
  Tensor out(os);
  const Tensor& in = x.value();
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < os.h; ++y) {
        const int sy = reflect_index(y - top, s.h);
        for (int xx = 0; xx < os.w; ++xx) out.at(n, c, y, xx) = in.at(n, c, sy, reflect_index(xx - left, s.w));
      }
  return Var::from_op(std::move(out), {x}, [top, left](const Tensor&, const Tensor& gout, std::vector<Var>& in) {
    Tensor& gx = in[0].grad_buffer();
    const Shape& is = gx.shape();
    const Shape& gs = gout.shape();
    for (int n = 0; n < gs.n; ++n)
      for (int c = 0; c < gs.c; ++c)
        for (int y = 0; y < gs.h; ++y) {
          const int sy = reflect_index(y - top, is.h);
          for (int xx = 0; xx < gs.w; ++xx) gx.at(n, c, sy, reflect_index(xx - left, is.w)) += gout.at(n, c, y, xx);
        }
  });
}

Var instance_norm(const Var& x, double eps) {
  const Shape& s = x.shape();
  const std::size_t plane = s.plane();
  if (plane == 0) throw PreconditionError("instance_norm: empty plane");
  Tensor out(s);
  std::vector<double> inv_std(static_cast<std::size_t>(s.n) * s.c);
  const Tensor& in = x.value();
  for (std::size_t p = 0; p < inv_std.size(); ++p) {
    const double* src = in.data() + p * plane;
    double mean = 0.0;
    for (std::size_t i = 0; i < plane; ++i) mean += src[i];
    mean /= static_cast<double>(plane);
    double var = 0.0;
    for (std::size_t i = 0; i < plane; ++i) var += (src[i] - mean) * (src[i] - mean);
    var /= static_cast<double>(plane);
    inv_std[p] = 1.0 / std::sqrt(var + eps);
    double* dst = out.data() + p * plane;
    for (std::size_t i = 0; i < plane; ++i) dst[i] = (src[i] - mean) * inv_std[p];
  }
  return Var::from_op(std::move(out), {x},
                      [inv_std = std::move(inv_std), plane](const Tensor& y, const Tensor& gout, std::vector<Var>& in) {
                        Tensor& gx = in[0].grad_buffer();
                        const double inv_n = 1.0 / static_cast<double>(plane);
                        for (std::size_t p = 0; p < inv_std.size(); ++p) {
                          const double* yp = y.data() + p * plane;
                          const double* gp = gout.data() + p * plane;
                          double mean_g = 0.0;
                          double mean_gy = 0.0;
                          for (std::size_t i = 0; i < plane; ++i) {
                            mean_g += gp[i];
                            mean_gy += gp[i] * yp[i];
                          }
                          mean_g *= inv_n;
                          mean_gy *= inv_n;
                          double* dst = gx.data() + p * plane;
                          for (std::size_t i = 0; i < plane; ++i)
                            dst[i] += inv_std[p] * (gp[i] - mean_g - yp[i] * mean_gy);
                        }
                      });
}

Var relu(const Var& x) {
  return unary(x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](const Tensor& y, const Tensor& gout, std::vector<Var>& in) {
                 Tensor& gx = in[0].grad_buffer();
                 for (std::size_t i = 0; i < gx.numel(); ++i)
                   if (y[i] > 0.0) gx[i] += gout[i];
               });
}

Var leaky_relu(const Var& x, double slope) {
  return unary(x, [slope](double v) { return v > 0.0 ? v : slope * v; },
               [slope](const Tensor&, const Tensor& gout, std::vector<Var>& in) {
                 const Tensor& xv = in[0].value();
                 Tensor& gx = in[0].grad_buffer();
                 for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += xv[i] > 0.0 ? gout[i] : slope * gout[i];
               });
}

Var tanh(const Var& x) {
  return unary(x, [](double v) { return std::tanh(v); },
               [](const Tensor& y, const Tensor& gout, std::vector<Var>& in) {
                 Tensor& gx = in[0].grad_buffer();
                 for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += gout[i] * (1.0 - y[i] * y[i]);
               });
}

Var clamp(const Var& x, double lo, double hi) {
  if (!(lo <= hi)) throw PreconditionError("clamp: empty interval");
  return unary(x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
               [lo, hi](const Tensor&, const Tensor& gout, std::vector<Var>& in) {
                 const Tensor& xv = in[0].value();
                 Tensor& gx = in[0].grad_buffer();
                 for (std::size_t i = 0; i < gx.numel(); ++i)
                   if (xv[i] > lo && xv[i] < hi) gx[i] += gout[i];
               });
}

Var avg_pool(const Var& x, int kernel, int stride) {
  const Shape& s = x.shape();
  const int oh = conv_out(s.h, kernel, stride, 0);
  const int ow = conv_out(s.w, kernel, stride, 0);
  if (oh <= 0 || ow <= 0) throw PreconditionError("avg_pool: input " + to_string(s) + " smaller than window");
  Tensor out({s.n, s.c, oh, ow});
  const double inv = 1.0 / (kernel * kernel);
  const Tensor& in = x.value();
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          double acc = 0.0;
          for (int ky = 0; ky < kernel; ++ky)
            for (int kx = 0; kx < kernel; ++kx) acc += in.at(n, c, oy * stride + ky, ox * stride + kx);
          out.at(n, c, oy, ox) = acc * inv;
        }
  return Var::from_op(std::move(out), {x}, [kernel, stride, inv](const Tensor&, const Tensor& gout, std::vector<Var>& in) {
    Tensor& gx = in[0].grad_buffer();
    const Shape& gs = gout.shape();
    for (int n = 0; n < gs.n; ++n)
      for (int c = 0; c < gs.c; ++c)
        for (int oy = 0; oy < gs.h; ++oy)
          for (int ox = 0; ox < gs.w; ++ox) {
            const double g = gout.at(n, c, oy, ox) * inv;
            for (int ky = 0; ky < kernel; ++ky)
              for (int kx = 0; kx < kernel; ++kx) gx.at(n, c, oy * stride + ky, ox * stride + kx) += g;
          }
  });
}

Var downsample2(const Var& x) {
  // One sample of padding on every side gives floor((in - 1) / 2) + 1 == ceil(in / 2).
  return avg_pool(reflect_pad(x, 1), 3, 2);
}

Var add(const Var& a, const Var& b) {
  if (a.shape() != b.shape()) {
    throw ConsistencyError("add: shape " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  Tensor out = a.value();
  out.add_(b.value());
  return Var::from_op(std::move(out), {a, b}, [](const Tensor&, const Tensor& gout, std::vector<Var>& in) {
    for (auto& v : in)
      if (v.requires_grad()) v.grad_buffer().add_(gout);
  });
}

Var sub(const Var& a, const Var& b) { return add(a, scale(b, -1.0)); }

Var scale(const Var& x, double factor) {
  return unary(x, [factor](double v) { return v * factor; },
               [factor](const Tensor&, const Tensor& gout, std::vector<Var>& in) {
                 Tensor& gx = in[0].grad_buffer();
                 for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += factor * gout[i];
               });
}

Var affine(const Var& x, double mul, double shift) {
  return unary(x, [mul, shift](double v) { return v * mul + shift; },
               [mul](const Tensor&, const Tensor& gout, std::vector<Var>& in) {
                 Tensor& gx = in[0].grad_buffer();
                 for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += mul * gout[i];
               });
}

Var concat_channels(const Var& a, const Var& b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (as.n != bs.n || as.h != bs.h || as.w != bs.w) {
    throw PreconditionError("concat_channels: spatial/batch mismatch " + to_string(as) + " vs " + to_string(bs));
  }
  Tensor out({as.n, as.c + bs.c, as.h, as.w});
  for (int n = 0; n < as.n; ++n) {
    std::copy_n(a.value().sample(n), as.sample(), out.sample(n));
    std::copy_n(b.value().sample(n), bs.sample(), out.sample(n) + as.sample());
  }
  return Var::from_op(std::move(out), {a, b}, [](const Tensor&, const Tensor& gout, std::vector<Var>& in) {
    const std::size_t a_len = in[0].shape().sample();
    const std::size_t b_len = in[1].shape().sample();
    for (int n = 0; n < gout.shape().n; ++n) {
      const double* g = gout.sample(n);
      if (in[0].requires_grad()) {
        double* d = in[0].grad_buffer().sample(n);
        for (std::size_t i = 0; i < a_len; ++i) d[i] += g[i];
      }
      if (in[1].requires_grad()) {
        double* d = in[1].grad_buffer().sample(n);
        for (std::size_t i = 0; i < b_len; ++i) d[i] += g[a_len + i];
      }
    }
  });
}

Var sum_all(const Var& x) {
  return Var::from_op(Tensor::scalar(x.value().sum()), {x},
                      [](const Tensor&, const Tensor& gout, std::vector<Var>& in) {
                        Tensor& gx = in[0].grad_buffer();
                        const double g = gout[0];
                        for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += g;
                      });
}

Var mean_all(const Var& x) {
  if (x.value().numel() == 0) throw PreconditionError("mean_all: empty tensor");
  return scale(sum_all(x), 1.0 / static_cast<double>(x.value().numel()));
}

Var mean_squared_to(const Var& x, double target) {
  const Tensor& v = x.value();
  if (v.numel() == 0) throw PreconditionError("mean_squared_to: empty tensor");
  double acc = 0.0;
  for (std::size_t i = 0; i < v.numel(); ++i) acc += (v[i] - target) * (v[i] - target);
  const double inv = 1.0 / static_cast<double>(v.numel());
  return Var::from_op(Tensor::scalar(acc * inv), {x},
                      [target, inv](const Tensor&, const Tensor& gout, std::vector<Var>& in) {
                        const Tensor& xv = in[0].value();
                        Tensor& gx = in[0].grad_buffer();
                        for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += gout[0] * 2.0 * (xv[i] - target) * inv;
                      });
}

Var bce_with_logits_mean(const Var& x, double label) {
  const Tensor& v = x.value();
  if (v.numel() == 0) throw PreconditionError("bce_with_logits_mean: empty tensor");
  // -[y log s(z) + (1-y) log(1 - s(z))] = max(z, 0) - z*y + log(1 + exp(-|z|))
  double acc = 0.0;
  for (std::size_t i = 0; i < v.numel(); ++i) {
    const double z = v[i];
    acc += std::max(z, 0.0) - z * label + std::log1p(std::exp(-std::abs(z)));
  }
  const double inv = 1.0 / static_cast<double>(v.numel());
  return Var::from_op(Tensor::scalar(acc * inv), {x},
                      [label, inv](const Tensor&, const Tensor& gout, std::vector<Var>& in) {
                        const Tensor& xv = in[0].value();
                        Tensor& gx = in[0].grad_buffer();
                        for (std::size_t i = 0; i < gx.numel(); ++i) {
                          const double sig = 1.0 / (1.0 + std::exp(-xv[i]));
                          gx[i] += gout[0] * (sig - label) * inv;
                        }
                      });
}

Var l1_sum(const Var& a, const Var& b) {
  if (a.shape() != b.shape()) {
    throw PreconditionError("l1_sum: shape " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  double acc = 0.0;
  for (std::size_t i = 0; i < av.numel(); ++i) acc += std::abs(av[i] - bv[i]);
  return Var::from_op(Tensor::scalar(acc), {a, b}, [](const Tensor&, const Tensor& gout, std::vector<Var>& in) {
    const Tensor& av = in[0].value();
    const Tensor& bv = in[1].value();
    const double g = gout[0];
    auto sign = [](double d) { return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0); };
    if (in[0].requires_grad()) {
      Tensor& ga = in[0].grad_buffer();
      for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += g * sign(av[i] - bv[i]);
    }
    if (in[1].requires_grad()) {
      Tensor& gb = in[1].grad_buffer();
      for (std::size_t i = 0; i < gb.numel(); ++i) gb[i] -= g * sign(av[i] - bv[i]);
    }
  });
}

Var add_n(std::span<const Var> scalars) {
  if (scalars.empty()) throw PreconditionError("add_n: no terms");
  double acc = 0.0;
  for (const auto& s : scalars) acc += s.value().item();
  return Var::from_op(Tensor::scalar(acc), std::vector<Var>(scalars.begin(), scalars.end()),
                      [](const Tensor&, const Tensor& gout, std::vector<Var>& in) {
                        for (auto& v : in)
                          if (v.requires_grad()) v.grad_buffer()[0] += gout[0];
                      });
}

}  // namespace vis2ir::ops
