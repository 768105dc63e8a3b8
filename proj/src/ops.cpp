// Copyright 2026 The wseg Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "wseg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "wseg/error.hpp"
#include "wseg/kernels/conv.hpp"

namespace wseg {

namespace {

using detail::Node;

std::string axis_mismatch(const char* op, const char* axis, int got, int want) {
  return std::string(op) + ": " + axis + " axis mismatch (" +
         std::to_string(got) + " vs " + std::to_string(want) + ")";
}

void require_defined(const Tensor& t, const char* op, const char* what) {
  if (!t.defined()) {
    throw UsageError(std::string(op) + ": " + what + " tensor is undefined");
  }
}

bool needs_grad(const Node& n) { return n.requires_grad; }

}  // namespace

int conv_output_size(int in, int kernel, int stride, int padding,
                     int dilation) {
  const int span = in + 2 * padding - dilation * (kernel - 1) - 1;
  if (span < 0) return 0;
  return span / stride + 1;
}

Tensor conv2d(const Tensor& input, const ConvParams& params) {
  require_defined(input, "conv2d", "input");
  require_defined(params.weight, "conv2d", "weight");
  const Shape& xs = input.shape();
  const Shape& ws = params.weight.shape();
  if (params.stride < 1 || params.dilation < 1 || params.pad_h < 0 ||
      params.pad_w < 0) {
    throw ConfigError("conv2d: stride and dilation must be >= 1, padding >= 0");
  }
  if (ws.h < 1 || ws.w < 1) {
    throw ConfigError("conv2d: kernel extents must be >= 1");
  }
  if (xs.c != ws.c) throw DimensionError(axis_mismatch("conv2d", "channel", xs.c, ws.c));
  if (params.bias.defined() &&
      params.bias.numel() != static_cast<std::size_t>(ws.n)) {
    throw DimensionError(axis_mismatch("conv2d", "bias", static_cast<int>(params.bias.numel()), ws.n));
  }

  kernels::ConvGeometry g;
  g.batch = xs.n;
  g.in_channels = xs.c;
  g.in_h = xs.h;
  g.in_w = xs.w;
  g.out_channels = ws.n;
  g.kernel_h = ws.h;
  g.kernel_w = ws.w;
  g.stride = params.stride;
  g.pad_h = params.pad_h;
  g.pad_w = params.pad_w;
  g.dilation = params.dilation;
  const int oh = conv_output_size(xs.h, ws.h, g.stride, g.pad_h, g.dilation);
  const int ow = conv_output_size(xs.w, ws.w, g.stride, g.pad_w, g.dilation);
  if (oh < 1) throw ConfigError("conv2d: non-positive output height for input height " + std::to_string(xs.h));
  if (ow < 1) throw ConfigError("conv2d: non-positive output width for input width " + std::to_string(xs.w));

  std::vector<double> out(g.output_size());
  kernels::parallel::conv2d_forward(g, input.data(), params.weight.data(),
                                    params.bias.defined() ? params.bias.data()
                                                          : std::span<const double>{},
                                    out);
  std::vector<Tensor> inputs{input, params.weight};
  const bool has_bias = params.bias.defined();
  if (has_bias) inputs.push_back(params.bias);
  return detail::make_result(
      {xs.n, ws.n, oh, ow}, std::move(out), std::move(inputs),
      [g, has_bias](Node& self) {
        Node& in = *self.parents[0];
        Node& w = *self.parents[1];
        Node* b = has_bias ? self.parents[2].get() : nullptr;
        if (needs_grad(in)) {
          kernels::parallel::conv2d_backward_input(g, self.grad, w.value, in.grad);
        }
        const bool want_b = b && needs_grad(*b);
        if (needs_grad(w) || want_b) {
          std::vector<double> scratch;
          std::span<double> gw;
          if (needs_grad(w)) {
            gw = w.grad;
          } else {
            scratch.assign(w.value.size(), 0.0);
            gw = scratch;
          }
          kernels::parallel::conv2d_backward_weight(
              g, self.grad, in.value, gw,
              want_b ? std::span<double>(b->grad) : std::span<double>{});
        }
      });
}

Tensor batch_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                  RunningStats& stats, bool training) {
  require_defined(input, "batch_norm", "input");
  const Shape s = input.shape();
  const auto channels = static_cast<std::size_t>(s.c);
  if (gamma.numel() != channels) throw DimensionError(axis_mismatch("batch_norm", "gamma channel", static_cast<int>(gamma.numel()), s.c));
  if (beta.numel() != channels) throw DimensionError(axis_mismatch("batch_norm", "beta channel", static_cast<int>(beta.numel()), s.c));
  if (stats.mean.numel() != channels || stats.var.numel() != channels) {
    throw DimensionError(axis_mismatch("batch_norm", "running-stat channel",
                                       static_cast<int>(stats.mean.numel()), s.c));
  }
  const long plane = static_cast<long>(s.h) * s.w;
  const long count = static_cast<long>(s.n) * plane;
  if (count == 0) throw DimensionError("batch_norm: empty input " + s.str());

  std::span<const double> x = input.data();
  std::span<const double> ga = gamma.data();
  std::span<const double> be = beta.data();
  std::vector<double> y(x.size());
  std::vector<double> xhat(x.size());
  std::vector<double> inv_std(channels);
  std::span<double> rmean = stats.mean.mutable_data();
  std::span<double> rvar = stats.var.mutable_data();

#pragma omp parallel for schedule(static) if (count * s.c > 65536)
  for (int c = 0; c < s.c; ++c) {
    double mu;
    double var;
    if (training) {
      double acc = 0.0;
      for (int n = 0; n < s.n; ++n) {
        const double* p = x.data() + (static_cast<long>(n) * s.c + c) * plane;
        for (long i = 0; i < plane; ++i) acc += p[i];
      }
      mu = acc / static_cast<double>(count);
      double sq = 0.0;
      for (int n = 0; n < s.n; ++n) {
        const double* p = x.data() + (static_cast<long>(n) * s.c + c) * plane;
        for (long i = 0; i < plane; ++i) {
          const double d = p[i] - mu;
          sq += d * d;
        }
      }
      var = sq / static_cast<double>(count);
      const double unbiased =
          count > 1 ? sq / static_cast<double>(count - 1) : var;
      rmean[c] = (1.0 - kBatchNormMomentum) * rmean[c] + kBatchNormMomentum * mu;
      rvar[c] = (1.0 - kBatchNormMomentum) * rvar[c] + kBatchNormMomentum * unbiased;
    } else {
      mu = rmean[c];
      var = rvar[c];
    }
    const double inv = 1.0 / std::sqrt(var + kBatchNormEpsilon);
    inv_std[c] = inv;
    for (int n = 0; n < s.n; ++n) {
      const long off = (static_cast<long>(n) * s.c + c) * plane;
      for (long i = 0; i < plane; ++i) {
        const double h = (x[off + i] - mu) * inv;
        xhat[off + i] = h;
        y[off + i] = ga[c] * h + be[c];
      }
    }
  }

  return detail::make_result(
      s, std::move(y), {input, gamma, beta},
      [s, plane, count, training, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](Node& self) {
        Node& in = *self.parents[0];
        Node& gm = *self.parents[1];
        Node& bt = *self.parents[2];
        const std::vector<double>& g = self.grad;
#pragma omp parallel for schedule(static) if (count * s.c > 65536)
        for (int c = 0; c < s.c; ++c) {
          double sum_g = 0.0;
          double sum_gx = 0.0;
          for (int n = 0; n < s.n; ++n) {
            const long off = (static_cast<long>(n) * s.c + c) * plane;
            for (long i = 0; i < plane; ++i) {
              sum_g += g[off + i];
              sum_gx += g[off + i] * xhat[off + i];
            }
          }
          if (needs_grad(gm)) gm.grad[c] += sum_gx;
          if (needs_grad(bt)) bt.grad[c] += sum_g;
          if (!needs_grad(in)) continue;
          const double k = gm.value[c] * inv_std[c];
          if (training) {
            const double mean_g = sum_g / static_cast<double>(count);
            const double mean_gx = sum_gx / static_cast<double>(count);
            for (int n = 0; n < s.n; ++n) {
              const long off = (static_cast<long>(n) * s.c + c) * plane;
              for (long i = 0; i < plane; ++i) {
                in.grad[off + i] += k * (g[off + i] - mean_g - xhat[off + i] * mean_gx);
              }
            }
          } else {
            for (int n = 0; n < s.n; ++n) {
              const long off = (static_cast<long>(n) * s.c + c) * plane;
              for (long i = 0; i < plane; ++i) in.grad[off + i] += k * g[off + i];
            }
          }
        }
      });
}

Tensor activation(const Tensor& input, Activation kind) {
  require_defined(input, "activation", "input");
  std::span<const double> x = input.data();
  std::vector<double> y(x.size());
  if (kind == Activation::relu) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
    return detail::make_result(input.shape(), std::move(y), {input}, [](Node& self) {
      Node& in = *self.parents[0];
      for (std::size_t i = 0; i < in.value.size(); ++i) {
        if (in.value[i] > 0.0) in.grad[i] += self.grad[i];
      }
    });
  }
  // Kept one ulp inside (0, 1) so saturated inputs still honour the open range.
  constexpr double lo = std::numeric_limits<double>::min();
  const double hi = std::nextafter(1.0, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-x[i]))
                                 : std::exp(x[i]) / (1.0 + std::exp(x[i]));
    y[i] = std::clamp(v, lo, hi);
  }
  return detail::make_result(input.shape(), std::move(y), {input}, [](Node& self) {
    Node& in = *self.parents[0];
    for (std::size_t i = 0; i < in.value.size(); ++i) {
      const double s = self.value[i];
      in.grad[i] += self.grad[i] * s * (1.0 - s);
    }
  });
}

Tensor avg_pool_width(const Tensor& input) {
  require_defined(input, "avg_pool_width", "input");
  const Shape s = input.shape();
  if (s.w < 1) throw DimensionError("avg_pool_width: width axis is empty");
  std::span<const double> x = input.data();
  const std::size_t rows = static_cast<std::size_t>(s.n) * s.c * s.h;
  std::vector<double> y(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (int w = 0; w < s.w; ++w) acc += x[r * s.w + w];
    y[r] = acc / s.w;
  }
  return detail::make_result({s.n, s.c, s.h, 1}, std::move(y), {input},
                             [s, rows](Node& self) {
                               Node& in = *self.parents[0];
                               for (std::size_t r = 0; r < rows; ++r) {
                                 const double g = self.grad[r] / s.w;
                                 for (int w = 0; w < s.w; ++w) in.grad[r * s.w + w] += g;
                               }
                             });
}

Tensor global_avg_pool(const Tensor& input) {
  require_defined(input, "global_avg_pool", "input");
  const Shape s = input.shape();
  const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
  if (plane == 0) throw DimensionError("global_avg_pool: empty spatial extent");
  std::span<const double> x = input.data();
  const std::size_t maps = static_cast<std::size_t>(s.n) * s.c;
  std::vector<double> y(maps);
  for (std::size_t m = 0; m < maps; ++m) {
    double acc = 0.0;
    for (std::size_t i = 0; i < plane; ++i) acc += x[m * plane + i];
    y[m] = acc / static_cast<double>(plane);
  }
  return detail::make_result({s.n, s.c, 1, 1}, std::move(y), {input},
                             [maps, plane](Node& self) {
                               Node& in = *self.parents[0];
                               for (std::size_t m = 0; m < maps; ++m) {
                                 const double g = self.grad[m] / static_cast<double>(plane);
                                 for (std::size_t i = 0; i < plane; ++i) in.grad[m * plane + i] += g;
                               }
                             });
}

namespace {

struct AxisTaps {
  std::vector<int> lo;
  std::vector<int> hi;
  std::vector<double> frac;
};

AxisTaps align_corner_taps(int in, int out) {
  AxisTaps t;
  t.lo.resize(out);
  t.hi.resize(out);
  t.frac.resize(out);
  for (int o = 0; o < out; ++o) {
    const double src =
        out > 1 ? static_cast<double>(o) * (in - 1) / (out - 1) : 0.0;
    int lo = static_cast<int>(std::floor(src));
    lo = std::clamp(lo, 0, in - 1);
    t.lo[o] = lo;
    t.hi[o] = std::min(lo + 1, in - 1);
    t.frac[o] = src - lo;
  }
  return t;
}

}  // namespace

Tensor bilinear_resize(const Tensor& input, int out_h, int out_w) {
  require_defined(input, "bilinear_resize", "input");
  if (out_h < 1 || out_w < 1) {
    throw ConfigError("bilinear_resize: output size must be >= 1");
  }
  const Shape s = input.shape();
  if (s.h < 1 || s.w < 1) throw DimensionError("bilinear_resize: empty input " + s.str());
  AxisTaps ty = align_corner_taps(s.h, out_h);
  AxisTaps tx = align_corner_taps(s.w, out_w);
  const int maps = s.n * s.c;
  std::span<const double> x = input.data();
  std::vector<double> y(static_cast<std::size_t>(maps) * out_h * out_w);
#pragma omp parallel for schedule(static) if (maps > 1 && y.size() > 65536)
  for (int m = 0; m < maps; ++m) {
    const double* src = x.data() + static_cast<long>(m) * s.h * s.w;
    double* dst = y.data() + static_cast<long>(m) * out_h * out_w;
    for (int oy = 0; oy < out_h; ++oy) {
      const double* r0 = src + static_cast<long>(ty.lo[oy]) * s.w;
      const double* r1 = src + static_cast<long>(ty.hi[oy]) * s.w;
      const double fy = ty.frac[oy];
      for (int ox = 0; ox < out_w; ++ox) {
        const double fx = tx.frac[ox];
        const double top = (1.0 - fx) * r0[tx.lo[ox]] + fx * r0[tx.hi[ox]];
        const double bot = (1.0 - fx) * r1[tx.lo[ox]] + fx * r1[tx.hi[ox]];
        dst[static_cast<long>(oy) * out_w + ox] = (1.0 - fy) * top + fy * bot;
      }
    }
  }
  return detail::make_result(
      {s.n, s.c, out_h, out_w}, std::move(y), {input},
      [s, out_h, out_w, maps, ty = std::move(ty), tx = std::move(tx)](Node& self) {
        Node& in = *self.parents[0];
#pragma omp parallel for schedule(static) if (maps > 1 && self.grad.size() > 65536)
        for (int m = 0; m < maps; ++m) {
          double* dsrc = in.grad.data() + static_cast<long>(m) * s.h * s.w;
          const double* g = self.grad.data() + static_cast<long>(m) * out_h * out_w;
          for (int oy = 0; oy < out_h; ++oy) {
            double* r0 = dsrc + static_cast<long>(ty.lo[oy]) * s.w;
            double* r1 = dsrc + static_cast<long>(ty.hi[oy]) * s.w;
            const double fy = ty.frac[oy];
            for (int ox = 0; ox < out_w; ++ox) {
              const double v = g[static_cast<long>(oy) * out_w + ox];
              const double fx = tx.frac[ox];
              const double top = (1.0 - fy) * v;
              const double bot = fy * v;
              r0[tx.lo[ox]] += (1.0 - fx) * top;
              r0[tx.hi[ox]] += fx * top;
              r1[tx.lo[ox]] += (1.0 - fx) * bot;
              r1[tx.hi[ox]] += fx * bot;
            }
          }
        }
      });
}

namespace {

enum class BinaryKind { add, mul };

Tensor broadcast_binary(const Tensor& a, const Tensor& b, BinaryKind kind) {
  const char* op = kind == BinaryKind::add ? "add" : "mul";
  require_defined(a, op, "left");
  require_defined(b, op, "right");
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  if (sb.c != sa.c) throw DimensionError(axis_mismatch(op, "channel", sb.c, sa.c));
  if (sb.h != sa.h) throw DimensionError(axis_mismatch(op, "height", sb.h, sa.h));
  if (sb.n != sa.n && sb.n != 1) throw DimensionError(axis_mismatch(op, "batch", sb.n, sa.n));
  if (sb.w != sa.w && sb.w != 1) throw DimensionError(axis_mismatch(op, "width", sb.w, sa.w));
  const bool bn = sb.n == 1 && sa.n != 1;
  const bool bw = sb.w == 1 && sa.w != 1;

  std::span<const double> x = a.data();
  std::span<const double> z = b.data();
  std::vector<double> y(x.size());
  auto b_index = [=](int n, int c, int h, int w) {
    return sb.index(bn ? 0 : n, c, h, bw ? 0 : w);
  };
  for (int n = 0; n < sa.n; ++n) {
    for (int c = 0; c < sa.c; ++c) {
      for (int h = 0; h < sa.h; ++h) {
        const std::size_t base = sa.index(n, c, h, 0);
        for (int w = 0; w < sa.w; ++w) {
          const double bv = z[b_index(n, c, h, w)];
          y[base + w] = kind == BinaryKind::add ? x[base + w] + bv : x[base + w] * bv;
        }
      }
    }
  }
  return detail::make_result(sa, std::move(y), {a, b}, [=](Node& self) {
    Node& na = *self.parents[0];
    Node& nb = *self.parents[1];
    for (int n = 0; n < sa.n; ++n) {
      for (int c = 0; c < sa.c; ++c) {
        for (int h = 0; h < sa.h; ++h) {
          const std::size_t base = sa.index(n, c, h, 0);
          for (int w = 0; w < sa.w; ++w) {
            const std::size_t bi = b_index(n, c, h, w);
            const double g = self.grad[base + w];
            if (kind == BinaryKind::add) {
              if (needs_grad(na)) na.grad[base + w] += g;
              if (needs_grad(nb)) nb.grad[bi] += g;
            } else {
              if (needs_grad(na)) na.grad[base + w] += g * nb.value[bi];
              if (needs_grad(nb)) nb.grad[bi] += g * na.value[base + w];
            }
          }
        }
      }
    }
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return broadcast_binary(a, b, BinaryKind::add);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return broadcast_binary(a, b, BinaryKind::mul);
}

Tensor scale(const Tensor& x, double factor) {
  require_defined(x, "scale", "input");
  std::span<const double> v = x.data();
  std::vector<double> y(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) y[i] = factor * v[i];
  return detail::make_result(x.shape(), std::move(y), {x}, [factor](Node& self) {
    Node& in = *self.parents[0];
    for (std::size_t i = 0; i < in.grad.size(); ++i) in.grad[i] += factor * self.grad[i];
  });
}

Tensor sum(const Tensor& x) {
  require_defined(x, "sum", "input");
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  return detail::make_result({1, 1, 1, 1}, {acc}, {x}, [](Node& self) {
    Node& in = *self.parents[0];
    const double g = self.grad[0];
    for (double& d : in.grad) d += g;
  });
}

Tensor concat_channels(std::span<const Tensor> parts) {
  if (parts.empty()) throw UsageError("concat_channels: nothing to concatenate");
  const Shape first = parts.front().shape();
  int channels = 0;
  for (const Tensor& p : parts) {
    require_defined(p, "concat_channels", "part");
    const Shape s = p.shape();
    if (s.n != first.n) throw DimensionError(axis_mismatch("concat_channels", "batch", s.n, first.n));
    if (s.h != first.h) throw DimensionError(axis_mismatch("concat_channels", "height", s.h, first.h));
    if (s.w != first.w) throw DimensionError(axis_mismatch("concat_channels", "width", s.w, first.w));
    channels += s.c;
  }
  const Shape out{first.n, channels, first.h, first.w};
  const std::size_t plane = static_cast<std::size_t>(first.h) * first.w;
  std::vector<double> y(out.numel());
  std::vector<int> offsets;
  int offset = 0;
  for (const Tensor& p : parts) {
    offsets.push_back(offset);
    const int c = p.shape().c;
    std::span<const double> v = p.data();
    for (int n = 0; n < first.n; ++n) {
      std::copy_n(v.data() + static_cast<std::size_t>(n) * c * plane, c * plane,
                  y.data() + (static_cast<std::size_t>(n) * channels + offset) * plane);
    }
    offset += c;
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return detail::make_result(out, std::move(y), std::move(inputs),
                             [out, plane, offsets](Node& self) {
                               for (std::size_t k = 0; k < self.parents.size(); ++k) {
                                 Node& p = *self.parents[k];
                                 if (!needs_grad(p)) continue;
                                 const int c = p.shape.c;
                                 for (int n = 0; n < out.n; ++n) {
                                   const double* g = self.grad.data() +
                                                     (static_cast<std::size_t>(n) * out.c + offsets[k]) * plane;
                                   double* d = p.grad.data() + static_cast<std::size_t>(n) * c * plane;
                                   for (std::size_t i = 0; i < c * plane; ++i) d[i] += g[i];
                                 }
                               }
                             });
}

Tensor softmax_cross_entropy(const Tensor& logits, const Labels& labels,
                             std::span<const double> class_weights,
                             int ignore_index) {
  require_defined(logits, "softmax_cross_entropy", "logits");
  const Shape s = logits.shape();
  if (labels.n != s.n) throw DimensionError(axis_mismatch("softmax_cross_entropy", "batch", labels.n, s.n));
  if (labels.h != s.h) throw DimensionError(axis_mismatch("softmax_cross_entropy", "height", labels.h, s.h));
  if (labels.w != s.w) throw DimensionError(axis_mismatch("softmax_cross_entropy", "width", labels.w, s.w));
  if (labels.values.size() != static_cast<std::size_t>(s.n) * s.h * s.w) {
    throw DimensionError("softmax_cross_entropy: label buffer size does not match its extents");
  }
  if (class_weights.size() != static_cast<std::size_t>(s.c)) {
    throw DimensionError(axis_mismatch("softmax_cross_entropy", "class-weight", static_cast<int>(class_weights.size()), s.c));
  }
  const int k_classes = s.c;
  const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
  std::span<const double> x = logits.data();

  double loss = 0.0;
  double weight_sum = 0.0;
  for (int n = 0; n < s.n; ++n) {
    const double* base = x.data() + static_cast<std::size_t>(n) * k_classes * plane;
    for (std::size_t p = 0; p < plane; ++p) {
      const int y = labels.values[static_cast<std::size_t>(n) * plane + p];
      if (y == ignore_index) continue;
      if (y < 0 || y >= k_classes) {
        throw DataError("softmax_cross_entropy: label " + std::to_string(y) +
                        " outside [0," + std::to_string(k_classes) + ")");
      }
      double mx = base[p];
      for (int k = 1; k < k_classes; ++k) mx = std::max(mx, base[k * plane + p]);
      double z = 0.0;
      for (int k = 0; k < k_classes; ++k) z += std::exp(base[k * plane + p] - mx);
      const double nll = mx + std::log(z) - base[y * plane + p];
      loss += class_weights[y] * nll;
      weight_sum += class_weights[y];
    }
  }
  if (!(weight_sum > 0.0)) {
    throw UndefinedError("softmax_cross_entropy: no non-ignored pixel with positive weight");
  }
  loss /= weight_sum;

  std::vector<double> weights(class_weights.begin(), class_weights.end());
  return detail::make_result(
      {1, 1, 1, 1}, {loss}, {logits},
      [s, plane, labels, weights = std::move(weights), weight_sum, ignore_index](Node& self) {
        Node& in = *self.parents[0];
        const double g = self.grad[0] / weight_sum;
        const int kc = s.c;
        for (int n = 0; n < s.n; ++n) {
          const double* base = in.value.data() + static_cast<std::size_t>(n) * kc * plane;
          double* dbase = in.grad.data() + static_cast<std::size_t>(n) * kc * plane;
          for (std::size_t p = 0; p < plane; ++p) {
            const int y = labels.values[static_cast<std::size_t>(n) * plane + p];
            if (y == ignore_index) continue;
            double mx = base[p];
            for (int k = 1; k < kc; ++k) mx = std::max(mx, base[k * plane + p]);
            double z = 0.0;
            for (int k = 0; k < kc; ++k) z += std::exp(base[k * plane + p] - mx);
            const double scale_y = g * weights[y];
            for (int k = 0; k < kc; ++k) {
              const double prob = std::exp(base[k * plane + p] - mx) / z;
              dbase[k * plane + p] += scale_y * (prob - (k == y ? 1.0 : 0.0));
            }
          }
        }
      });
}

Labels argmax_channels(const Tensor& logits) {
  const Shape s = logits.shape();
  Labels out{s.n, s.h, s.w, std::vector<int>(static_cast<std::size_t>(s.n) * s.h * s.w)};
  const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
  std::span<const double> x = logits.data();
  for (int n = 0; n < s.n; ++n) {
    const double* base = x.data() + static_cast<std::size_t>(n) * s.c * plane;
    for (std::size_t p = 0; p < plane; ++p) {
      int best = 0;
      for (int k = 1; k < s.c; ++k) {
        if (base[k * plane + p] > base[best * plane + p]) best = k;
      }
      out.values[static_cast<std::size_t>(n) * plane + p] = best;
    }
  }
  return out;
}

}  // namespace wseg
