// Copyright 2026 The memdef Authors
// SPDX-License-Identifier: Apache-2.0

#include "memdef/tensor/conv.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <string>
#include <vector>

namespace memdef {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;

struct Window {
  std::int64_t channels, height, width;  // image being unfolded
  std::int64_t kh, kw, stride, padding;
  std::int64_t out_h, out_w;             // positions of the sliding window

  std::int64_t rows() const { return channels * kh * kw; }
  std::int64_t cols() const { return out_h * out_w; }
};

// cols[(c*kh + i)*kw + j, oh*out_w + ow] = img[c, oh*s + i - p, ow*s + j - p]
template <typename T>
void im2col(const T* img, const Window& g, T* cols) {
  const std::int64_t n = g.cols();
  for (std::int64_t c = 0; c < g.channels; ++c) {
    for (std::int64_t i = 0; i < g.kh; ++i) {
      for (std::int64_t j = 0; j < g.kw; ++j) {
        T* dst = cols + ((c * g.kh + i) * g.kw + j) * n;
        for (std::int64_t oh = 0; oh < g.out_h; ++oh) {
          const std::int64_t y = oh * g.stride + i - g.padding;
          T* row = dst + oh * g.out_w;
          if (y < 0 || y >= g.height) {
            std::fill(row, row + g.out_w, T(0));
            continue;
          }
          const T* src = img + (c * g.height + y) * g.width;
          for (std::int64_t ow = 0; ow < g.out_w; ++ow) {
            const std::int64_t x = ow * g.stride + j - g.padding;
            row[ow] = (x >= 0 && x < g.width) ? src[x] : T(0);
          }
        }
      }
    }
  }
}

// Scatter-add inverse of im2col.
template <typename T>
void col2im(const T* cols, const Window& g, T* img) {
  const std::int64_t n = g.cols();
  for (std::int64_t c = 0; c < g.channels; ++c) {
    for (std::int64_t i = 0; i < g.kh; ++i) {
      for (std::int64_t j = 0; j < g.kw; ++j) {
        const T* src = cols + ((c * g.kh + i) * g.kw + j) * n;
        for (std::int64_t oh = 0; oh < g.out_h; ++oh) {
          const std::int64_t y = oh * g.stride + i - g.padding;
          if (y < 0 || y >= g.height) continue;
          T* dst = img + (c * g.height + y) * g.width;
          const T* row = src + oh * g.out_w;
          for (std::int64_t ow = 0; ow < g.out_w; ++ow) {
            const std::int64_t x = ow * g.stride + j - g.padding;
            if (x >= 0 && x < g.width) dst[x] += row[ow];
          }
        }
      }
    }
  }
}

template <typename T>
void require_rank4(const Tensor<T>& t, const char* what) {
  if (t.rank() != 4) {
    throw ShapeError(std::string(what) + " must be rank 4, got " + shape_str(t.shape()));
  }
}

void check_geometry(const ConvGeometry& g) {
  if (g.stride < 1) throw GeometryError("stride must be >= 1");
  if (g.padding < 0) throw GeometryError("padding must be >= 0");
  if (g.output_padding < 0) throw GeometryError("output_padding must be >= 0");
}

}  // namespace

std::int64_t conv_output_size(std::int64_t size, std::int64_t kernel, std::int64_t stride,
                              std::int64_t padding) {
  if (stride < 1) throw GeometryError("stride must be >= 1");
  const std::int64_t span = size + 2 * padding - kernel;
  if (span < 0 || kernel < 1) {
    throw GeometryError("kernel " + std::to_string(kernel) + " does not fit input " +
                        std::to_string(size) + " with padding " + std::to_string(padding));
  }
  return span / stride + 1;
}

std::int64_t conv_transpose_output_size(std::int64_t size, std::int64_t kernel,
                                        std::int64_t stride, std::int64_t padding,
                                        std::int64_t output_padding) {
  if (stride < 1) throw GeometryError("stride must be >= 1");
  if (output_padding >= stride) {
    throw GeometryError("output_padding must be smaller than stride");
  }
  const std::int64_t out = (size - 1) * stride - 2 * padding + kernel + output_padding;
  if (out <= 0 || size < 1) {
    throw GeometryError("transposed convolution produces empty output (" + std::to_string(out) +
                        ")");
  }
  return out;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias,
                 ConvGeometry geometry) {
  require_rank4(input, "conv2d input");
  require_rank4(kernel, "conv2d kernel");
  check_geometry(geometry);
  const auto batch = input.dim(0), channels = input.dim(1), height = input.dim(2),
             width = input.dim(3);
  const auto filters = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  if (kernel.dim(1) != channels) {
    throw ShapeError("conv2d: kernel expects " + std::to_string(kernel.dim(1)) +
                     " channels, input has " + std::to_string(channels));
  }
  const bool has_bias = bias.defined();
  if (has_bias && (bias.rank() != 1 || bias.dim(0) != filters)) {
    throw ShapeError("conv2d: bias shape " + shape_str(bias.shape()));
  }
  const auto out_h = conv_output_size(height, kh, geometry.stride, geometry.padding);
  const auto out_w = conv_output_size(width, kw, geometry.stride, geometry.padding);
  const Window win{channels, height, width, kh, kw, geometry.stride, geometry.padding, out_h, out_w};

  Tensor<T> out(Shape{batch, filters, out_h, out_w});
  const std::int64_t in_stride = channels * height * width;
  const std::int64_t out_stride = filters * out_h * out_w;
  const bool pointwise = kh == 1 && kw == 1 && geometry.stride == 1 && geometry.padding == 0;
  std::vector<T> cols(pointwise ? 0 : static_cast<std::size_t>(win.rows() * win.cols()));
  CMapMat<T> wmat(kernel.ptr(), filters, win.rows());
  for (std::int64_t b = 0; b < batch; ++b) {
    const T* src = input.ptr() + b * in_stride;
    if (!pointwise) im2col(src, win, cols.data());
    MapMat<T> y(out.mutable_data().data() + b * out_stride, filters, win.cols());
    y.noalias() = wmat * CMapMat<T>(pointwise ? src : cols.data(), win.rows(), win.cols());
    if (has_bias) {
      for (std::int64_t f = 0; f < filters; ++f) y.row(f).array() += bias.data()[f];
    }
  }
  autograd::check_finite(out, "conv2d");

  const bool gx = autograd::wants_grad(input), gk = autograd::wants_grad(kernel);
  const bool gb = has_bias && autograd::wants_grad(bias);
  if (gx || gk || gb) {
    autograd::attach(out, [=]() {
      const auto& g = out.impl()->grad;
      if (g.empty()) return;
      std::vector<T> scratch(static_cast<std::size_t>(win.rows() * win.cols()));
      T* dk = gk ? autograd::grad_buffer(kernel) : nullptr;
      T* dx = gx ? autograd::grad_buffer(input) : nullptr;
      CMapMat<T> w(kernel.ptr(), filters, win.rows());
      for (std::int64_t b = 0; b < batch; ++b) {
        CMapMat<T> gy(g.data() + b * out_stride, filters, win.cols());
        const T* src = input.ptr() + b * in_stride;
        if (dk) {
          const T* c = src;
          if (!pointwise) {
            im2col(src, win, scratch.data());
            c = scratch.data();
          }
          MapMat<T>(dk, filters, win.rows()).noalias() +=
              gy * CMapMat<T>(c, win.rows(), win.cols()).transpose();
        }
        if (dx) {
          if (pointwise) {
            MapMat<T>(dx + b * in_stride, win.rows(), win.cols()).noalias() += w.transpose() * gy;
          } else {
            MapMat<T>(scratch.data(), win.rows(), win.cols()).noalias() = w.transpose() * gy;
            col2im(scratch.data(), win, dx + b * in_stride);
          }
        }
      }
      if (gb) {
        T* db = autograd::grad_buffer(bias);
        for (std::int64_t b = 0; b < batch; ++b)
          for (std::int64_t f = 0; f < filters; ++f) {
            const T* row = g.data() + b * out_stride + f * win.cols();
            T s = 0;
            for (std::int64_t p = 0; p < win.cols(); ++p) s += row[p];
            db[f] += s;
          }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias,
                           ConvGeometry geometry) {
  require_rank4(input, "conv_transpose2d input");
  require_rank4(kernel, "conv_transpose2d kernel");
  check_geometry(geometry);
  const auto batch = input.dim(0), in_ch = input.dim(1), height = input.dim(2),
             width = input.dim(3);
  const auto out_ch = kernel.dim(1), kh = kernel.dim(2), kw = kernel.dim(3);
  if (kernel.dim(0) != in_ch) {
    throw ShapeError("conv_transpose2d: kernel expects " + std::to_string(kernel.dim(0)) +
                     " input channels, input has " + std::to_string(in_ch));
  }
  const bool has_bias = bias.defined();
  if (has_bias && (bias.rank() != 1 || bias.dim(0) != out_ch)) {
    throw ShapeError("conv_transpose2d: bias shape " + shape_str(bias.shape()));
  }
  const auto out_h = conv_transpose_output_size(height, kh, geometry.stride, geometry.padding,
                                                geometry.output_padding);
  const auto out_w = conv_transpose_output_size(width, kw, geometry.stride, geometry.padding,
                                                geometry.output_padding);
  // The sliding window runs over the (larger) output image.
  const Window win{out_ch, out_h, out_w, kh, kw, geometry.stride, geometry.padding, height, width};

  Tensor<T> out(Shape{batch, out_ch, out_h, out_w});
  const std::int64_t in_stride = in_ch * height * width;
  const std::int64_t out_stride = out_ch * out_h * out_w;
  std::vector<T> cols(static_cast<std::size_t>(win.rows() * win.cols()));
  CMapMat<T> wmat(kernel.ptr(), in_ch, win.rows());
  for (std::int64_t b = 0; b < batch; ++b) {
    MapMat<T>(cols.data(), win.rows(), win.cols()).noalias() =
        wmat.transpose() * CMapMat<T>(input.ptr() + b * in_stride, in_ch, win.cols());
    T* dst = out.mutable_data().data() + b * out_stride;
    col2im(cols.data(), win, dst);
    if (has_bias) {
      for (std::int64_t c = 0; c < out_ch; ++c) {
        T* plane = dst + c * out_h * out_w;
        for (std::int64_t p = 0; p < out_h * out_w; ++p) plane[p] += bias.data()[c];
      }
    }
  }
  autograd::check_finite(out, "conv_transpose2d");

  const bool gx = autograd::wants_grad(input), gk = autograd::wants_grad(kernel);
  const bool gb = has_bias && autograd::wants_grad(bias);
  if (gx || gk || gb) {
    autograd::attach(out, [=]() {
      const auto& g = out.impl()->grad;
      if (g.empty()) return;
      std::vector<T> scratch(static_cast<std::size_t>(win.rows() * win.cols()));
      T* dk = gk ? autograd::grad_buffer(kernel) : nullptr;
      T* dx = gx ? autograd::grad_buffer(input) : nullptr;
      CMapMat<T> w(kernel.ptr(), in_ch, win.rows());
      for (std::int64_t b = 0; b < batch; ++b) {
        if (!dk && !dx) break;
        im2col(g.data() + b * out_stride, win, scratch.data());
        CMapMat<T> c(scratch.data(), win.rows(), win.cols());
        if (dx) MapMat<T>(dx + b * in_stride, in_ch, win.cols()).noalias() += w * c;
        if (dk) {
          MapMat<T>(dk, in_ch, win.rows()).noalias() +=
              CMapMat<T>(input.ptr() + b * in_stride, in_ch, win.cols()) * c.transpose();
        }
      }
      if (gb) {
        T* db = autograd::grad_buffer(bias);
        for (std::int64_t b = 0; b < batch; ++b)
          for (std::int64_t c = 0; c < out_ch; ++c) {
            const T* plane = g.data() + b * out_stride + c * out_h * out_w;
            T s = 0;
            for (std::int64_t p = 0; p < out_h * out_w; ++p) s += plane[p];
            db[c] += s;
          }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> max_pool2d(const Tensor<T>& input, std::int64_t kernel, std::int64_t stride) {
  require_rank4(input, "max_pool2d input");
  const auto batch = input.dim(0), channels = input.dim(1), height = input.dim(2),
             width = input.dim(3);
  const auto out_h = conv_output_size(height, kernel, stride, 0);
  const auto out_w = conv_output_size(width, kernel, stride, 0);
  Tensor<T> out(Shape{batch, channels, out_h, out_w});
  std::vector<std::int64_t> argmax(out.numel());
  auto o = out.mutable_data();
  std::size_t k = 0;
  for (std::int64_t plane = 0; plane < batch * channels; ++plane) {
    const T* src = input.ptr() + plane * height * width;
    for (std::int64_t oh = 0; oh < out_h; ++oh) {
      for (std::int64_t ow = 0; ow < out_w; ++ow, ++k) {
        std::int64_t best = (oh * stride) * width + ow * stride;
        for (std::int64_t i = 0; i < kernel; ++i)
          for (std::int64_t j = 0; j < kernel; ++j) {
            std::int64_t idx = (oh * stride + i) * width + ow * stride + j;
            if (src[idx] > src[best]) best = idx;
          }
        o[k] = src[best];
        argmax[k] = plane * height * width + best;
      }
    }
  }
  if (autograd::wants_grad(input)) {
    autograd::attach(out, [input, out, argmax = std::move(argmax)]() {
      const auto& g = out.impl()->grad;
      if (g.empty()) return;
      T* d = autograd::grad_buffer(input);
      for (std::size_t i = 0; i < g.size(); ++i) d[argmax[i]] += g[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> global_avg_pool2d(const Tensor<T>& input) {
  require_rank4(input, "global_avg_pool2d input");
  const auto batch = input.dim(0), channels = input.dim(1);
  const auto area = input.dim(2) * input.dim(3);
  if (area == 0) throw GeometryError("global_avg_pool2d over empty plane");
  Tensor<T> out(Shape{batch, channels});
  auto o = out.mutable_data();
  for (std::int64_t p = 0; p < batch * channels; ++p) {
    const T* src = input.ptr() + p * area;
    T s = 0;
    for (std::int64_t i = 0; i < area; ++i) s += src[i];
    o[p] = s / static_cast<T>(area);
  }
  if (autograd::wants_grad(input)) {
    autograd::attach(out, [input, out, area]() {
      const auto& g = out.impl()->grad;
      if (g.empty()) return;
      T* d = autograd::grad_buffer(input);
      const T inv = T(1) / static_cast<T>(area);
      for (std::size_t p = 0; p < g.size(); ++p)
        for (std::int64_t i = 0; i < area; ++i) d[p * area + i] += g[p] * inv;
    });
  }
  return out;
}

template <typename T>
Tensor<T> batch_norm2d(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                       Tensor<T>& running_mean, Tensor<T>& running_var, bool training, T momentum,
                       T eps) {
  require_rank4(input, "batch_norm2d input");
  const auto batch = input.dim(0), channels = input.dim(1);
  const auto area = input.dim(2) * input.dim(3);
  for (const Tensor<T>* t : std::initializer_list<const Tensor<T>*>{&gamma, &beta, &running_mean, &running_var}) {
    if (t->rank() != 1 || t->dim(0) != channels) {
      throw ShapeError("batch_norm2d: per-channel tensor has shape " + shape_str(t->shape()));
    }
  }
  const std::int64_t count = batch * area;
  if (training && count < 2) throw ShapeError("batch_norm2d: need more than one value per channel");

  std::vector<T> mu(channels), inv_std(channels);
  if (training) {
    auto rm = running_mean.mutable_data();
    auto rv = running_var.mutable_data();
    for (std::int64_t c = 0; c < channels; ++c) {
      T s = 0;
      for (std::int64_t b = 0; b < batch; ++b) {
        const T* src = input.ptr() + (b * channels + c) * area;
        for (std::int64_t i = 0; i < area; ++i) s += src[i];
      }
      const T m = s / static_cast<T>(count);
      T ss = 0;
      for (std::int64_t b = 0; b < batch; ++b) {
        const T* src = input.ptr() + (b * channels + c) * area;
        for (std::int64_t i = 0; i < area; ++i) ss += (src[i] - m) * (src[i] - m);
      }
      const T var = ss / static_cast<T>(count);
      mu[c] = m;
      inv_std[c] = T(1) / std::sqrt(var + eps);
      rm[c] = (T(1) - momentum) * rm[c] + momentum * m;
      rv[c] = (T(1) - momentum) * rv[c] + momentum * ss / static_cast<T>(count - 1);
    }
  } else {
    for (std::int64_t c = 0; c < channels; ++c) {
      mu[c] = running_mean.data()[c];
      inv_std[c] = T(1) / std::sqrt(running_var.data()[c] + eps);
    }
  }

  Tensor<T> out(input.shape());
  auto o = out.mutable_data();
  for (std::int64_t b = 0; b < batch; ++b)
    for (std::int64_t c = 0; c < channels; ++c) {
      const std::int64_t base = (b * channels + c) * area;
      const T a = gamma.data()[c] * inv_std[c];
      const T shift = beta.data()[c] - a * mu[c];
      for (std::int64_t i = 0; i < area; ++i) o[base + i] = a * input.ptr()[base + i] + shift;
    }
  autograd::check_finite(out, "batch_norm2d");

  const bool gx = autograd::wants_grad(input), gg = autograd::wants_grad(gamma),
             gbeta = autograd::wants_grad(beta);
  if (gx || gg || gbeta) {
    autograd::attach(out, [=]() {
      const auto& g = out.impl()->grad;
      if (g.empty()) return;
      T* dx = gx ? autograd::grad_buffer(input) : nullptr;
      T* dg = gg ? autograd::grad_buffer(gamma) : nullptr;
      T* db = gbeta ? autograd::grad_buffer(beta) : nullptr;
      for (std::int64_t c = 0; c < channels; ++c) {
        T sum_g = 0, sum_gx = 0;
        for (std::int64_t b = 0; b < batch; ++b) {
          const std::int64_t base = (b * channels + c) * area;
          for (std::int64_t i = 0; i < area; ++i) {
            const T xhat = (input.ptr()[base + i] - mu[c]) * inv_std[c];
            sum_g += g[base + i];
            sum_gx += g[base + i] * xhat;
          }
        }
        if (dg) dg[c] += sum_gx;
        if (db) db[c] += sum_g;
        if (!dx) continue;
        const T scale_c = gamma.data()[c] * inv_std[c];
        const T n = static_cast<T>(count);
        for (std::int64_t b = 0; b < batch; ++b) {
          const std::int64_t base = (b * channels + c) * area;
          for (std::int64_t i = 0; i < area; ++i) {
            if (training) {
              const T xhat = (input.ptr()[base + i] - mu[c]) * inv_std[c];
              dx[base + i] += scale_c * (g[base + i] - sum_g / n - xhat * sum_gx / n);
            } else {
              dx[base + i] += scale_c * g[base + i];
            }
          }
        }
      }
    });
  }
  return out;
}

#define MEMDEF_INSTANTIATE_CONV(T)                                                            \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,            \
                            ConvGeometry);                                                    \
  template Tensor<T> conv_transpose2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,  \
                                      ConvGeometry);                                          \
  template Tensor<T> max_pool2d(const Tensor<T>&, std::int64_t, std::int64_t);               \
  template Tensor<T> global_avg_pool2d(const Tensor<T>&);                                    \
  template Tensor<T> batch_norm2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,      \
                                  Tensor<T>&, Tensor<T>&, bool, T, T);

MEMDEF_INSTANTIATE_CONV(float)
MEMDEF_INSTANTIATE_CONV(double)

}  // namespace memdef
