#pragma once

// Brute-force reference implementations used by unit and acceptance tests.
// They share nothing with the library kernels beyond the shape conventions:
// weights [Cout, Cin, kD, kH, kW], Same padding splits the total pad with the
// smaller half in front.

#include <cmath>
#include <random>

#include "ops.hpp"

namespace r2u3d::oracle {

inline int64_t same_pad_before(int64_t in, int64_t k, int64_t stride, int64_t dilation) {
  const int64_t out = (in + stride - 1) / stride;
  const int64_t total = (out - 1) * stride + dilation * (k - 1) + 1 - in;
  return total > 0 ? total / 2 : 0;
}

inline int64_t conv_out(int64_t in, int64_t k, int64_t stride, int64_t dilation, Padding p) {
  if (p == Padding::Same) return (in + stride - 1) / stride;
  return (in - dilation * (k - 1) - 1) / stride + 1;
}

/// y[n, co, o] = b[co] + sum over ci, taps of x[n, ci, o*stride - pad + tap*dilation] * w[co, ci, tap].
template <typename T>
Tensor<T> conv3d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* b, const ConvSpec& s) {
  const Shape5& xs = x.shape();
  const Shape5& ws = w.shape();
  const int64_t cout = ws.n(), cin = ws.c();
  int64_t out[3], pad[3];
  for (int a = 0; a < 3; ++a) {
    out[a] = conv_out(xs.dims[2 + a], s.kernel[a], s.stride[a], s.dilation[a], s.padding);
    pad[a] = s.padding == Padding::Same ? same_pad_before(xs.dims[2 + a], s.kernel[a], s.stride[a], s.dilation[a]) : 0;
  }
  Tensor<T> y(Shape5(xs.n(), cout, out[0], out[1], out[2]));
  for (int64_t n = 0; n < xs.n(); ++n)
    for (int64_t co = 0; co < cout; ++co)
      for (int64_t od = 0; od < out[0]; ++od)
        for (int64_t oh = 0; oh < out[1]; ++oh)
          for (int64_t ow = 0; ow < out[2]; ++ow) {
            double acc = b ? static_cast<double>((*b)[co]) : 0.0;
            for (int64_t ci = 0; ci < cin; ++ci)
              for (int64_t kd = 0; kd < ws.d(); ++kd)
                for (int64_t kh = 0; kh < ws.h(); ++kh)
                  for (int64_t kw = 0; kw < ws.w(); ++kw) {
                    const int64_t id = od * s.stride[0] - pad[0] + kd * s.dilation[0];
                    const int64_t ih = oh * s.stride[1] - pad[1] + kh * s.dilation[1];
                    const int64_t iw = ow * s.stride[2] - pad[2] + kw * s.dilation[2];
                    if (id < 0 || ih < 0 || iw < 0 || id >= xs.d() || ih >= xs.h() || iw >= xs.w()) continue;
                    acc += static_cast<double>(x.at(n, ci, id, ih, iw)) * static_cast<double>(w.at(co, ci, kd, kh, kw));
                  }
            y.at(n, co, od, oh, ow) = static_cast<T>(acc);
          }
  return y;
}

/// Scatter form of the transposed convolution. w: [Cin_t, Cout_t, k...] as
/// the weight of the conv3d mapping Cout_t channels to Cin_t; out_extent is
/// that conv3d's input extent.
template <typename T>
Tensor<T> conv_transpose3d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* b, const ConvSpec& s,
                           const Triple& out_extent) {
  const Shape5& xs = x.shape();
  const Shape5& ws = w.shape();
  const int64_t cin = ws.n(), cout = ws.c();
  int64_t pad[3];
  for (int a = 0; a < 3; ++a)
    pad[a] = s.padding == Padding::Same ? same_pad_before(out_extent[a], s.kernel[a], s.stride[a], s.dilation[a]) : 0;
  std::vector<double> acc(static_cast<size_t>(xs.n() * cout * out_extent[0] * out_extent[1] * out_extent[2]), 0.0);
  Tensor<T> y(Shape5(xs.n(), cout, out_extent));
  for (int64_t n = 0; n < xs.n(); ++n)
    for (int64_t ci = 0; ci < cin; ++ci)
      for (int64_t d = 0; d < xs.d(); ++d)
        for (int64_t h = 0; h < xs.h(); ++h)
          for (int64_t wi = 0; wi < xs.w(); ++wi)
            for (int64_t co = 0; co < cout; ++co)
              for (int64_t kd = 0; kd < ws.d(); ++kd)
                for (int64_t kh = 0; kh < ws.h(); ++kh)
                  for (int64_t kw = 0; kw < ws.w(); ++kw) {
                    const int64_t od = d * s.stride[0] - pad[0] + kd * s.dilation[0];
                    const int64_t oh = h * s.stride[1] - pad[1] + kh * s.dilation[1];
                    const int64_t ow = wi * s.stride[2] - pad[2] + kw * s.dilation[2];
                    if (od < 0 || oh < 0 || ow < 0 || od >= out_extent[0] || oh >= out_extent[1] ||
                        ow >= out_extent[2])
                      continue;
                    acc[static_cast<size_t>(y.offset(n, co, od, oh, ow))] +=
                        static_cast<double>(x.at(n, ci, d, h, wi)) * static_cast<double>(w.at(ci, co, kd, kh, kw));
                  }
  for (int64_t i = 0; i < y.numel(); ++i) {
    const int64_t co = (i / (out_extent[0] * out_extent[1] * out_extent[2])) % cout;
    y[i] = static_cast<T>(acc[static_cast<size_t>(i)] + (b ? static_cast<double>((*b)[co]) : 0.0));
  }
  return y;
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  if (!(a.shape() == b.shape())) return INFINITY;
  double worst = 0;
  for (int64_t i = 0; i < a.numel(); ++i)
    worst = std::max(worst, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  return worst;
}

/// One random convolution case: geometry drawn from stride, dilation in
/// {1, 2}, Same or Valid, kernels 1..3, small channel counts and extents.
struct ConvCase {
  ConvSpec spec;
  Shape5 input;
};

inline ConvCase random_conv_case(std::mt19937_64& rng, int index) {
  std::uniform_int_distribution<int64_t> kern(1, 3), ch(1, 3), ext(5, 8);
  ConvCase c;
  c.spec.padding = index % 2 == 0 ? Padding::Same : Padding::Valid;
  const int64_t stride = 1 + (index / 2) % 2;
  const int64_t dilation = 1 + (index / 4) % 2;
  for (int a = 0; a < 3; ++a) {
    c.spec.kernel[a] = kern(rng);
    c.spec.stride[a] = stride;
    c.spec.dilation[a] = dilation;
  }
  c.spec.in_channels = ch(rng);
  c.spec.out_channels = ch(rng);
  c.spec.has_bias = index % 3 != 0;
  c.input = Shape5(1 + index % 2, c.spec.in_channels, ext(rng), ext(rng), ext(rng));
  return c;
}

}  // namespace r2u3d::oracle
