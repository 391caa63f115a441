#include <algorithm>
#include <cstring>
#include <vector>

#include "execution.hpp"
#include "ops.hpp"

namespace r2u3d {

void ConvSpec::validate() const {
  for (int a = 0; a < 3; ++a) {
    require(kernel[a] >= 1 && stride[a] >= 1 && dilation[a] >= 1, ErrorCode::InvalidArgument,
            "conv spec extents must be >= 1 (kernel " + to_string(kernel) + ", stride " + to_string(stride) +
                ", dilation " + to_string(dilation) + ")");
  }
  require(in_channels >= 1 && out_channels >= 1, ErrorCode::InvalidArgument, "conv spec channel counts must be >= 1");
}

Triple conv_output_extent(const Triple& in, const ConvSpec& spec) {
  Triple out{};
  for (int a = 0; a < 3; ++a) {
    if (spec.padding == Padding::Same) {
      out[a] = (in[a] + spec.stride[a] - 1) / spec.stride[a];
    } else {
      const int64_t span = spec.dilation[a] * (spec.kernel[a] - 1) + 1;
      require(in[a] >= span, ErrorCode::ShapeMismatch,
              "valid convolution: input extent " + to_string(in) + " smaller than dilated kernel");
      out[a] = (in[a] - span) / spec.stride[a] + 1;
    }
  }
  return out;
}

Triple conv_transpose_output_extent(const Triple& in, const ConvSpec& spec) {
  Triple out{};
  for (int a = 0; a < 3; ++a) {
    if (spec.padding == Padding::Same)
      out[a] = in[a] * spec.stride[a];
    else
      out[a] = (in[a] - 1) * spec.stride[a] + spec.dilation[a] * (spec.kernel[a] - 1) + 1;
  }
  return out;
}

Triple conv_pad_before(const Triple& in, const ConvSpec& spec) {
  Triple pad{0, 0, 0};
  if (spec.padding == Padding::Valid) return pad;
  const Triple out = conv_output_extent(in, spec);
  for (int a = 0; a < 3; ++a) {
    const int64_t needed = (out[a] - 1) * spec.stride[a] + spec.dilation[a] * (spec.kernel[a] - 1) + 1;
    pad[a] = std::max<int64_t>(0, needed - in[a]) / 2;
  }
  return pad;
}

namespace conv_kernels {
namespace {

struct Geometry {
  int64_t batch = 0, cin = 0, cout = 0;
  Triple in{}, out{}, k{}, s{}, dil{}, pad{};
  int64_t in_vox() const { return in[0] * in[1] * in[2]; }
  int64_t out_vox() const { return out[0] * out[1] * out[2]; }
  int64_t kvol() const { return k[0] * k[1] * k[2]; }
  int64_t rows() const { return cin * kvol(); }
};

Geometry make_geometry(const Shape5& x_shape, const ConvSpec& spec) {
  Geometry g;
  g.batch = x_shape.n();
  g.cin = spec.in_channels;
  g.cout = spec.out_channels;
  g.in = x_shape.spatial();
  g.out = conv_output_extent(g.in, spec);
  g.k = spec.kernel;
  g.s = spec.stride;
  g.dil = spec.dilation;
  g.pad = conv_pad_before(g.in, spec);
  return g;
}

// ---- direct loops -------------------------------------------------------

template <typename T, typename Visit>
void for_each_tap(const Geometry& g, Visit&& visit) {
  for (int64_t n = 0; n < g.batch; ++n)
    for (int64_t co = 0; co < g.cout; ++co)
      for (int64_t od = 0; od < g.out[0]; ++od)
        for (int64_t oh = 0; oh < g.out[1]; ++oh)
          for (int64_t ow = 0; ow < g.out[2]; ++ow) {
            const int64_t yi = (((n * g.cout + co) * g.out[0] + od) * g.out[1] + oh) * g.out[2] + ow;
            for (int64_t ci = 0; ci < g.cin; ++ci)
              for (int64_t kd = 0; kd < g.k[0]; ++kd) {
                const int64_t id = od * g.s[0] - g.pad[0] + kd * g.dil[0];
                if (id < 0 || id >= g.in[0]) continue;
                for (int64_t kh = 0; kh < g.k[1]; ++kh) {
                  const int64_t ih = oh * g.s[1] - g.pad[1] + kh * g.dil[1];
                  if (ih < 0 || ih >= g.in[1]) continue;
                  for (int64_t kw = 0; kw < g.k[2]; ++kw) {
                    const int64_t iw = ow * g.s[2] - g.pad[2] + kw * g.dil[2];
                    if (iw < 0 || iw >= g.in[2]) continue;
                    const int64_t xi = (((n * g.cin + ci) * g.in[0] + id) * g.in[1] + ih) * g.in[2] + iw;
                    const int64_t wi = (((co * g.cin + ci) * g.k[0] + kd) * g.k[1] + kh) * g.k[2] + kw;
                    visit(yi, xi, wi);
                  }
                }
              }
          }
}

template <typename T>
void forward_direct(const Geometry& g, const T* x, const T* w, T* y) {
  std::fill(y, y + g.batch * g.cout * g.out_vox(), T(0));
  for_each_tap<T>(g, [&](int64_t yi, int64_t xi, int64_t wi) { y[yi] += x[xi] * w[wi]; });
}

template <typename T>
void backward_input_direct(const Geometry& g, const T* dy, const T* w, T* dx) {
  for_each_tap<T>(g, [&](int64_t yi, int64_t xi, int64_t wi) { dx[xi] += dy[yi] * w[wi]; });
}

template <typename T>
void backward_weight_direct(const Geometry& g, const T* x, const T* dy, T* dw) {
  for_each_tap<T>(g, [&](int64_t yi, int64_t xi, int64_t wi) { dw[wi] += dy[yi] * x[xi]; });
}

// ---- im2col + blocked products -----------------------------------------

// Valid output range [lo, hi) along one axis for kernel tap `k`.
inline void tap_range(int64_t k, int64_t stride, int64_t dil, int64_t pad, int64_t in, int64_t out, int64_t& lo,
                      int64_t& hi) {
  // need 0 <= o*stride - pad + k*dil < in
  const int64_t off = k * dil - pad;
  lo = off >= 0 ? 0 : (-off + stride - 1) / stride;
  const int64_t lim = in - off;  // o*stride < lim
  hi = lim <= 0 ? 0 : std::min(out, (lim + stride - 1) / stride);
  if (hi < lo) hi = lo;
}

// col[r, p] for one batch item; r = (ci, kd, kh, kw), p = output voxel.
template <typename T>
void im2col(const Geometry& g, const T* x, T* col) {
  const int64_t P = g.out_vox();
  int64_t r = 0;
  for (int64_t ci = 0; ci < g.cin; ++ci) {
    const T* xc = x + ci * g.in_vox();
    for (int64_t kd = 0; kd < g.k[0]; ++kd)
      for (int64_t kh = 0; kh < g.k[1]; ++kh)
        for (int64_t kw = 0; kw < g.k[2]; ++kw, ++r) {
          T* row = col + r * P;
          std::fill(row, row + P, T(0));
          int64_t d0, d1, h0, h1, w0, w1;
          tap_range(kd, g.s[0], g.dil[0], g.pad[0], g.in[0], g.out[0], d0, d1);
          tap_range(kh, g.s[1], g.dil[1], g.pad[1], g.in[1], g.out[1], h0, h1);
          tap_range(kw, g.s[2], g.dil[2], g.pad[2], g.in[2], g.out[2], w0, w1);
          for (int64_t od = d0; od < d1; ++od) {
            const int64_t id = od * g.s[0] - g.pad[0] + kd * g.dil[0];
            for (int64_t oh = h0; oh < h1; ++oh) {
              const int64_t ih = oh * g.s[1] - g.pad[1] + kh * g.dil[1];
              const int64_t base = (id * g.in[1] + ih) * g.in[2] - g.pad[2] + kw * g.dil[2];
              T* dst = row + (od * g.out[1] + oh) * g.out[2];
              if (g.s[2] == 1 && w1 > w0) {
                std::memcpy(dst + w0, xc + (base + w0), static_cast<size_t>(w1 - w0) * sizeof(T));
              } else {
                for (int64_t ow = w0; ow < w1; ++ow) dst[ow] = xc[base + ow * g.s[2]];
              }
            }
          }
        }
  }
}

template <typename T>
void col2im_add(const Geometry& g, const T* col, T* dx) {
  const int64_t P = g.out_vox();
  int64_t r = 0;
  for (int64_t ci = 0; ci < g.cin; ++ci) {
    T* xc = dx + ci * g.in_vox();
    for (int64_t kd = 0; kd < g.k[0]; ++kd)
      for (int64_t kh = 0; kh < g.k[1]; ++kh)
        for (int64_t kw = 0; kw < g.k[2]; ++kw, ++r) {
          const T* row = col + r * P;
          int64_t d0, d1, h0, h1, w0, w1;
          tap_range(kd, g.s[0], g.dil[0], g.pad[0], g.in[0], g.out[0], d0, d1);
          tap_range(kh, g.s[1], g.dil[1], g.pad[1], g.in[1], g.out[1], h0, h1);
          tap_range(kw, g.s[2], g.dil[2], g.pad[2], g.in[2], g.out[2], w0, w1);
          for (int64_t od = d0; od < d1; ++od) {
            const int64_t id = od * g.s[0] - g.pad[0] + kd * g.dil[0];
            for (int64_t oh = h0; oh < h1; ++oh) {
              const int64_t ih = oh * g.s[1] - g.pad[1] + kh * g.dil[1];
              const int64_t base = (id * g.in[1] + ih) * g.in[2] - g.pad[2] + kw * g.dil[2];
              const T* src = row + (od * g.out[1] + oh) * g.out[2];
              for (int64_t ow = w0; ow < w1; ++ow) xc[base + ow * g.s[2]] += src[ow];
            }
          }
        }
  }
}

constexpr int64_t kBlockP = 256;
constexpr int64_t kBlockM = 4;

// C[m, p] += sum_k A(m, k) * B[k, p], with A(m, k) = a[m*am + k*ak].
template <typename T>
void gemm_accumulate(int64_t M, int64_t K, int64_t P, const T* a, int64_t am, int64_t ak, const T* b, T* c) {
  const int64_t mblocks = (M + kBlockM - 1) / kBlockM;
#pragma omp parallel for schedule(static) num_threads(worker_count()) if (worker_count() > 1)
  for (int64_t mb = 0; mb < mblocks; ++mb) {
    const int64_t m0 = mb * kBlockM;
    const int64_t mcount = std::min(kBlockM, M - m0);
    alignas(64) T acc[kBlockM][kBlockP];
    for (int64_t p0 = 0; p0 < P; p0 += kBlockP) {
      const int64_t pn = std::min(kBlockP, P - p0);
      for (int64_t i = 0; i < kBlockM; ++i) std::fill(acc[i], acc[i] + kBlockP, T(0));
      if (mcount == kBlockM) {
        for (int64_t k = 0; k < K; ++k) {
          const T* brow = b + k * P + p0;
          const T a0 = a[(m0 + 0) * am + k * ak];
          const T a1 = a[(m0 + 1) * am + k * ak];
          const T a2 = a[(m0 + 2) * am + k * ak];
          const T a3 = a[(m0 + 3) * am + k * ak];
          for (int64_t j = 0; j < pn; ++j) {
            const T bv = brow[j];
            acc[0][j] += a0 * bv;
            acc[1][j] += a1 * bv;
            acc[2][j] += a2 * bv;
            acc[3][j] += a3 * bv;
          }
        }
      } else {
        for (int64_t k = 0; k < K; ++k) {
          const T* brow = b + k * P + p0;
          for (int64_t i = 0; i < mcount; ++i) {
            const T av = a[(m0 + i) * am + k * ak];
            for (int64_t j = 0; j < pn; ++j) acc[i][j] += av * brow[j];
          }
        }
      }
      for (int64_t i = 0; i < mcount; ++i) {
        T* crow = c + (m0 + i) * P + p0;
        for (int64_t j = 0; j < pn; ++j) crow[j] += acc[i][j];
      }
    }
  }
}

// C[m, n] += sum_p A[m, p] * B[n, p]
template <typename T>
void gemm_nt_accumulate(int64_t M, int64_t N, int64_t P, const T* a, const T* b, T* c) {
#pragma omp parallel for schedule(static) num_threads(worker_count()) if (worker_count() > 1)
  for (int64_t m = 0; m < M; ++m) {
    const T* arow = a + m * P;
    for (int64_t n = 0; n < N; ++n) {
      const T* brow = b + n * P;
      T s[8] = {};
      int64_t p = 0;
      for (; p + 8 <= P; p += 8)
        for (int j = 0; j < 8; ++j) s[j] += arow[p + j] * brow[p + j];
      T tail = 0;
      for (; p < P; ++p) tail += arow[p] * brow[p];
      c[m * N + n] += ((s[0] + s[1]) + (s[2] + s[3])) + ((s[4] + s[5]) + (s[6] + s[7])) + tail;
    }
  }
}

template <typename T>
void forward_im2col(const Geometry& g, const T* x, const T* w, T* y) {
  const int64_t P = g.out_vox(), K = g.rows();
  std::vector<T> col(static_cast<size_t>(K * P));
  for (int64_t n = 0; n < g.batch; ++n) {
    im2col(g, x + n * g.cin * g.in_vox(), col.data());
    T* yn = y + n * g.cout * P;
    std::fill(yn, yn + g.cout * P, T(0));
    gemm_accumulate(g.cout, K, P, w, K, int64_t{1}, col.data(), yn);
  }
}

template <typename T>
void backward_input_im2col(const Geometry& g, const T* dy, const T* w, T* dx) {
  const int64_t P = g.out_vox(), K = g.rows();
  std::vector<T> dcol(static_cast<size_t>(K * P));
  for (int64_t n = 0; n < g.batch; ++n) {
    std::fill(dcol.begin(), dcol.end(), T(0));
    gemm_accumulate(K, g.cout, P, w, int64_t{1}, K, dy + n * g.cout * P, dcol.data());
    col2im_add(g, dcol.data(), dx + n * g.cin * g.in_vox());
  }
}

template <typename T>
void backward_weight_im2col(const Geometry& g, const T* x, const T* dy, T* dw) {
  const int64_t P = g.out_vox(), K = g.rows();
  std::vector<T> col(static_cast<size_t>(K * P));
  for (int64_t n = 0; n < g.batch; ++n) {
    im2col(g, x + n * g.cin * g.in_vox(), col.data());
    gemm_nt_accumulate(g.cout, K, P, dy + n * g.cout * P, col.data(), dw);
  }
}

void check_weight(const Shape5& ws, const ConvSpec& spec) {
  const Shape5 expect(spec.out_channels, spec.in_channels, spec.kernel);
  require(ws == expect, ErrorCode::ShapeMismatch,
          "conv weight shape " + ws.str() + " does not match spec " + expect.str());
}

}  // namespace

template <typename T>
void forward(const Tensor<T>& x, const Tensor<T>& w, const ConvSpec& spec, Tensor<T>& y) {
  spec.validate();
  check_weight(w.shape(), spec);
  require(x.shape().c() == spec.in_channels, ErrorCode::ShapeMismatch,
          "conv3d: input has " + std::to_string(x.shape().c()) + " channels, spec expects " +
              std::to_string(spec.in_channels));
  const Geometry g = make_geometry(x.shape(), spec);
  const Shape5 ys(g.batch, g.cout, g.out);
  if (y.shape() != ys) y = Tensor<T>(ys);
  if (execution_settings().conv == ConvAlgorithm::Direct)
    forward_direct(g, x.data().data(), w.data().data(), y.data().data());
  else
    forward_im2col(g, x.data().data(), w.data().data(), y.data().data());
}

template <typename T>
void backward_input(const Tensor<T>& dy, const Tensor<T>& w, const ConvSpec& spec, Tensor<T>& dx) {
  check_weight(w.shape(), spec);
  const Geometry g = make_geometry(dx.shape(), spec);
  require(dy.shape() == Shape5(g.batch, g.cout, g.out), ErrorCode::ShapeMismatch,
          "conv backward: upstream shape " + dy.shape().str() + " inconsistent with input " + dx.shape().str());
  if (execution_settings().conv == ConvAlgorithm::Direct)
    backward_input_direct(g, dy.data().data(), w.data().data(), dx.data().data());
  else
    backward_input_im2col(g, dy.data().data(), w.data().data(), dx.data().data());
}

template <typename T>
void backward_weight(const Tensor<T>& x, const Tensor<T>& dy, const ConvSpec& spec, Tensor<T>& dw) {
  check_weight(dw.shape(), spec);
  const Geometry g = make_geometry(x.shape(), spec);
  require(dy.shape() == Shape5(g.batch, g.cout, g.out), ErrorCode::ShapeMismatch,
          "conv backward: upstream shape " + dy.shape().str() + " inconsistent with input " + x.shape().str());
  if (execution_settings().conv == ConvAlgorithm::Direct)
    backward_weight_direct(g, x.data().data(), dy.data().data(), dw.data().data());
  else
    backward_weight_im2col(g, x.data().data(), dy.data().data(), dw.data().data());
}

template void forward<float>(const Tensor<float>&, const Tensor<float>&, const ConvSpec&, Tensor<float>&);
template void forward<double>(const Tensor<double>&, const Tensor<double>&, const ConvSpec&, Tensor<double>&);
template void backward_input<float>(const Tensor<float>&, const Tensor<float>&, const ConvSpec&, Tensor<float>&);
template void backward_input<double>(const Tensor<double>&, const Tensor<double>&, const ConvSpec&,
                                     Tensor<double>&);
template void backward_weight<float>(const Tensor<float>&, const Tensor<float>&, const ConvSpec&, Tensor<float>&);
template void backward_weight<double>(const Tensor<double>&, const Tensor<double>&, const ConvSpec&,
                                      Tensor<double>&);

}  // namespace conv_kernels
}  // namespace r2u3d
