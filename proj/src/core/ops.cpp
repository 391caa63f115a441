#include "ops.hpp"

#include "accumulate.hpp"
#include "decision_trace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace r2u3d {

std::string to_string(const Triple& t) {
  std::ostringstream os;
  os << "(" << t[0] << "," << t[1] << "," << t[2] << ")";
  return os.str();
}

std::string Shape5::str() const {
  std::ostringstream os;
  os << "[" << dims[0] << "," << dims[1] << "," << dims[2] << "," << dims[3] << "," << dims[4] << "]";
  return os.str();
}

namespace ops {
namespace {

template <typename T>
void record(Tape<T>* tape, const char* op, const TensorPtr<T>& out, std::vector<TensorPtr<T>> inputs,
            typename Tape<T>::BackwardFn fn) {
  if (tape) tape->record(op, out, std::move(inputs), std::move(fn));
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  require(a.shape() == b.shape(), ErrorCode::ShapeMismatch,
          std::string(op) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
}

template <typename T>
void require_bias(const TensorPtr<T>& b, int64_t channels, const char* op) {
  if (!b) return;
  require(b->shape() == Shape5(channels, 1, 1, 1, 1), ErrorCode::ShapeMismatch,
          std::string(op) + ": bias shape " + b->shape().str() + " expected [" + std::to_string(channels) +
              ",1,1,1,1]");
}

template <typename T>
void add_bias(Tensor<T>& y, const Tensor<T>& b) {
  const int64_t vox = y.shape().spatial_size();
  for (int64_t n = 0; n < y.shape().n(); ++n)
    for (int64_t c = 0; c < y.shape().c(); ++c) {
      T* row = &y.at(n, c, 0, 0, 0);
      const T bv = b[c];
      for (int64_t i = 0; i < vox; ++i) row[i] += bv;
    }
}

template <typename T>
void accumulate_bias_grad(const Tensor<T>& y, std::span<const T> dy, std::span<T> db) {
  const int64_t vox = y.shape().spatial_size();
  for (int64_t n = 0; n < y.shape().n(); ++n)
    for (int64_t c = 0; c < y.shape().c(); ++c) {
      const T* row = dy.data() + y.offset(n, c, 0, 0, 0);
      T acc = 0;
      for (int64_t i = 0; i < vox; ++i) acc += row[i];
      db[c] += acc;
    }
}

// Wraps a gradient span as a tensor view-copy so the raw conv kernels can
// operate on it. Kernels accumulate, so results are copied back with +=.
template <typename T>
Tensor<T> grad_as_tensor(Tensor<T>& t) {
  auto g = t.ensure_grad();
  return Tensor<T>(t.shape(), std::vector<T>(g.begin(), g.end()));
}

template <typename T>
void store_grad(Tensor<T>& t, const Tensor<T>& g) {
  auto dst = t.ensure_grad();
  std::copy(g.data().begin(), g.data().end(), dst.begin());
}

ConvSpec underlying_conv(const ConvSpec& transposed) {
  ConvSpec s = transposed;
  std::swap(s.in_channels, s.out_channels);
  return s;
}

}  // namespace

template <typename T>
TensorPtr<T> conv3d(Tape<T>* tape, const TensorPtr<T>& x, const TensorPtr<T>& w, const TensorPtr<T>& b,
                    const ConvSpec& spec) {
  require(x && w, ErrorCode::InvalidArgument, "conv3d: null input");
  require_finite(*x, "conv3d");
  require(static_cast<bool>(b) == spec.has_bias, ErrorCode::ShapeMismatch, "conv3d: bias presence disagrees with spec");
  require_bias(b, spec.out_channels, "conv3d");
  auto y = std::make_shared<Tensor<T>>();
  conv_kernels::forward(*x, *w, spec, *y);
  if (b) add_bias(*y, *b);

  std::vector<TensorPtr<T>> inputs{x, w};
  if (b) inputs.push_back(b);
  record(tape, "conv3d", y, std::move(inputs), [x = x.get(), w = w.get(), b = b.get(), y = y.get(), spec] {
    const Tensor<T> dy(y->shape(), std::vector<T>(y->grad().begin(), y->grad().end()));
    Tensor<T> dx = grad_as_tensor(*x);
    conv_kernels::backward_input(dy, *w, spec, dx);
    store_grad(*x, dx);
    Tensor<T> dw = grad_as_tensor(*w);
    conv_kernels::backward_weight(*x, dy, spec, dw);
    store_grad(*w, dw);
    if (b) accumulate_bias_grad<T>(*y, y->grad(), b->ensure_grad());
  });
  return y;
}

template <typename T>
TensorPtr<T> conv_transpose3d(Tape<T>* tape, const TensorPtr<T>& x, const TensorPtr<T>& w, const TensorPtr<T>& b,
                              const ConvSpec& spec) {
  require(x && w, ErrorCode::InvalidArgument, "conv_transpose3d: null input");
  spec.validate();
  require_finite(*x, "conv_transpose3d");
  require(x->shape().c() == spec.in_channels, ErrorCode::ShapeMismatch,
          "conv_transpose3d: input has " + std::to_string(x->shape().c()) + " channels, spec expects " +
              std::to_string(spec.in_channels));
  require(static_cast<bool>(b) == spec.has_bias, ErrorCode::ShapeMismatch,
          "conv_transpose3d: bias presence disagrees with spec");
  require_bias(b, spec.out_channels, "conv_transpose3d");
  const ConvSpec conv = underlying_conv(spec);
  const Shape5 out_shape(x->shape().n(), spec.out_channels, conv_transpose_output_extent(x->shape().spatial(), spec));
  require(conv_output_extent(out_shape.spatial(), conv) == x->shape().spatial(), ErrorCode::ShapeMismatch,
          "conv_transpose3d: input extents " + to_string(x->shape().spatial()) + " not reachable by spec");
  auto y = make_tensor<T>(out_shape);
  conv_kernels::backward_input(*x, *w, conv, *y);
  if (b) add_bias(*y, *b);

  std::vector<TensorPtr<T>> inputs{x, w};
  if (b) inputs.push_back(b);
  record(tape, "conv_transpose3d", y, std::move(inputs), [x = x.get(), w = w.get(), b = b.get(), y = y.get(), conv] {
    const Tensor<T> dy(y->shape(), std::vector<T>(y->grad().begin(), y->grad().end()));
    Tensor<T> fwd;
    conv_kernels::forward(dy, *w, conv, fwd);
    auto gx = x->ensure_grad();
    for (int64_t i = 0; i < fwd.numel(); ++i) gx[i] += fwd[i];
    Tensor<T> dw = grad_as_tensor(*w);
    conv_kernels::backward_weight(dy, *x, conv, dw);
    store_grad(*w, dw);
    if (b) accumulate_bias_grad<T>(*y, y->grad(), b->ensure_grad());
  });
  return y;
}

template <typename T>
TensorPtr<T> maxpool3d(Tape<T>* tape, const TensorPtr<T>& x, const Triple& window, const Triple& stride) {
  require(x != nullptr, ErrorCode::InvalidArgument, "maxpool3d: null input");
  const Triple in = x->shape().spatial();
  Triple out{};
  for (int a = 0; a < 3; ++a) {
    require(window[a] >= 1 && stride[a] >= 1, ErrorCode::InvalidArgument, "maxpool3d: window and stride must be >= 1");
    require(window[a] <= in[a], ErrorCode::ShapeMismatch,
            "maxpool3d: window " + to_string(window) + " larger than input " + to_string(in));
    if (window[a] == stride[a])
      require(in[a] % stride[a] == 0, ErrorCode::ShapeMismatch,
              "maxpool3d: extents " + to_string(in) + " not divisible by stride " + to_string(stride));
    out[a] = (in[a] - window[a]) / stride[a] + 1;
  }
  const Shape5 ys(x->shape().n(), x->shape().c(), out);
  auto y = make_tensor<T>(ys);
  auto argmax = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(ys.numel()));
  auto& trace = testing::decision_trace();
  if (trace.mode() == testing::DecisionTrace::Mode::Replay) {
    *argmax = trace.replay(argmax->size(), "maxpool3d");
    for (size_t i = 0; i < argmax->size(); ++i) (*y)[static_cast<int64_t>(i)] = (*x)[(*argmax)[i]];
  } else {
    int64_t yi = 0;
    for (int64_t n = 0; n < ys.n(); ++n)
      for (int64_t c = 0; c < ys.c(); ++c)
        for (int64_t od = 0; od < out[0]; ++od)
          for (int64_t oh = 0; oh < out[1]; ++oh)
            for (int64_t ow = 0; ow < out[2]; ++ow, ++yi) {
              int64_t best = x->offset(n, c, od * stride[0], oh * stride[1], ow * stride[2]);
              T best_v = (*x)[best];
              for (int64_t kd = 0; kd < window[0]; ++kd)
                for (int64_t kh = 0; kh < window[1]; ++kh)
                  for (int64_t kw = 0; kw < window[2]; ++kw) {
                    const int64_t xi = x->offset(n, c, od * stride[0] + kd, oh * stride[1] + kh, ow * stride[2] + kw);
                    if ((*x)[xi] > best_v) {
                      best_v = (*x)[xi];
                      best = xi;
                    }
                  }
              (*y)[yi] = best_v;
              (*argmax)[yi] = best;
            }
    if (trace.mode() == testing::DecisionTrace::Mode::Record) trace.record(*argmax);
  }
  record(tape, "maxpool3d", y, {x}, [x = x.get(), y = y.get(), argmax] {
    auto gx = x->ensure_grad();
    auto gy = y->grad();
    for (size_t i = 0; i < argmax->size(); ++i) gx[(*argmax)[i]] += gy[i];
  });
  return y;
}

template <typename T>
TensorPtr<T> global_avg_pool(Tape<T>* tape, const TensorPtr<T>& x) {
  require(x != nullptr, ErrorCode::InvalidArgument, "global_avg_pool: null input");
  const int64_t vox = x->shape().spatial_size();
  require(vox >= 1, ErrorCode::ShapeMismatch, "global_avg_pool: empty spatial volume " + x->shape().str());
  auto y = make_tensor<T>(Shape5(x->shape().n(), x->shape().c(), 1, 1, 1));
  for (int64_t n = 0; n < x->shape().n(); ++n)
    for (int64_t c = 0; c < x->shape().c(); ++c) {
      const T* row = &x->at(n, c, 0, 0, 0);
      CompensatedSum acc;
      for (int64_t i = 0; i < vox; ++i) acc.add(row[i]);
      y->at(n, c, 0, 0, 0) = static_cast<T>(acc.value() / static_cast<double>(vox));
    }
  record(tape, "global_avg_pool", y, {x}, [x = x.get(), y = y.get(), vox] {
    auto gx = x->ensure_grad();
    for (int64_t n = 0; n < x->shape().n(); ++n)
      for (int64_t c = 0; c < x->shape().c(); ++c) {
        const T g = y->grad()[n * x->shape().c() + c] / static_cast<T>(vox);
        T* row = gx.data() + x->offset(n, c, 0, 0, 0);
        for (int64_t i = 0; i < vox; ++i) row[i] += g;
      }
  });
  return y;
}

template <typename T>
TensorPtr<T> dense(Tape<T>* tape, const TensorPtr<T>& x, const TensorPtr<T>& w, const TensorPtr<T>& b) {
  require(x && w, ErrorCode::InvalidArgument, "dense: null input");
  const int64_t batch = x->shape().n(), fin = x->shape().c();
  const int64_t fout = w->shape().n();
  require(x->shape().spatial_size() == 1, ErrorCode::ShapeMismatch, "dense: input must be [N,F,1,1,1], got " + x->shape().str());
  require(w->shape() == Shape5(fout, fin, 1, 1, 1), ErrorCode::ShapeMismatch,
          "dense: weight " + w->shape().str() + " incompatible with input " + x->shape().str());
  require_bias(b, fout, "dense");
  auto y = make_tensor<T>(Shape5(batch, fout, 1, 1, 1));
  for (int64_t n = 0; n < batch; ++n)
    for (int64_t o = 0; o < fout; ++o) {
      T acc = b ? (*b)[o] : T(0);
      for (int64_t i = 0; i < fin; ++i) acc += (*w)[o * fin + i] * (*x)[n * fin + i];
      (*y)[n * fout + o] = acc;
    }
  std::vector<TensorPtr<T>> inputs{x, w};
  if (b) inputs.push_back(b);
  record(tape, "dense", y, std::move(inputs), [x = x.get(), w = w.get(), b = b.get(), y = y.get(), batch, fin, fout] {
    auto gx = x->ensure_grad();
    auto gw = w->ensure_grad();
    auto gy = y->grad();
    for (int64_t n = 0; n < batch; ++n)
      for (int64_t o = 0; o < fout; ++o) {
        const T g = gy[n * fout + o];
        for (int64_t i = 0; i < fin; ++i) {
          gx[n * fin + i] += g * (*w)[o * fin + i];
          gw[o * fin + i] += g * (*x)[n * fin + i];
        }
      }
    if (b) {
      auto gb = b->ensure_grad();
      for (int64_t n = 0; n < batch; ++n)
        for (int64_t o = 0; o < fout; ++o) gb[o] += gy[n * fout + o];
    }
  });
  return y;
}

template <typename T>
TensorPtr<T> add(Tape<T>* tape, const TensorPtr<T>& x, const TensorPtr<T>& y) {
  require_same_shape(*x, *y, "add");
  auto z = make_tensor<T>(x->shape());
  for (int64_t i = 0; i < z->numel(); ++i) (*z)[i] = (*x)[i] + (*y)[i];
  record(tape, "add", z, {x, y}, [x = x.get(), y = y.get(), z = z.get()] {
    auto gz = z->grad();
    auto gx = x->ensure_grad();
    for (size_t i = 0; i < gz.size(); ++i) gx[i] += gz[i];
    auto gy = y->ensure_grad();
    for (size_t i = 0; i < gz.size(); ++i) gy[i] += gz[i];
  });
  return z;
}

template <typename T>
TensorPtr<T> mul(Tape<T>* tape, const TensorPtr<T>& x, const TensorPtr<T>& y) {
  require_same_shape(*x, *y, "mul");
  auto z = make_tensor<T>(x->shape());
  for (int64_t i = 0; i < z->numel(); ++i) (*z)[i] = (*x)[i] * (*y)[i];
  record(tape, "mul", z, {x, y}, [x = x.get(), y = y.get(), z = z.get()] {
    auto gz = z->grad();
    auto gx = x->ensure_grad();
    for (size_t i = 0; i < gz.size(); ++i) gx[i] += gz[i] * (*y)[i];
    auto gy = y->ensure_grad();
    for (size_t i = 0; i < gz.size(); ++i) gy[i] += gz[i] * (*x)[i];
  });
  return z;
}

template <typename T>
TensorPtr<T> relu(Tape<T>* tape, const TensorPtr<T>& x) {
  auto z = make_tensor<T>(x->shape());
  auto active = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(x->numel()));
  auto& trace = testing::decision_trace();
  if (trace.mode() == testing::DecisionTrace::Mode::Replay) {
    *active = trace.replay(active->size(), "relu");
  } else {
    for (size_t i = 0; i < active->size(); ++i) (*active)[i] = (*x)[static_cast<int64_t>(i)] > T(0);
    if (trace.mode() == testing::DecisionTrace::Mode::Record) trace.record(*active);
  }
  for (int64_t i = 0; i < z->numel(); ++i) (*z)[i] = (*active)[static_cast<size_t>(i)] ? (*x)[i] : T(0);
  record(tape, "relu", z, {x}, [x = x.get(), z = z.get(), active] {
    auto gz = z->grad();
    auto gx = x->ensure_grad();
    for (size_t i = 0; i < gz.size(); ++i)
      if ((*active)[i]) gx[i] += gz[i];
  });
  return z;
}

template <typename T>
TensorPtr<T> sigmoid(Tape<T>* tape, const TensorPtr<T>& x) {
  // Rounding would otherwise yield exactly 0 or 1 once |v| passes ~17 (float)
  // or ~37 (double); clamping keeps the result strictly inside (0, 1).
  constexpr T lo = std::numeric_limits<T>::min();
  constexpr T hi = T(1) - std::numeric_limits<T>::epsilon() / 2;
  auto z = make_tensor<T>(x->shape());
  for (int64_t i = 0; i < z->numel(); ++i) {
    const T v = (*x)[i];
    // stable in both tails
    T s;
    if (v >= T(0)) {
      s = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      s = e / (T(1) + e);
    }
    (*z)[i] = std::clamp(s, lo, hi);
  }
  record(tape, "sigmoid", z, {x}, [x = x.get(), z = z.get()] {
    auto gz = z->grad();
    auto gx = x->ensure_grad();
    for (size_t i = 0; i < gz.size(); ++i) {
      const T s = (*z)[i];
      gx[i] += gz[i] * s * (T(1) - s);
    }
  });
  return z;
}

template <typename T>
TensorPtr<T> scale_channels(Tape<T>* tape, const TensorPtr<T>& x, const TensorPtr<T>& s) {
  const Shape5& xs = x->shape();
  require(s->shape() == Shape5(xs.n(), xs.c(), 1, 1, 1), ErrorCode::ShapeMismatch,
          "scale_channels: scale shape " + s->shape().str() + " does not broadcast over " + xs.str());
  const int64_t vox = xs.spatial_size();
  auto z = make_tensor<T>(xs);
  for (int64_t nc = 0; nc < xs.n() * xs.c(); ++nc) {
    const T sv = (*s)[nc];
    for (int64_t i = 0; i < vox; ++i) (*z)[nc * vox + i] = (*x)[nc * vox + i] * sv;
  }
  record(tape, "scale_channels", z, {x, s}, [x = x.get(), s = s.get(), z = z.get(), vox] {
    auto gz = z->grad();
    auto gx = x->ensure_grad();
    auto gs = s->ensure_grad();
    for (int64_t nc = 0; nc < s->numel(); ++nc) {
      const T sv = (*s)[nc];
      T acc = 0;
      for (int64_t i = 0; i < vox; ++i) {
        gx[nc * vox + i] += gz[nc * vox + i] * sv;
        acc += gz[nc * vox + i] * (*x)[nc * vox + i];
      }
      gs[nc] += acc;
    }
  });
  return z;
}

template <typename T>
TensorPtr<T> concat_channels(Tape<T>* tape, std::span<const TensorPtr<T>> xs) {
  require(!xs.empty(), ErrorCode::InvalidArgument, "concat_channels: no inputs");
  const Shape5 first = xs[0]->shape();
  int64_t channels = 0;
  for (const auto& x : xs) {
    require(x->shape().n() == first.n() && x->shape().spatial() == first.spatial(), ErrorCode::ShapeMismatch,
            "concat_channels: non-channel extents differ " + x->shape().str() + " vs " + first.str());
    channels += x->shape().c();
  }
  const Shape5 zs(first.n(), channels, first.spatial());
  auto z = make_tensor<T>(zs);
  const int64_t vox = first.spatial_size();
  for (int64_t n = 0; n < zs.n(); ++n) {
    int64_t c0 = 0;
    for (const auto& x : xs) {
      const int64_t block = x->shape().c() * vox;
      std::copy_n(x->data().begin() + n * block, block, z->data().begin() + z->offset(n, c0, 0, 0, 0));
      c0 += x->shape().c();
    }
  }
  std::vector<TensorPtr<T>> inputs(xs.begin(), xs.end());
  std::vector<Tensor<T>*> raw;
  for (const auto& x : xs) raw.push_back(x.get());
  record(tape, "concat_channels", z, std::move(inputs), [raw, z = z.get(), vox] {
    auto gz = z->grad();
    for (int64_t n = 0; n < z->shape().n(); ++n) {
      int64_t c0 = 0;
      for (auto* x : raw) {
        const int64_t block = x->shape().c() * vox;
        auto gx = x->ensure_grad();
        const T* src = gz.data() + z->offset(n, c0, 0, 0, 0);
        for (int64_t i = 0; i < block; ++i) gx[n * block + i] += src[i];
        c0 += x->shape().c();
      }
    }
  });
  return z;
}

template <typename T>
TensorPtr<T> sum(Tape<T>* tape, const TensorPtr<T>& x) {
  auto z = make_tensor<T>(scalar_shape());
  CompensatedSum acc;
  for (auto v : x->data()) acc.add(v);
  (*z)[0] = static_cast<T>(acc.value());
  record(tape, "sum", z, {x}, [x = x.get(), z = z.get()] {
    const T g = z->grad()[0];
    for (auto& gx : x->ensure_grad()) gx += g;
  });
  return z;
}

template <typename T>
TensorPtr<T> log(Tape<T>* tape, const TensorPtr<T>& x) {
  auto z = make_tensor<T>(x->shape());
  for (int64_t i = 0; i < z->numel(); ++i) {
    require((*x)[i] > T(0), ErrorCode::NonFinite, "log: non-positive input");
    (*z)[i] = std::log((*x)[i]);
  }
  record(tape, "log", z, {x}, [x = x.get(), z = z.get()] {
    auto gz = z->grad();
    auto gx = x->ensure_grad();
    for (size_t i = 0; i < gz.size(); ++i) gx[i] += gz[i] / (*x)[i];
  });
  return z;
}

template <typename T>
TensorPtr<T> pow(Tape<T>* tape, const TensorPtr<T>& x, double exponent) {
  auto z = make_tensor<T>(x->shape());
  for (int64_t i = 0; i < z->numel(); ++i) {
    require((*x)[i] > T(0), ErrorCode::NonFinite, "pow: non-positive base");
    (*z)[i] = static_cast<T>(std::pow(static_cast<double>((*x)[i]), exponent));
  }
  record(tape, "pow", z, {x}, [x = x.get(), z = z.get(), exponent] {
    auto gz = z->grad();
    auto gx = x->ensure_grad();
    for (size_t i = 0; i < gz.size(); ++i)
      gx[i] += gz[i] * static_cast<T>(exponent * std::pow(static_cast<double>((*x)[i]), exponent - 1.0));
  });
  return z;
}

template <typename T>
TensorPtr<T> clamp_min(Tape<T>* tape, const TensorPtr<T>& x, double floor) {
  auto z = make_tensor<T>(x->shape());
  const T f = static_cast<T>(floor);
  auto pass = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(x->numel()));
  auto& trace = testing::decision_trace();
  if (trace.mode() == testing::DecisionTrace::Mode::Replay) {
    *pass = trace.replay(pass->size(), "clamp_min");
  } else {
    for (size_t i = 0; i < pass->size(); ++i) (*pass)[i] = !((*x)[static_cast<int64_t>(i)] < f);
    if (trace.mode() == testing::DecisionTrace::Mode::Record) trace.record(*pass);
  }
  for (int64_t i = 0; i < z->numel(); ++i) (*z)[i] = (*pass)[static_cast<size_t>(i)] ? (*x)[i] : f;
  record(tape, "clamp_min", z, {x}, [x = x.get(), z = z.get(), pass] {
    auto gz = z->grad();
    auto gx = x->ensure_grad();
    for (size_t i = 0; i < gz.size(); ++i)
      if ((*pass)[i]) gx[i] += gz[i];
  });
  return z;
}

template <typename T>
TensorPtr<T> affine(Tape<T>* tape, const TensorPtr<T>& x, double scale, double shift) {
  auto z = make_tensor<T>(x->shape());
  const T a = static_cast<T>(scale), c = static_cast<T>(shift);
  for (int64_t i = 0; i < z->numel(); ++i) (*z)[i] = a * (*x)[i] + c;
  record(tape, "affine", z, {x}, [x = x.get(), z = z.get(), a] {
    auto gz = z->grad();
    auto gx = x->ensure_grad();
    for (size_t i = 0; i < gz.size(); ++i) gx[i] += a * gz[i];
  });
  return z;
}

#define R2U3D_INSTANTIATE_OPS(T)                                                                                  \
  template TensorPtr<T> conv3d(Tape<T>*, const TensorPtr<T>&, const TensorPtr<T>&, const TensorPtr<T>&,           \
                               const ConvSpec&);                                                                  \
  template TensorPtr<T> conv_transpose3d(Tape<T>*, const TensorPtr<T>&, const TensorPtr<T>&, const TensorPtr<T>&, \
                                         const ConvSpec&);                                                        \
  template TensorPtr<T> maxpool3d(Tape<T>*, const TensorPtr<T>&, const Triple&, const Triple&);                  \
  template TensorPtr<T> global_avg_pool(Tape<T>*, const TensorPtr<T>&);                                          \
  template TensorPtr<T> dense(Tape<T>*, const TensorPtr<T>&, const TensorPtr<T>&, const TensorPtr<T>&);          \
  template TensorPtr<T> add(Tape<T>*, const TensorPtr<T>&, const TensorPtr<T>&);                                 \
  template TensorPtr<T> mul(Tape<T>*, const TensorPtr<T>&, const TensorPtr<T>&);                                 \
  template TensorPtr<T> relu(Tape<T>*, const TensorPtr<T>&);                                                     \
  template TensorPtr<T> sigmoid(Tape<T>*, const TensorPtr<T>&);                                                  \
  template TensorPtr<T> scale_channels(Tape<T>*, const TensorPtr<T>&, const TensorPtr<T>&);                      \
  template TensorPtr<T> concat_channels(Tape<T>*, std::span<const TensorPtr<T>>);                                \
  template TensorPtr<T> sum(Tape<T>*, const TensorPtr<T>&);                                                      \
  template TensorPtr<T> log(Tape<T>*, const TensorPtr<T>&);                                                      \
  template TensorPtr<T> pow(Tape<T>*, const TensorPtr<T>&, double);                                              \
  template TensorPtr<T> clamp_min(Tape<T>*, const TensorPtr<T>&, double);                                        \
  template TensorPtr<T> affine(Tape<T>*, const TensorPtr<T>&, double, double);

R2U3D_INSTANTIATE_OPS(float)
R2U3D_INSTANTIATE_OPS(double)

#undef R2U3D_INSTANTIATE_OPS

}  // namespace ops
}  // namespace r2u3d
