#pragma once

#include <span>
#include <string>

#include "tape.hpp"
#include "tensor.hpp"

namespace r2u3d {

enum class Padding { Same, Valid };

/// Geometry of a 3D convolution. For conv_transpose3d the channel counts
/// describe the transposed op itself (in_channels -> out_channels).
struct ConvSpec {
  Triple kernel{3, 3, 3};
  Triple stride{1, 1, 1};
  Triple dilation{1, 1, 1};
  Padding padding = Padding::Same;
  int64_t in_channels = 1;
  int64_t out_channels = 1;
  bool has_bias = true;

  void validate() const;
  int64_t kernel_volume() const { return kernel[0] * kernel[1] * kernel[2]; }
};

/// Output spatial extents of conv3d. Same: ceil(in/stride). Valid:
/// floor((in - dilation*(k-1) - 1)/stride) + 1.
Triple conv_output_extent(const Triple& in, const ConvSpec& spec);

/// Output spatial extents of conv_transpose3d: the input extents of the
/// conv3d whose output has extents `in`. Same: in*stride.
Triple conv_transpose_output_extent(const Triple& in, const ConvSpec& spec);

/// Leading zero padding per axis for conv3d on inputs of extent `in`.
Triple conv_pad_before(const Triple& in, const ConvSpec& spec);

namespace ops {

// Every op accepts a nullable tape; with nullptr nothing is recorded.

/// w: [Cout, Cin, kD, kH, kW], b: [Cout] stored as [Cout,1,1,1,1] or null.
template <typename T>
TensorPtr<T> conv3d(Tape<T>* tape, const TensorPtr<T>& x, const TensorPtr<T>& w, const TensorPtr<T>& b,
                    const ConvSpec& spec);

/// Adjoint of conv3d: w is [in_channels, out_channels, kD, kH, kW], i.e. the
/// weight of the conv3d this op transposes.
template <typename T>
TensorPtr<T> conv_transpose3d(Tape<T>* tape, const TensorPtr<T>& x, const TensorPtr<T>& w,
                              const TensorPtr<T>& b, const ConvSpec& spec);

template <typename T>
TensorPtr<T> maxpool3d(Tape<T>* tape, const TensorPtr<T>& x, const Triple& window, const Triple& stride);

template <typename T>
TensorPtr<T> global_avg_pool(Tape<T>* tape, const TensorPtr<T>& x);

/// x: [N, F_in, 1, 1, 1], w: [F_out, F_in, 1, 1, 1], b: [F_out, 1, 1, 1, 1].
template <typename T>
TensorPtr<T> dense(Tape<T>* tape, const TensorPtr<T>& x, const TensorPtr<T>& w, const TensorPtr<T>& b);

template <typename T>
TensorPtr<T> add(Tape<T>* tape, const TensorPtr<T>& x, const TensorPtr<T>& y);

template <typename T>
TensorPtr<T> mul(Tape<T>* tape, const TensorPtr<T>& x, const TensorPtr<T>& y);

template <typename T>
TensorPtr<T> relu(Tape<T>* tape, const TensorPtr<T>& x);

template <typename T>
TensorPtr<T> sigmoid(Tape<T>* tape, const TensorPtr<T>& x);

/// x * s with s: [N, C, 1, 1, 1] broadcast over the spatial axes.
template <typename T>
TensorPtr<T> scale_channels(Tape<T>* tape, const TensorPtr<T>& x, const TensorPtr<T>& s);

template <typename T>
TensorPtr<T> concat_channels(Tape<T>* tape, std::span<const TensorPtr<T>> xs);

/// Sum of all elements as a [1,1,1,1,1] tensor.
template <typename T>
TensorPtr<T> sum(Tape<T>* tape, const TensorPtr<T>& x);

/// Elementwise natural log; inputs must be positive.
template <typename T>
TensorPtr<T> log(Tape<T>* tape, const TensorPtr<T>& x);

/// Elementwise x^exponent; inputs must be positive.
template <typename T>
TensorPtr<T> pow(Tape<T>* tape, const TensorPtr<T>& x, double exponent);

/// Elementwise max(x, floor). Gradient is zero where x < floor.
template <typename T>
TensorPtr<T> clamp_min(Tape<T>* tape, const TensorPtr<T>& x, double floor);

/// Elementwise scale*x + shift.
template <typename T>
TensorPtr<T> affine(Tape<T>* tape, const TensorPtr<T>& x, double scale, double shift);

}  // namespace ops

namespace conv_kernels {

// Raw kernels behind conv3d/conv_transpose3d. Exposed so both algorithms can
// be compared directly. Shapes follow conv3d (weights [Cout, Cin, k...]).

template <typename T>
void forward(const Tensor<T>& x, const Tensor<T>& w, const ConvSpec& spec, Tensor<T>& y);

template <typename T>
void backward_input(const Tensor<T>& dy, const Tensor<T>& w, const ConvSpec& spec, Tensor<T>& dx);

template <typename T>
void backward_weight(const Tensor<T>& x, const Tensor<T>& dy, const ConvSpec& spec, Tensor<T>& dw);

}  // namespace conv_kernels

}  // namespace r2u3d
