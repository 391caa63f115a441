#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ops.hpp"
#include "params.hpp"

namespace r2u3d {

struct RrcuConfig {
  int64_t filters = 1;
  /// Recurrence steps d; the layer applies its convolution d + 1 times.
  int depth = 0;
  Triple dilation{1, 1, 1};
  int layers_per_unit = 2;

  void validate() const;
};

struct SeConfig {
  int64_t channels = 1;
  int64_t reduction = 16;

  int64_t reduced() const { return std::max<int64_t>(1, channels / reduction); }
  void validate() const;
};

enum class DownsampleMode { AddBranches, InceptionConcat };

struct DownsampleConfig {
  DownsampleMode mode = DownsampleMode::AddBranches;
  std::vector<Triple> branch_kernels{{1, 1, 1}, {3, 3, 3}, {5, 5, 5}};
  Triple stride{2, 2, 2};
  bool include_maxpool_branch = true;

  void validate() const;
};

/// Where builders register parameters and layer rows, and the resolution
/// (number of 2x reductions from the network input) they operate at.
struct BuildContext {
  ParamLayout& layout;
  int scale_shift = 0;
};

struct ConvLayer {
  ConvSpec spec;
  size_t weight = 0;
  std::optional<size_t> bias;
  bool transposed = false;
};

struct RecurrentConvLayer {
  ConvLayer conv;
  int depth = 0;
};

struct Rrcu {
  RrcuConfig cfg;
  ConvLayer projection;
  std::vector<RecurrentConvLayer> layers;
};

struct SeResidual {
  SeConfig cfg;
  size_t fc1_weight = 0, fc1_bias = 0, fc2_weight = 0, fc2_bias = 0;
};

struct Drrcu {
  Rrcu rrcu;
  SeResidual se;
};

struct DownsampleStage {
  DownsampleConfig cfg;
  std::vector<ConvLayer> branches;
  std::optional<ConvLayer> fuse;
};

struct UpsampleStage {
  ConvLayer up;
};

// ---- builders -----------------------------------------------------------

/// Registers `<path>.weight` (and `<path>.bias`) plus one layer row.
ConvLayer build_conv(BuildContext& ctx, const std::string& path, const ConvSpec& spec, bool transposed = false);
RecurrentConvLayer build_recurrent_conv_layer(BuildContext& ctx, const std::string& path, int64_t channels, int depth,
                                              const Triple& dilation);
Rrcu build_rrcu(BuildContext& ctx, const std::string& path, int64_t in_channels, const RrcuConfig& cfg);
SeResidual build_se_residual(BuildContext& ctx, const std::string& path, const SeConfig& cfg);
Drrcu build_drrcu(BuildContext& ctx, const std::string& path, int64_t in_channels, const RrcuConfig& rrcu_cfg,
                  const SeConfig& se_cfg);
/// Increments ctx.scale_shift.
DownsampleStage build_downsample_stage(BuildContext& ctx, const std::string& path, int64_t in_channels,
                                       const DownsampleConfig& cfg);
/// Decrements ctx.scale_shift.
UpsampleStage build_upsample_stage(BuildContext& ctx, const std::string& path, int64_t in_channels);

// ---- forward ------------------------------------------------------------

template <typename T>
TensorPtr<T> apply_conv(const ConvLayer& layer, const ParamStore<T>& params, Tape<T>* tape, const TensorPtr<T>& x);

/// z_0 = ReLU(conv(x)); z_k = ReLU(conv(x + z_{k-1})) for k = 1..depth, all
/// steps sharing one weight set. Returns z_depth.
template <typename T>
TensorPtr<T> recurrent_conv_layer(const RecurrentConvLayer& layer, const ParamStore<T>& params, Tape<T>* tape,
                                  const TensorPtr<T>& x);

/// h = 1x1x1 projection of x; output = h + (recurrent layers applied to h).
template <typename T>
TensorPtr<T> rrcu(const Rrcu& block, const ParamStore<T>& params, Tape<T>* tape, const TensorPtr<T>& x);

/// Scale s = sigmoid(FC2(ReLU(FC1(gap(x))))); output = ReLU(x + x*s).
template <typename T>
TensorPtr<T> se_residual(const SeResidual& block, const ParamStore<T>& params, Tape<T>* tape, const TensorPtr<T>& x);

/// The channel scale computed inside se_residual, shape [N, C, 1, 1, 1].
template <typename T>
TensorPtr<T> se_scale(const SeResidual& block, const ParamStore<T>& params, Tape<T>* tape, const TensorPtr<T>& x);

template <typename T>
TensorPtr<T> drrcu(const Drrcu& block, const ParamStore<T>& params, Tape<T>* tape, const TensorPtr<T>& x);

template <typename T>
TensorPtr<T> downsample_stage(const DownsampleStage& block, const ParamStore<T>& params, Tape<T>* tape,
                              const TensorPtr<T>& x);

template <typename T>
TensorPtr<T> upsample_stage(const UpsampleStage& block, const ParamStore<T>& params, Tape<T>* tape,
                            const TensorPtr<T>& x);

}  // namespace r2u3d
