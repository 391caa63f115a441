#include "blocks.hpp"

namespace r2u3d {

void RrcuConfig::validate() const {
  require(filters >= 1, ErrorCode::Config, "rrcu: filters must be >= 1");
  require(depth >= 0, ErrorCode::Config, "rrcu: depth must be >= 0");
  require(layers_per_unit >= 1, ErrorCode::Config, "rrcu: layers_per_unit must be >= 1");
  for (auto d : dilation) require(d >= 1, ErrorCode::Config, "rrcu: dilation must be >= 1");
}

void SeConfig::validate() const {
  require(channels >= 1, ErrorCode::Config, "se: channels must be >= 1");
  require(reduction >= 1, ErrorCode::Config, "se: reduction must be >= 1");
}

void DownsampleConfig::validate() const {
  require(!branch_kernels.empty(), ErrorCode::Config, "downsample: at least one branch kernel required");
  for (const auto& k : branch_kernels)
    for (auto e : k) require(e >= 1, ErrorCode::Config, "downsample: branch kernel extents must be >= 1");
  for (auto s : stride) require(s >= 1, ErrorCode::Config, "downsample: stride must be >= 1");
}

namespace {
Triple ones() { return {1, 1, 1}; }
}  // namespace

ConvLayer build_conv(BuildContext& ctx, const std::string& path, const ConvSpec& spec, bool transposed) {
  spec.validate();
  ConvLayer layer;
  layer.spec = spec;
  layer.transposed = transposed;
  const Shape5 wshape = transposed ? Shape5(spec.in_channels, spec.out_channels, spec.kernel)
                                   : Shape5(spec.out_channels, spec.in_channels, spec.kernel);
  layer.weight = ctx.layout.add(path + ".weight", wshape);
  LayerRecord row{path, spec.out_channels, ctx.scale_shift, {layer.weight}};
  if (spec.has_bias) {
    layer.bias = ctx.layout.add(path + ".bias", Shape5(spec.out_channels, 1, 1, 1, 1));
    row.params.push_back(*layer.bias);
  }
  if (transposed) row.scale_shift -= 1;
  ctx.layout.add_layer(std::move(row));
  return layer;
}

RecurrentConvLayer build_recurrent_conv_layer(BuildContext& ctx, const std::string& path, int64_t channels, int depth,
                                              const Triple& dilation) {
  require(depth >= 0, ErrorCode::Config, "recurrent conv layer: depth must be >= 0");
  ConvSpec spec;
  spec.kernel = {3, 3, 3};
  spec.dilation = dilation;
  spec.in_channels = channels;
  spec.out_channels = channels;
  return {build_conv(ctx, path, spec), depth};
}

Rrcu build_rrcu(BuildContext& ctx, const std::string& path, int64_t in_channels, const RrcuConfig& cfg) {
  cfg.validate();
  Rrcu block;
  block.cfg = cfg;
  ConvSpec proj;
  proj.kernel = ones();
  proj.in_channels = in_channels;
  proj.out_channels = cfg.filters;
  block.projection = build_conv(ctx, path + ".proj", proj);
  for (int i = 0; i < cfg.layers_per_unit; ++i)
    block.layers.push_back(
        build_recurrent_conv_layer(ctx, path + ".rec" + std::to_string(i + 1), cfg.filters, cfg.depth, cfg.dilation));
  return block;
}

SeResidual build_se_residual(BuildContext& ctx, const std::string& path, const SeConfig& cfg) {
  cfg.validate();
  SeResidual block;
  block.cfg = cfg;
  const int64_t c = cfg.channels, r = cfg.reduced();
  block.fc1_weight = ctx.layout.add(path + ".fc1.weight", Shape5(r, c, 1, 1, 1));
  block.fc1_bias = ctx.layout.add(path + ".fc1.bias", Shape5(r, 1, 1, 1, 1));
  block.fc2_weight = ctx.layout.add(path + ".fc2.weight", Shape5(c, r, 1, 1, 1));
  block.fc2_bias = ctx.layout.add(path + ".fc2.bias", Shape5(c, 1, 1, 1, 1));
  ctx.layout.add_layer({path + ".fc1", r, ctx.scale_shift, {block.fc1_weight, block.fc1_bias}});
  ctx.layout.add_layer({path + ".fc2", c, ctx.scale_shift, {block.fc2_weight, block.fc2_bias}});
  return block;
}

Drrcu build_drrcu(BuildContext& ctx, const std::string& path, int64_t in_channels, const RrcuConfig& rrcu_cfg,
                  const SeConfig& se_cfg) {
  require(se_cfg.channels == rrcu_cfg.filters, ErrorCode::Config,
          "drrcu: SE channels (" + std::to_string(se_cfg.channels) + ") must equal RRCU filters (" +
              std::to_string(rrcu_cfg.filters) + ")");
  Drrcu block;
  block.rrcu = build_rrcu(ctx, path + ".rrcu", in_channels, rrcu_cfg);
  block.se = build_se_residual(ctx, path + ".se", se_cfg);
  return block;
}

DownsampleStage build_downsample_stage(BuildContext& ctx, const std::string& path, int64_t in_channels,
                                       const DownsampleConfig& cfg) {
  cfg.validate();
  DownsampleStage block;
  block.cfg = cfg;
  ctx.scale_shift += 1;
  for (const auto& k : cfg.branch_kernels) {
    ConvSpec spec;
    spec.kernel = k;
    spec.stride = cfg.stride;
    spec.in_channels = in_channels;
    spec.out_channels = 1;
    block.branches.push_back(
        build_conv(ctx, path + ".branch_k" + std::to_string(k[0]) + "x" + std::to_string(k[1]) + "x" + std::to_string(k[2]),
                   spec));
  }
  if (cfg.mode == DownsampleMode::InceptionConcat) {
    int64_t concat_channels = static_cast<int64_t>(cfg.branch_kernels.size());
    if (cfg.include_maxpool_branch) {
      ctx.layout.add_layer({path + ".maxpool", in_channels, ctx.scale_shift, {}});
      concat_channels += in_channels;
    }
    ctx.layout.add_layer({path + ".concat", concat_channels, ctx.scale_shift, {}});
    ConvSpec fuse;
    fuse.kernel = ones();
    fuse.in_channels = concat_channels;
    fuse.out_channels = 1;
    block.fuse = build_conv(ctx, path + ".fuse", fuse);
  }
  return block;
}

UpsampleStage build_upsample_stage(BuildContext& ctx, const std::string& path, int64_t in_channels) {
  ConvSpec spec;
  spec.kernel = {2, 2, 2};
  spec.stride = {2, 2, 2};
  spec.in_channels = in_channels;
  spec.out_channels = 1;
  UpsampleStage block{build_conv(ctx, path, spec, true)};
  ctx.scale_shift -= 1;
  return block;
}

// ---- forward ------------------------------------------------------------

template <typename T>
TensorPtr<T> apply_conv(const ConvLayer& layer, const ParamStore<T>& params, Tape<T>* tape, const TensorPtr<T>& x) {
  const auto& w = params[layer.weight];
  const auto b = params.get(layer.bias);
  return layer.transposed ? ops::conv_transpose3d(tape, x, w, b, layer.spec) : ops::conv3d(tape, x, w, b, layer.spec);
}

template <typename T>
TensorPtr<T> recurrent_conv_layer(const RecurrentConvLayer& layer, const ParamStore<T>& params, Tape<T>* tape,
                                  const TensorPtr<T>& x) {
  require(x->shape().c() == layer.conv.spec.in_channels, ErrorCode::ShapeMismatch,
          "recurrent conv layer: input has " + std::to_string(x->shape().c()) + " channels, layer expects " +
              std::to_string(layer.conv.spec.in_channels));
  auto z = ops::relu(tape, apply_conv(layer.conv, params, tape, x));
  for (int k = 1; k <= layer.depth; ++k) z = ops::relu(tape, apply_conv(layer.conv, params, tape, ops::add(tape, x, z)));
  return z;
}

template <typename T>
TensorPtr<T> rrcu(const Rrcu& block, const ParamStore<T>& params, Tape<T>* tape, const TensorPtr<T>& x) {
  auto h = apply_conv(block.projection, params, tape, x);
  auto y = h;
  for (const auto& layer : block.layers) y = recurrent_conv_layer(layer, params, tape, y);
  return ops::add(tape, h, y);
}

template <typename T>
TensorPtr<T> se_scale(const SeResidual& block, const ParamStore<T>& params, Tape<T>* tape, const TensorPtr<T>& x) {
  require(x->shape().c() == block.cfg.channels, ErrorCode::ShapeMismatch,
          "se_residual: input has " + std::to_string(x->shape().c()) + " channels, block expects " +
              std::to_string(block.cfg.channels));
  auto squeezed = ops::global_avg_pool(tape, x);
  auto hidden = ops::relu(tape, ops::dense(tape, squeezed, params[block.fc1_weight], params[block.fc1_bias]));
  return ops::sigmoid(tape, ops::dense(tape, hidden, params[block.fc2_weight], params[block.fc2_bias]));
}

template <typename T>
TensorPtr<T> se_residual(const SeResidual& block, const ParamStore<T>& params, Tape<T>* tape, const TensorPtr<T>& x) {
  auto s = se_scale(block, params, tape, x);
  return ops::relu(tape, ops::add(tape, x, ops::scale_channels(tape, x, s)));
}

template <typename T>
TensorPtr<T> drrcu(const Drrcu& block, const ParamStore<T>& params, Tape<T>* tape, const TensorPtr<T>& x) {
  return se_residual(block.se, params, tape, rrcu(block.rrcu, params, tape, x));
}

template <typename T>
TensorPtr<T> downsample_stage(const DownsampleStage& block, const ParamStore<T>& params, Tape<T>* tape,
                              const TensorPtr<T>& x) {
  const Triple in = x->shape().spatial();
  for (int a = 0; a < 3; ++a)
    require(in[a] % block.cfg.stride[a] == 0, ErrorCode::ShapeMismatch,
            "downsample stage: extents " + to_string(in) + " not divisible by stride " + to_string(block.cfg.stride));
  std::vector<TensorPtr<T>> outs;
  for (const auto& branch : block.branches) outs.push_back(apply_conv(branch, params, tape, x));
  if (block.cfg.mode == DownsampleMode::AddBranches) {
    auto acc = outs[0];
    for (size_t i = 1; i < outs.size(); ++i) acc = ops::add(tape, acc, outs[i]);
    return acc;
  }
  if (block.cfg.include_maxpool_branch) outs.push_back(ops::maxpool3d(tape, x, block.cfg.stride, block.cfg.stride));
  auto cat = ops::concat_channels<T>(tape, outs);
  return apply_conv(*block.fuse, params, tape, cat);
}

template <typename T>
TensorPtr<T> upsample_stage(const UpsampleStage& block, const ParamStore<T>& params, Tape<T>* tape,
                            const TensorPtr<T>& x) {
  return apply_conv(block.up, params, tape, x);
}

#define R2U3D_INSTANTIATE_BLOCKS(T)                                                                               \
  template TensorPtr<T> apply_conv(const ConvLayer&, const ParamStore<T>&, Tape<T>*, const TensorPtr<T>&);       \
  template TensorPtr<T> recurrent_conv_layer(const RecurrentConvLayer&, const ParamStore<T>&, Tape<T>*,          \
                                             const TensorPtr<T>&);                                               \
  template TensorPtr<T> rrcu(const Rrcu&, const ParamStore<T>&, Tape<T>*, const TensorPtr<T>&);                  \
  template TensorPtr<T> se_scale(const SeResidual&, const ParamStore<T>&, Tape<T>*, const TensorPtr<T>&);        \
  template TensorPtr<T> se_residual(const SeResidual&, const ParamStore<T>&, Tape<T>*, const TensorPtr<T>&);     \
  template TensorPtr<T> drrcu(const Drrcu&, const ParamStore<T>&, Tape<T>*, const TensorPtr<T>&);                \
  template TensorPtr<T> downsample_stage(const DownsampleStage&, const ParamStore<T>&, Tape<T>*,                 \
                                         const TensorPtr<T>&);                                                   \
  template TensorPtr<T> upsample_stage(const UpsampleStage&, const ParamStore<T>&, Tape<T>*, const TensorPtr<T>&);

R2U3D_INSTANTIATE_BLOCKS(float)
R2U3D_INSTANTIATE_BLOCKS(double)

#undef R2U3D_INSTANTIATE_BLOCKS

}  // namespace r2u3d
