#include "model.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <random>

namespace r2u3d {

ModelConfig ModelConfig::preset_default() {
  ModelConfig cfg;
  cfg.variant = Variant::Default;
  cfg.filters = {40, 80, 160, 320};
  cfg.depths = {3, 3, 3, 3};
  cfg.downsample.mode = DownsampleMode::AddBranches;
  return cfg;
}

ModelConfig ModelConfig::preset_dynamic() {
  ModelConfig cfg;
  cfg.variant = Variant::Dynamic;
  cfg.filters = {20, 60, 120, 240};
  cfg.depths = {1, 2, 3, 4};
  cfg.downsample.mode = DownsampleMode::InceptionConcat;
  return cfg;
}

ModelConfig ModelConfig::preset(const std::string& name) {
  if (name == "default") return preset_default();
  if (name == "dynamic") return preset_dynamic();
  fail(ErrorCode::Config, "unknown preset '" + name + "' (expected 'default' or 'dynamic')");
}

void ModelConfig::validate() const {
  for (auto f : filters) require(f >= 1, ErrorCode::Config, "model: every filter count must be >= 1");
  for (auto d : depths) require(d >= 0, ErrorCode::Config, "model: recurrence depths must be >= 0");
  require(stem_stages >= 0, ErrorCode::Config, "model: stem_stages must be >= 0");
  require(stem_stages <= 12, ErrorCode::Config, "model: stem_stages unreasonably large");
  require(dilation >= 1, ErrorCode::Config, "model: dilation must be >= 1");
  require(se_reduction >= 1, ErrorCode::Config, "model: se_reduction must be >= 1");
  require(layers_per_unit >= 1, ErrorCode::Config, "model: layers_per_unit must be >= 1");
  downsample.validate();
  require(downsample.stride == Triple{2, 2, 2}, ErrorCode::Config, "model: stem stride must be 2x2x2");
}

bool ModelConfig::operator==(const ModelConfig& o) const {
  return variant == o.variant && filters == o.filters && depths == o.depths && stem_stages == o.stem_stages &&
         dilation == o.dilation && downsample.mode == o.downsample.mode &&
         downsample.branch_kernels == o.downsample.branch_kernels && downsample.stride == o.downsample.stride &&
         downsample.include_maxpool_branch == o.downsample.include_maxpool_branch &&
         se_reduction == o.se_reduction && layers_per_unit == o.layers_per_unit &&
         transition_conv == o.transition_conv;
}

std::string to_string(Variant v) { return v == Variant::Default ? "default" : "dynamic"; }

namespace {

ConvSpec pointwise(int64_t in, int64_t out) {
  ConvSpec s;
  s.kernel = {1, 1, 1};
  s.in_channels = in;
  s.out_channels = out;
  return s;
}

LevelUnit build_unit(BuildContext& ctx, const ModelConfig& cfg, const std::string& path, int64_t in_channels,
                     int level, bool encoder) {
  RrcuConfig rc;
  rc.filters = cfg.filters[level];
  rc.depth = cfg.depths[level];
  rc.layers_per_unit = cfg.layers_per_unit;
  rc.dilation = encoder ? Triple{cfg.dilation, cfg.dilation, cfg.dilation} : Triple{1, 1, 1};
  if (cfg.variant == Variant::Default) return build_rrcu(ctx, path, in_channels, rc);
  return build_drrcu(ctx, path, in_channels, rc, SeConfig{rc.filters, cfg.se_reduction});
}

template <typename T>
TensorPtr<T> run_unit(const LevelUnit& unit, const ParamStore<T>& params, Tape<T>* tape, const TensorPtr<T>& x) {
  if (const auto* r = std::get_if<Rrcu>(&unit)) return rrcu(*r, params, tape, x);
  return drrcu(std::get<Drrcu>(unit), params, tape, x);
}

}  // namespace

Topology Topology::build(const ModelConfig& cfg) {
  cfg.validate();
  Topology t;
  t.cfg = cfg;
  BuildContext ctx{t.layout, 0};

  for (int s = 0; s < cfg.stem_stages; ++s)
    t.stem.push_back(build_downsample_stage(ctx, "stem" + std::to_string(s + 1), 1, cfg.downsample));

  t.encoder.push_back(build_unit(ctx, cfg, "enc1", 1, 0, true));
  for (int level = 1; level < 4; ++level) {
    const std::string name = "enc" + std::to_string(level + 1);
    const int64_t prev = cfg.filters[level - 1];
    ctx.scale_shift += 1;
    t.layout.add_layer({name + ".maxpool", prev, ctx.scale_shift, {}});
    if (cfg.transition_conv)
      t.transition.push_back(build_conv(ctx, name + ".transition", pointwise(prev, prev)));
    else
      t.transition.push_back(std::nullopt);
    t.encoder.push_back(build_unit(ctx, cfg, name, prev, level, true));
  }

  for (int level = 2; level >= 0; --level) {
    const std::string name = "dec" + std::to_string(level + 1);
    const int64_t f = cfg.filters[level];
    ConvSpec up;
    up.kernel = {2, 2, 2};
    up.stride = {2, 2, 2};
    up.in_channels = cfg.filters[level + 1];
    up.out_channels = f;
    t.up.push_back(build_conv(ctx, name + ".up", up, true));
    ctx.scale_shift -= 1;
    t.layout.add_layer({name + ".concat", 2 * f, ctx.scale_shift, {}});
    t.fuse.push_back(build_conv(ctx, name + ".fuse", pointwise(2 * f, f)));
    t.decoder.push_back(build_unit(ctx, cfg, name, f, level, false));
  }

  int64_t channels = cfg.filters[0];
  for (int s = 0; s < cfg.stem_stages; ++s) {
    t.head.push_back(build_upsample_stage(ctx, "head" + std::to_string(s + 1), channels));
    channels = 1;
  }
  t.final_conv = build_conv(ctx, "output.conv", pointwise(channels, 1));
  t.layout.add_layer({"output.sigmoid", 1, ctx.scale_shift, {}});
  return t;
}

template <typename T>
TensorPtr<T> forward(const Topology& topo, const ParamStore<T>& params, Tape<T>* tape, const TensorPtr<T>& x) {
  const ModelConfig& cfg = topo.cfg;
  require(x->shape().c() == 1, ErrorCode::ShapeMismatch,
          "model input must have a single channel, got " + x->shape().str());
  const int64_t divisor = cfg.required_divisor();
  for (auto e : x->shape().spatial())
    require(e >= divisor && e % divisor == 0, ErrorCode::ShapeMismatch,
            "model input extents " + to_string(x->shape().spatial()) + " must be positive multiples of " +
                std::to_string(divisor) + " (2^(stem_stages + 3))");

  auto t = x;
  for (const auto& stage : topo.stem) t = downsample_stage(stage, params, tape, t);

  std::vector<TensorPtr<T>> skips;
  t = run_unit(topo.encoder[0], params, tape, t);
  skips.push_back(t);
  for (int level = 1; level < 4; ++level) {
    t = ops::maxpool3d(tape, t, Triple{2, 2, 2}, Triple{2, 2, 2});
    if (const auto& tr = topo.transition[level - 1]) t = ops::relu(tape, apply_conv(*tr, params, tape, t));
    t = run_unit(topo.encoder[level], params, tape, t);
    skips.push_back(t);
  }

  for (int i = 0; i < 3; ++i) {
    const int level = 2 - i;
    auto up = ops::relu(tape, apply_conv(topo.up[i], params, tape, t));
    const std::vector<TensorPtr<T>> parts{up, skips[level]};
    auto cat = ops::concat_channels<T>(tape, parts);
    t = ops::relu(tape, apply_conv(topo.fuse[i], params, tape, cat));
    t = run_unit(topo.decoder[i], params, tape, t);
  }

  for (const auto& stage : topo.head) t = upsample_stage(stage, params, tape, t);
  return ops::sigmoid(tape, apply_conv(topo.final_conv, params, tape, t));
}

template TensorPtr<float> forward(const Topology&, const ParamStore<float>&, Tape<float>*, const TensorPtr<float>&);
template TensorPtr<double> forward(const Topology&, const ParamStore<double>&, Tape<double>*,
                                   const TensorPtr<double>&);

Model Model::build(const ModelConfig& cfg, uint64_t seed) {
  auto topo = std::make_shared<const Topology>(Topology::build(cfg));
  ParamStore<float> params(topo->layout);
  std::mt19937_64 rng(seed);
  for (size_t i = 0; i < params.size(); ++i) {
    const std::string& path = topo->layout.path(i);
    if (path.ends_with(".bias")) continue;
    const Shape5& s = topo->layout.shape(i);
    const double fan_in = static_cast<double>(s.c() * s.spatial_size());
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
    for (auto& v : params[i]->values()) v = static_cast<float>(dist(rng));
  }
  return Model(std::move(topo), std::move(params));
}

Model Model::from_parameters(const ModelConfig& cfg, ParamStore<float> params) {
  auto topo = std::make_shared<const Topology>(Topology::build(cfg));
  require(params.size() == topo->layout.size(), ErrorCode::Format,
          "parameter count mismatch: got " + std::to_string(params.size()) + " tensors, layout has " +
              std::to_string(topo->layout.size()));
  for (size_t i = 0; i < params.size(); ++i)
    require(params[i]->shape() == topo->layout.shape(i), ErrorCode::Format,
            "parameter " + topo->layout.path(i) + " has shape " + params[i]->shape().str() + ", expected " +
                topo->layout.shape(i).str());
  return Model(std::move(topo), std::move(params));
}

int64_t Model::count_parameters() const {
  int64_t total = 0;
  for (size_t i = 0; i < params_.size(); ++i) total += params_[i]->numel();
  return total;
}

std::vector<SummaryRow> Model::summarize(const Triple& input_extent) const {
  std::vector<SummaryRow> rows;
  for (const auto& layer : topo_->layout.layers()) {
    SummaryRow row;
    row.name = layer.name;
    Triple ext{};
    for (int a = 0; a < 3; ++a) ext[a] = input_extent[a] >> layer.scale_shift;
    row.output = Shape5(1, layer.out_channels, ext);
    for (auto p : layer.params) row.parameters += topo_->layout.shape(p).numel();
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string Model::summary_table(const Triple& input_extent) const {
  const auto rows = summarize(input_extent);
  size_t width = 5;
  for (const auto& r : rows) width = std::max(width, r.name.size());
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %-22s  %12s\n", static_cast<int>(width), "layer", "output", "params");
  out << buf;
  int64_t row_sum = 0;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-*s  %-22s  %12lld\n", static_cast<int>(width), r.name.c_str(),
                  r.output.str().c_str(), static_cast<long long>(r.parameters));
    out << buf;
    row_sum += r.parameters;
  }
  const int64_t total = count_parameters();
  const int64_t reference = config().reference_parameter_count();
  out << "variant: " << to_string(config().variant) << "\n";
  out << "row sum: " << row_sum << "\n";
  out << "total parameters: " << total << "\n";
  out << "reference total: " << reference << "\n";
  std::snprintf(buf, sizeof buf, "delta vs reference: %+lld (%+.2f%%)\n", static_cast<long long>(total - reference),
                100.0 * static_cast<double>(total - reference) / static_cast<double>(reference));
  out << buf;
  return out.str();
}

Tensor<float> Model::predict(const Tensor<float>& x) const {
  auto in = std::make_shared<Tensor<float>>(x);
  return std::move(*forward<float>(*topo_, params_, nullptr, in));
}

}  // namespace r2u3d
