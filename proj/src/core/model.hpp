#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "blocks.hpp"

namespace r2u3d {

enum class Variant { Default, Dynamic };

/// Parameter totals reported for the two published presets.
inline constexpr int64_t kReferenceParamsDefault = 20306691;
inline constexpr int64_t kReferenceParamsDynamic = 12953330;

struct ModelConfig {
  Variant variant = Variant::Dynamic;
  std::array<int64_t, 4> filters{20, 60, 120, 240};
  std::array<int, 4> depths{1, 2, 3, 4};
  int stem_stages = 3;
  /// Dilation rate of the encoder's 3x3x3 recurrent convolutions.
  int64_t dilation = 2;
  DownsampleConfig downsample{DownsampleMode::InceptionConcat};
  int64_t se_reduction = 16;
  int layers_per_unit = 2;
  /// 1x1x1 convolution after each encoder max-pool.
  bool transition_conv = true;

  static ModelConfig preset_default();
  static ModelConfig preset_dynamic();
  /// "default" or "dynamic".
  static ModelConfig preset(const std::string& name);

  void validate() const;
  /// Every spatial extent of the input must be a multiple of this.
  int64_t required_divisor() const { return int64_t{1} << (stem_stages + 3); }
  int64_t reference_parameter_count() const {
    return variant == Variant::Default ? kReferenceParamsDefault : kReferenceParamsDynamic;
  }

  bool operator==(const ModelConfig&) const;
};

std::string to_string(Variant v);

using LevelUnit = std::variant<Rrcu, Drrcu>;

/// The wired network: block descriptors indexing into a parameter layout.
struct Topology {
  ModelConfig cfg;
  ParamLayout layout;
  std::vector<DownsampleStage> stem;
  std::vector<LevelUnit> encoder;                  // levels 1..4
  std::vector<std::optional<ConvLayer>> transition;  // before levels 2..4
  std::vector<ConvLayer> up;                       // decoder levels 3..1
  std::vector<ConvLayer> fuse;
  std::vector<LevelUnit> decoder;
  std::vector<UpsampleStage> head;
  ConvLayer final_conv;

  static Topology build(const ModelConfig& cfg);
};

/// Runs the network. x: [N, 1, D, H, W] with each extent divisible by
/// cfg.required_divisor(). Output has the same shape with values in (0, 1).
template <typename T>
TensorPtr<T> forward(const Topology& topo, const ParamStore<T>& params, Tape<T>* tape, const TensorPtr<T>& x);

struct SummaryRow {
  std::string name;
  Shape5 output;
  int64_t parameters = 0;
};

class Model {
 public:
  /// He-normal (fan-in) weights and zero biases drawn from `seed`.
  static Model build(const ModelConfig& cfg, uint64_t seed);
  /// Adopts existing values; shapes must match the layout of `cfg`.
  static Model from_parameters(const ModelConfig& cfg, ParamStore<float> params);

  const ModelConfig& config() const { return topo_->cfg; }
  const Topology& topology() const { return *topo_; }
  const ParamLayout& layout() const { return topo_->layout; }
  ParamStore<float>& params() { return params_; }
  const ParamStore<float>& params() const { return params_; }

  int64_t count_parameters() const;
  std::vector<SummaryRow> summarize(const Triple& input_extent) const;

  /// Layer table, total, reference total and signed delta as text.
  std::string summary_table(const Triple& input_extent) const;

  /// Inference on a [N, 1, D, H, W] tensor.
  Tensor<float> predict(const Tensor<float>& x) const;

 private:
  Model(std::shared_ptr<const Topology> topo, ParamStore<float> params)
      : topo_(std::move(topo)), params_(std::move(params)) {}

  std::shared_ptr<const Topology> topo_;
  ParamStore<float> params_;
};

}  // namespace r2u3d
