#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "model.hpp"

using namespace r2u3d;
using test::random_tensor;

namespace {

ModelConfig toy_dynamic() {
  auto c = ModelConfig::preset("dynamic");
  c.filters = {2, 2, 2, 2};
  c.depths = {1, 1, 1, 1};
  c.stem_stages = 0;
  c.se_reduction = 1;
  return c;
}

ModelConfig toy_default() {
  auto c = ModelConfig::preset("default");
  c.filters = {2, 3, 4, 5};
  c.depths = {1, 1, 1, 1};
  c.stem_stages = 1;
  return c;
}

void fill_params(ParamStore<double>& p, std::mt19937_64& rng, double scale = 0.5) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (size_t i = 0; i < p.size(); ++i)
    for (auto& v : p[i]->values()) v = dist(rng);
}

}  // namespace

TEST_CASE("block parameter counts match a hand audit") {
  ParamLayout layout;
  BuildContext ctx{layout};
  RrcuConfig rc;
  rc.filters = 3;
  rc.depth = 2;
  build_rrcu(ctx, "r", 2, rc);
  // projection 3*2 + 3, two 3x3x3 layers of 3*3*27 + 3
  CHECK(layout.total_elements() == 9 + 2 * 246);

  ParamLayout se_layout;
  BuildContext se_ctx{se_layout};
  build_se_residual(se_ctx, "s", SeConfig{4, 2});
  // fc1 2x4 + 2, fc2 4x2 + 4
  CHECK(se_layout.total_elements() == 22);

  ParamLayout ds_layout;
  BuildContext ds_ctx{ds_layout};
  DownsampleConfig dc{DownsampleMode::InceptionConcat};
  build_downsample_stage(ds_ctx, "d", 2, dc);
  // branches k1, k3, k5 on 2 channels (+1 bias each), fuse over 3 + 2 pooled channels
  CHECK(ds_layout.total_elements() == 3 + 55 + 251 + 6);
  CHECK(ds_ctx.scale_shift == 1);
}

TEST_CASE("toy model parameter totals match a hand audit") {
  // enc1 236, enc2..4 244 each, dec3..1 282 each (up 34, fuse 10, proj 6, rec 220, se 12), output 3
  CHECK(Model::build(toy_dynamic(), 1).count_parameters() == 236 + 3 * 244 + 3 * 282 + 3);
  // stem 156, enc 224/507/900/1405, dec 1092/624/286, head + output 19
  CHECK(Model::build(toy_default(), 1).count_parameters() == 5213);
}

TEST_CASE("parameter paths are unique and summary rows sum to the total") {
  for (const auto& cfg : {toy_dynamic(), toy_default(), ModelConfig::preset("dynamic"), ModelConfig::preset("default")}) {
    const Model m = Model::build(cfg, 3);
    std::set<std::string> seen;
    for (size_t i = 0; i < m.layout().size(); ++i) CHECK(seen.insert(m.layout().path(i)).second);
    int64_t sum = 0;
    for (const auto& row : m.summarize({64, 64, 64})) sum += row.parameters;
    CHECK(sum == m.count_parameters());
  }
}

TEST_CASE("recurrence depth does not change the parameter count") {
  auto shallow = ModelConfig::preset("dynamic");
  auto deep = shallow;
  shallow.depths = {1, 1, 1, 1};
  deep.depths = {4, 4, 4, 4};
  CHECK(Model::build(shallow, 1).count_parameters() == Model::build(deep, 1).count_parameters());
}

TEST_CASE("recurrent conv layer applies one shared convolution depth + 1 times") {
  ParamLayout layout;
  BuildContext ctx{layout};
  const auto layer = build_recurrent_conv_layer(ctx, "rc", 2, 3, {1, 1, 1});
  ParamStore<double> params(layout);
  std::mt19937_64 rng(4);
  fill_params(params, rng);
  auto x = random_tensor<double>(rng, Shape5(1, 2, 3, 3, 3));
  auto got = recurrent_conv_layer<double>(layer, params, nullptr, x);

  auto conv = [&](const TensorPtr<double>& in) {
    return ops::conv3d<double>(nullptr, in, params[layer.conv.weight], params.get(layer.conv.bias), layer.conv.spec);
  };
  auto z = ops::relu<double>(nullptr, conv(x));
  for (int k = 0; k < 3; ++k) z = ops::relu<double>(nullptr, conv(ops::add<double>(nullptr, x, z)));
  for (int64_t i = 0; i < z->numel(); ++i) CHECK((*got)[i] == doctest::Approx((*z)[i]).epsilon(1e-12));
}

TEST_CASE("SE residual equals relu(x + x * sigmoid(fc2(relu(fc1(mean(x))))))") {
  ParamLayout layout;
  BuildContext ctx{layout};
  const auto block = build_se_residual(ctx, "se", SeConfig{3, 1});
  ParamStore<double> params(layout);
  std::mt19937_64 rng(6);
  fill_params(params, rng, 1.0);
  auto x = random_tensor<double>(rng, Shape5(1, 3, 2, 2, 2));
  auto got = se_residual<double>(block, params, nullptr, x);

  double mean[3] = {0, 0, 0};
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < 8; ++i) mean[c] += (*x)[c * 8 + i];
    mean[c] /= 8;
  }
  const auto& w1 = *params[block.fc1_weight];
  const auto& b1 = *params[block.fc1_bias];
  const auto& w2 = *params[block.fc2_weight];
  const auto& b2 = *params[block.fc2_bias];
  double hidden[3], scale[3];
  for (int o = 0; o < 3; ++o) {
    double acc = b1[o];
    for (int i = 0; i < 3; ++i) acc += w1[o * 3 + i] * mean[i];
    hidden[o] = std::max(acc, 0.0);
  }
  for (int o = 0; o < 3; ++o) {
    double acc = b2[o];
    for (int i = 0; i < 3; ++i) acc += w2[o * 3 + i] * hidden[i];
    scale[o] = 1.0 / (1.0 + std::exp(-acc));
  }
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 8; ++i) {
      const double v = (*x)[c * 8 + i];
      CHECK((*got)[c * 8 + i] == doctest::Approx(std::max(v + v * scale[c], 0.0)).epsilon(1e-12));
    }
}

TEST_CASE("DRRCU requires SE channels to match the RRCU filters") {
  ParamLayout layout;
  BuildContext ctx{layout};
  RrcuConfig rc;
  rc.filters = 4;
  CHECK_THROWS_AS(build_drrcu(ctx, "d", 1, rc, SeConfig{3, 1}), Error);
}

TEST_CASE("model output keeps the input shape and lies in (0, 1)") {
  for (const auto& cfg : {toy_dynamic(), toy_default()}) {
    const Model m = Model::build(cfg, 9);
    std::mt19937_64 rng(10);
    const int64_t e = cfg.required_divisor() * 2;
    auto x = random_tensor<float>(rng, Shape5(1, 1, e, e, e), 0.0, 1.0);
    const auto y = m.predict(*x);
    CHECK(y.shape() == x->shape());
    for (auto v : y.values()) {
      CHECK(v > 0.0f);
      CHECK(v < 1.0f);
    }
  }
}

TEST_CASE("non-divisible extents are rejected with the divisor in the message") {
  const Model m = Model::build(toy_default(), 1);
  Tensor<float> x(Shape5(1, 1, 16, 16, 32));
  CHECK(m.predict(x).shape() == x.shape());
  Tensor<float> bad(Shape5(1, 1, 16, 16, 20));
  try {
    (void)m.predict(bad);
    FAIL("expected a shape error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ShapeMismatch);
    CHECK(std::string(e.what()).find("multiples of 16") != std::string::npos);
  }
  Tensor<float> two(Shape5(1, 2, 16, 16, 16));
  CHECK_THROWS_AS((void)m.predict(two), Error);
}

TEST_CASE("build is deterministic per seed and He-scaled") {
  const auto a = Model::build(toy_default(), 5);
  const auto b = Model::build(toy_default(), 5);
  const auto c = Model::build(toy_default(), 6);
  bool same = true, differs = false;
  for (size_t i = 0; i < a.params().size(); ++i) {
    same = same && a.params()[i]->values() == b.params()[i]->values();
    differs = differs || a.params()[i]->values() != c.params()[i]->values();
    if (a.layout().path(i).ends_with(".bias"))
      for (auto v : a.params()[i]->values()) CHECK(v == 0.0f);
  }
  CHECK(same);
  CHECK(differs);

  // Large fan-in layer: sample variance near 2 / fan_in.
  const auto big = Model::build(ModelConfig::preset("dynamic"), 2);
  const auto idx = big.layout().find("enc4.rrcu.rec1.weight");
  REQUIRE(idx.has_value());
  const auto& w = *big.params()[*idx];
  const double fan_in = static_cast<double>(w.shape().c() * w.shape().spatial_size());
  double sq = 0;
  for (auto v : w.values()) sq += static_cast<double>(v) * v;
  CHECK(sq / static_cast<double>(w.numel()) == doctest::Approx(2.0 / fan_in).epsilon(0.05));
}

TEST_CASE("preset names and validation") {
  CHECK(ModelConfig::preset("default").variant == Variant::Default);
  CHECK(ModelConfig::preset("dynamic").variant == Variant::Dynamic);
  CHECK_THROWS_AS(ModelConfig::preset("huge"), Error);
  auto bad = toy_dynamic();
  bad.filters[2] = 0;
  CHECK_THROWS_AS(Model::build(bad, 1), Error);
}

TEST_CASE("summary table reports the reference delta") {
  const auto text = Model::build(ModelConfig::preset("default"), 1).summary_table({64, 64, 64});
  CHECK(text.find("reference total: 20306691") != std::string::npos);
  CHECK(text.find("delta vs reference: ") != std::string::npos);
}

TEST_CASE("recurrent conv layer degenerate cases") {
  std::mt19937_64 rng(21);
  for (int depth : {0, 2}) {
    ParamLayout layout;
    BuildContext ctx{layout};
    const auto layer = build_recurrent_conv_layer(ctx, "rc", 2, depth, {1, 1, 1});
    ParamStore<double> params(layout);
    auto x = random_tensor<double>(rng, Shape5(1, 2, 3, 3, 3));
    // Zero weights and bias: zero output whatever the depth.
    const auto silent = recurrent_conv_layer<double>(layer, params, nullptr, x);
    for (auto v : silent->values()) CHECK(v == 0.0);
    if (depth == 0) {
      fill_params(params, rng);
      const auto expected = ops::relu<double>(
          nullptr, ops::conv3d<double>(nullptr, x, params[layer.conv.weight], params.get(layer.conv.bias), layer.conv.spec));
      CHECK(recurrent_conv_layer<double>(layer, params, nullptr, x)->values() == expected->values());
    }
  }
}

TEST_CASE("RRCU decomposes into projection plus recurrent branch") {
  std::mt19937_64 rng(22);
  for (int64_t in_channels : {1, 3}) {
    ParamLayout layout;
    BuildContext ctx{layout};
    RrcuConfig rc;
    rc.filters = 4;
    rc.depth = 2;
    const auto block = build_rrcu(ctx, "r", in_channels, rc);
    ParamStore<double> params(layout);
    fill_params(params, rng);
    auto x = random_tensor<double>(rng, Shape5(1, in_channels, 3, 4, 3));
    const auto out = rrcu<double>(block, params, nullptr, x);
    CHECK(out->shape() == Shape5(1, 4, 3, 4, 3));

    const auto h = apply_conv<double>(block.projection, params, nullptr, x);
    auto branch = h;
    for (const auto& layer : block.layers) branch = recurrent_conv_layer<double>(layer, params, nullptr, branch);
    for (int64_t i = 0; i < out->numel(); ++i) CHECK((*out)[i] - (*branch)[i] == doctest::Approx((*h)[i]).epsilon(1e-12));

    // Silencing the recurrent weights leaves only the projection.
    for (const auto& layer : block.layers) {
      for (auto& v : params[layer.conv.weight]->values()) v = 0.0;
      for (auto& v : params.get(layer.conv.bias)->values()) v = 0.0;
    }
    CHECK(rrcu<double>(block, params, nullptr, x)->values() == h->values());
  }
}

namespace {

void force_gate(const SeResidual& block, ParamStore<double>& params, double bias) {
  for (auto& v : params[block.fc2_weight]->values()) v = 0.0;
  for (auto& v : params[block.fc2_bias]->values()) v = bias;
}

}  // namespace

TEST_CASE("SE residual with a forced gate") {
  std::mt19937_64 rng(23);
  ParamLayout layout;
  BuildContext ctx{layout};
  const auto block = build_se_residual(ctx, "se", SeConfig{3, 1});
  ParamStore<double> params(layout);
  fill_params(params, rng);
  auto x = random_tensor<double>(rng, Shape5(1, 3, 2, 3, 2));

  force_gate(block, params, -1000.0);  // s = 0
  const auto closed = se_residual<double>(block, params, nullptr, x);
  for (int64_t i = 0; i < x->numel(); ++i) CHECK((*closed)[i] == std::max((*x)[i], 0.0));

  force_gate(block, params, 1000.0);  // s = 1
  const auto open = se_residual<double>(block, params, nullptr, x);
  for (int64_t i = 0; i < x->numel(); ++i) CHECK((*open)[i] == std::max(2 * (*x)[i], 0.0));

  // Monotone in s where x > 0.
  force_gate(block, params, -3.0);
  auto previous = se_residual<double>(block, params, nullptr, x);
  for (double bias : {-1.0, 0.0, 2.0, 5.0}) {
    force_gate(block, params, bias);
    const auto now = se_residual<double>(block, params, nullptr, x);
    for (int64_t i = 0; i < x->numel(); ++i)
      if ((*x)[i] > 0) CHECK((*now)[i] >= (*previous)[i]);
    previous = now;
  }
}

TEST_CASE("DRRCU at depth 0 with a closed gate is relu of the degenerate RRCU") {
  std::mt19937_64 rng(24);
  ParamLayout layout;
  BuildContext ctx{layout};
  RrcuConfig rc;
  rc.filters = 2;
  rc.depth = 0;
  const auto block = build_drrcu(ctx, "d", 1, rc, SeConfig{2, 1});
  ParamStore<double> params(layout);
  fill_params(params, rng);
  force_gate(block.se, params, -1000.0);
  auto x = random_tensor<double>(rng, Shape5(1, 1, 4, 4, 4));
  const auto inner = rrcu<double>(block.rrcu, params, nullptr, x);
  const auto out = drrcu<double>(block, params, nullptr, x);
  CHECK(out->shape() == Shape5(1, 2, 4, 4, 4));
  for (int64_t i = 0; i < out->numel(); ++i) CHECK((*out)[i] == std::max((*inner)[i], 0.0));
}

TEST_CASE("downsample stage degenerate cases and branch recomposition") {
  std::mt19937_64 rng(25);
  for (auto mode : {DownsampleMode::AddBranches, DownsampleMode::InceptionConcat}) {
    CAPTURE(static_cast<int>(mode));
    ParamLayout layout;
    BuildContext ctx{layout};
    const auto block = build_downsample_stage(ctx, "d", 1, DownsampleConfig{mode});
    ParamStore<double> params(layout);
    auto x = random_tensor<double>(rng, Shape5(1, 1, 4, 6, 4));

    const auto zero = downsample_stage<double>(block, params, nullptr, x);
    CHECK(zero->shape() == Shape5(1, 1, 2, 3, 2));
    for (auto v : zero->values()) CHECK(v == 0.0);

    fill_params(params, rng);
    std::vector<TensorPtr<double>> parts;
    for (const auto& b : block.branches)
      parts.push_back(ops::conv3d<double>(nullptr, x, params[b.weight], params.get(b.bias), b.spec));
    TensorPtr<double> expected;
    if (mode == DownsampleMode::AddBranches) {
      expected = ops::add<double>(nullptr, ops::add<double>(nullptr, parts[0], parts[1]), parts[2]);
    } else {
      parts.push_back(ops::maxpool3d<double>(nullptr, x, Triple{2, 2, 2}, Triple{2, 2, 2}));
      const auto cat = ops::concat_channels<double>(nullptr, parts);
      expected = ops::conv3d<double>(nullptr, cat, params[block.fuse->weight], params.get(block.fuse->bias),
                                     block.fuse->spec);
    }
    CHECK(downsample_stage<double>(block, params, nullptr, x)->values() == expected->values());
  }

  // AddBranches with a unit 1x1x1 branch and the others silenced subsamples x.
  ParamLayout layout;
  BuildContext ctx{layout};
  const auto block = build_downsample_stage(ctx, "d", 1, DownsampleConfig{DownsampleMode::AddBranches});
  ParamStore<double> params(layout);
  (*params[block.branches[0].weight])[0] = 1.0;
  auto x = random_tensor<double>(rng, Shape5(1, 1, 4, 4, 6));
  const auto y = downsample_stage<double>(block, params, nullptr, x);
  for (int64_t d = 0; d < 2; ++d)
    for (int64_t h = 0; h < 2; ++h)
      for (int64_t w = 0; w < 3; ++w) CHECK(y->at(0, 0, d, h, w) == x->at(0, 0, 2 * d, 2 * h, 2 * w));
}

TEST_CASE("upsample stage degenerate cases") {
  std::mt19937_64 rng(26);
  ParamLayout layout;
  BuildContext ctx{layout, 1};
  const auto block = build_upsample_stage(ctx, "u", 1);
  ParamStore<double> params(layout);
  auto x = random_tensor<double>(rng, Shape5(1, 1, 2, 3, 2));
  const auto zero = upsample_stage<double>(block, params, nullptr, x);
  CHECK(zero->shape() == Shape5(1, 1, 4, 6, 4));
  for (auto v : zero->values()) CHECK(v == 0.0);

  for (auto& v : params[block.up.weight]->values()) v = 1.0;
  auto single = make_tensor<double>(Shape5(1, 1, 1, 1, 1), 0.375);
  const auto block_of_v = upsample_stage<double>(block, params, nullptr, single);
  CHECK(block_of_v->shape() == Shape5(1, 1, 2, 2, 2));
  for (auto v : block_of_v->values()) CHECK(v == 0.375);

  fill_params(params, rng);
  const auto expected =
      ops::conv_transpose3d<double>(nullptr, x, params[block.up.weight], params.get(block.up.bias), block.up.spec);
  CHECK(upsample_stage<double>(block, params, nullptr, x)->values() == expected->values());
}

TEST_CASE("stem stages then head stages restore the input extents") {
  std::mt19937_64 rng(27);
  for (int stages : {1, 2, 3}) {
    ParamLayout layout;
    BuildContext ctx{layout};
    std::vector<DownsampleStage> down;
    std::vector<UpsampleStage> up;
    for (int s = 0; s < stages; ++s)
      down.push_back(build_downsample_stage(ctx, "s" + std::to_string(s), 1, DownsampleConfig{}));
    for (int s = 0; s < stages; ++s) up.push_back(build_upsample_stage(ctx, "h" + std::to_string(s), 1));
    ParamStore<double> params(layout);
    fill_params(params, rng);
    auto t = random_tensor<double>(rng, Shape5(1, 1, 8, 16, 8));
    const Shape5 shape = t->shape();
    for (const auto& d : down) t = downsample_stage<double>(d, params, nullptr, t);
    CHECK(t->shape().spatial() == Triple{8 >> stages, 16 >> stages, 8 >> stages});
    for (const auto& u : up) t = upsample_stage<double>(u, params, nullptr, t);
    CHECK(t->shape() == shape);
  }
}

TEST_CASE("zeroed output convolution yields one half everywhere") {
  auto cfg = toy_dynamic();
  Model m = Model::build(cfg, 4);
  for (const char* name : {"output.conv.weight", "output.conv.bias"})
    for (auto& v : m.params()[*m.layout().find(name)]->values()) v = 0.0f;
  std::mt19937_64 rng(5);
  auto x = random_tensor<float>(rng, Shape5(1, 1, 8, 8, 8), 0.0, 1.0);
  const auto y = m.predict(*x);
  for (auto v : y.values()) CHECK(v == 0.5f);
}

TEST_CASE("single layer parameter arithmetic") {
  ParamLayout layout;
  BuildContext ctx{layout};
  ConvSpec k3;
  k3.out_channels = 40;
  build_conv(ctx, "a", k3);
  CHECK(layout.total_elements() == 27 * 40 + 40);
  ConvSpec k1;
  k1.kernel = {1, 1, 1};
  k1.in_channels = 40;
  k1.out_channels = 80;
  build_conv(ctx, "b", k1);
  CHECK(layout.total_elements() == 1120 + 3280);
}

TEST_CASE("a different seed changes values but not shapes") {
  const auto a = Model::build(toy_default(), 1);
  const auto b = Model::build(toy_default(), 2);
  CHECK(a.count_parameters() == b.count_parameters());
  bool differs = false;
  for (size_t i = 0; i < a.params().size(); ++i) {
    CHECK(a.params()[i]->shape() == b.params()[i]->shape());
    differs = differs || a.params()[i]->values() != b.params()[i]->values();
  }
  CHECK(differs);
}

TEST_CASE("a stem-free toy maps 16 cubed to the same shape inside (0, 1)") {
  auto cfg = toy_dynamic();
  CHECK(cfg.stem_stages == 0);
  std::mt19937_64 rng(28);
  auto x = random_tensor<float>(rng, Shape5(1, 1, 16, 16, 16), 0.0, 1.0);
  const auto y = Model::build(cfg, 3).predict(*x);
  CHECK(y.shape() == x->shape());
  for (auto v : y.values()) CHECK((v > 0.0f && v < 1.0f));
}
