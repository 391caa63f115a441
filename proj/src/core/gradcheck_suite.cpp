#include "gradcheck_suite.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>

#include "gradcheck.hpp"
#include "losses.hpp"
#include "model.hpp"
#include "ops.hpp"

namespace r2u3d {

bool GradCheckReport::passed() const {
  for (const auto& r : results)
    if (!r.passed) return false;
  return true;
}

std::string GradCheckReport::to_text() const {
  std::ostringstream out;
  char buf[160];
  size_t failed = 0;
  for (const auto& r : results) {
    std::snprintf(buf, sizeof buf, "%-4s %-28s max_rel_err=%.3e\n", r.passed ? "PASS" : "FAIL", r.name.c_str(),
                  r.max_rel_error);
    out << buf;
    failed += r.passed ? 0 : 1;
  }
  std::snprintf(buf, sizeof buf, "%zu checks, %zu failed, tolerance %.1e\n", results.size(), failed, tolerance);
  out << buf;
  return out.str();
}

namespace {

using D = double;
using Ptr = TensorPtr<D>;

// Composite programs hold thousands of relu/max-pool switching points; the
// difference step is kept on the piece containing the checked point.
const GradCheckOptions kFrozen{1e-4, true};

class Fixture {
 public:
  explicit Fixture(uint64_t seed) : rng_(seed) {}

  Ptr normal(const Shape5& s, double sigma = 1.0) {
    std::normal_distribution<double> dist(0.0, sigma);
    auto t = make_tensor<D>(s);
    for (auto& v : t->values()) v = dist(rng_);
    return t;
  }

  Ptr uniform(const Shape5& s, double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    auto t = make_tensor<D>(s);
    for (auto& v : t->values()) v = dist(rng_);
    return t;
  }

  /// Values with |v| in [gap, 1], random sign; keeps kinks at 0 out of reach of the difference step.
  Ptr away_from_zero(const Shape5& s, double gap = 0.05) {
    std::uniform_real_distribution<double> mag(gap, 1.0);
    std::bernoulli_distribution sign(0.5);
    auto t = make_tensor<D>(s);
    for (auto& v : t->values()) v = sign(rng_) ? mag(rng_) : -mag(rng_);
    return t;
  }

  Ptr binary(const Shape5& s) {
    std::bernoulli_distribution bit(0.5);
    auto t = make_tensor<D>(s);
    for (auto& v : t->values()) v = bit(rng_) ? 1.0 : 0.0;
    return t;
  }

  /// He-scaled weights and small random biases for every tensor of `layout`.
  ParamStore<D> params(const ParamLayout& layout) {
    ParamStore<D> store(layout);
    for (size_t i = 0; i < layout.size(); ++i) {
      const Shape5& s = layout.shape(i);
      const bool bias = layout.path(i).ends_with(".bias");
      const double sigma = bias ? 0.1 : std::sqrt(2.0 / static_cast<double>(s.c() * s.spatial_size()));
      store[i] = normal(s, sigma);
    }
    return store;
  }

 private:
  std::mt19937_64 rng_;
};

/// sum(y * r) for a fixed random r, so every output coordinate contributes.
Ptr project(Tape<D>* tape, const Ptr& y, const Ptr& r) { return ops::sum(tape, ops::mul(tape, y, r)); }

std::vector<Ptr> with_params(std::vector<Ptr> inputs, const ParamStore<D>& params) {
  for (size_t i = 0; i < params.size(); ++i) inputs.push_back(params[i]);
  return inputs;
}

struct Check {
  std::string name;
  std::function<double(Fixture&)> run;
};

double check_unary(Fixture& fx, const Ptr& x, const std::function<Ptr(Tape<D>*, const Ptr&)>& op) {
  auto y0 = op(nullptr, x);
  auto r = fx.normal(y0->shape());
  const std::vector<Ptr> inputs{x};
  return grad_check([&](Tape<D>* t) { return project(t, op(t, x), r); }, inputs);
}

double check_conv(Fixture& fx, ConvSpec spec, const Triple& extent, bool transposed) {
  spec.in_channels = 2;
  spec.out_channels = 3;
  auto x = fx.normal(Shape5(2, spec.in_channels, extent));
  const Shape5 ws = transposed ? Shape5(spec.in_channels, spec.out_channels, spec.kernel)
                               : Shape5(spec.out_channels, spec.in_channels, spec.kernel);
  auto w = fx.normal(ws, 0.5);
  auto b = fx.normal(Shape5(spec.out_channels, 1, 1, 1, 1), 0.5);
  auto op = [&](Tape<D>* t) {
    return transposed ? ops::conv_transpose3d(t, x, w, b, spec) : ops::conv3d(t, x, w, b, spec);
  };
  auto r = fx.normal(op(nullptr)->shape());
  const std::vector<Ptr> inputs{x, w, b};
  return grad_check([&](Tape<D>* t) { return project(t, op(t), r); }, inputs);
}

ConvSpec conv_spec(const Triple& k, const Triple& stride, const Triple& dilation, Padding pad) {
  ConvSpec s;
  s.kernel = k;
  s.stride = stride;
  s.dilation = dilation;
  s.padding = pad;
  return s;
}

template <typename Block, typename Forward>
double check_block(Fixture& fx, const Block& block, const ParamLayout& layout, const Shape5& in_shape,
                   Forward&& fwd) {
  ParamStore<D> params = fx.params(layout);
  auto x = fx.normal(in_shape);
  auto r = fx.normal(fwd(block, params, nullptr, x)->shape());
  const auto inputs = with_params({x}, params);
  return grad_check([&](Tape<D>* t) { return project(t, fwd(block, params, t, x), r); }, inputs, kFrozen);
}

double check_loss(Fixture& fx, const std::function<Ptr(Tape<D>*, const Ptr&, const Ptr&)>& loss) {
  const Shape5 s(1, 1, 3, 4, 5);
  auto p = fx.uniform(s, 0.05, 0.95);
  auto g = fx.binary(s);
  const std::vector<Ptr> inputs{p};
  return grad_check([&](Tape<D>* t) { return loss(t, p, g); }, inputs);
}

std::vector<Check> build_checks() {
  std::vector<Check> checks;
  const Triple one{1, 1, 1}, two{2, 2, 2};

  checks.push_back({"conv3d.same", [=](Fixture& fx) {
                      return check_conv(fx, conv_spec({3, 3, 3}, one, one, Padding::Same), {4, 5, 4}, false);
                    }});
  checks.push_back({"conv3d.valid", [=](Fixture& fx) {
                      return check_conv(fx, conv_spec({3, 2, 3}, one, one, Padding::Valid), {5, 4, 5}, false);
                    }});
  checks.push_back({"conv3d.stride2", [=](Fixture& fx) {
                      return check_conv(fx, conv_spec({3, 3, 3}, two, one, Padding::Same), {5, 6, 4}, false);
                    }});
  checks.push_back({"conv3d.dilation2", [=](Fixture& fx) {
                      return check_conv(fx, conv_spec({3, 3, 3}, one, two, Padding::Same), {5, 5, 6}, false);
                    }});
  checks.push_back({"conv_transpose3d.k2s2", [=](Fixture& fx) {
                      return check_conv(fx, conv_spec({2, 2, 2}, two, one, Padding::Same), {2, 3, 2}, true);
                    }});
  checks.push_back({"conv_transpose3d.k3s2", [=](Fixture& fx) {
                      return check_conv(fx, conv_spec({3, 3, 3}, two, one, Padding::Same), {3, 2, 3}, true);
                    }});
  checks.push_back({"conv_transpose3d.valid", [=](Fixture& fx) {
                      return check_conv(fx, conv_spec({3, 3, 3}, one, two, Padding::Valid), {2, 3, 2}, true);
                    }});
  checks.push_back({"maxpool3d", [](Fixture& fx) {
                      // Distinct, well-separated values keep every argmax stable under the step.
                      auto x = fx.normal(Shape5(1, 2, 4, 4, 6));
                      std::vector<size_t> order(static_cast<size_t>(x->numel()));
                      std::iota(order.begin(), order.end(), size_t{0});
                      std::shuffle(order.begin(), order.end(), std::mt19937_64(x->numel()));
                      for (size_t i = 0; i < order.size(); ++i) (*x)[static_cast<int64_t>(order[i])] = 0.1 * i;
                      return check_unary(fx, x, [](Tape<D>* t, const Ptr& v) {
                        return ops::maxpool3d(t, v, Triple{2, 2, 2}, Triple{2, 2, 2});
                      });
                    }});
  checks.push_back({"global_avg_pool", [](Fixture& fx) {
                      return check_unary(fx, fx.normal(Shape5(2, 3, 2, 3, 2)),
                                         [](Tape<D>* t, const Ptr& v) { return ops::global_avg_pool(t, v); });
                    }});
  checks.push_back({"dense", [](Fixture& fx) {
                      auto x = fx.normal(Shape5(2, 4, 1, 1, 1));
                      auto w = fx.normal(Shape5(3, 4, 1, 1, 1));
                      auto b = fx.normal(Shape5(3, 1, 1, 1, 1));
                      auto r = fx.normal(Shape5(2, 3, 1, 1, 1));
                      const std::vector<Ptr> inputs{x, w, b};
                      return grad_check([&](Tape<D>* t) { return project(t, ops::dense(t, x, w, b), r); }, inputs);
                    }});
  checks.push_back({"add", [](Fixture& fx) {
                      auto x = fx.normal(Shape5(1, 2, 2, 3, 2));
                      auto y = fx.normal(x->shape());
                      auto r = fx.normal(x->shape());
                      const std::vector<Ptr> inputs{x, y};
                      return grad_check([&](Tape<D>* t) { return project(t, ops::add(t, x, y), r); }, inputs);
                    }});
  checks.push_back({"mul", [](Fixture& fx) {
                      auto x = fx.normal(Shape5(1, 2, 2, 3, 2));
                      auto y = fx.normal(x->shape());
                      auto r = fx.normal(x->shape());
                      const std::vector<Ptr> inputs{x, y};
                      return grad_check([&](Tape<D>* t) { return project(t, ops::mul(t, x, y), r); }, inputs);
                    }});
  checks.push_back({"relu", [](Fixture& fx) {
                      return check_unary(fx, fx.away_from_zero(Shape5(1, 2, 3, 3, 3)),
                                         [](Tape<D>* t, const Ptr& v) { return ops::relu(t, v); });
                    }});
  checks.push_back({"sigmoid", [](Fixture& fx) {
                      return check_unary(fx, fx.normal(Shape5(1, 2, 3, 3, 3), 3.0),
                                         [](Tape<D>* t, const Ptr& v) { return ops::sigmoid(t, v); });
                    }});
  checks.push_back({"scale_channels", [](Fixture& fx) {
                      auto x = fx.normal(Shape5(2, 3, 2, 2, 3));
                      auto s = fx.normal(Shape5(2, 3, 1, 1, 1));
                      auto r = fx.normal(x->shape());
                      const std::vector<Ptr> inputs{x, s};
                      return grad_check([&](Tape<D>* t) { return project(t, ops::scale_channels(t, x, s), r); },
                                        inputs);
                    }});
  checks.push_back({"concat_channels", [](Fixture& fx) {
                      auto a = fx.normal(Shape5(2, 1, 2, 2, 3));
                      auto b = fx.normal(Shape5(2, 3, 2, 2, 3));
                      auto r = fx.normal(Shape5(2, 4, 2, 2, 3));
                      const std::vector<Ptr> inputs{a, b};
                      return grad_check(
                          [&](Tape<D>* t) {
                            const std::vector<Ptr> parts{a, b};
                            return project(t, ops::concat_channels<D>(t, parts), r);
                          },
                          inputs);
                    }});
  checks.push_back({"sum", [](Fixture& fx) {
                      auto x = fx.normal(Shape5(1, 2, 2, 2, 2));
                      const std::vector<Ptr> inputs{x};
                      return grad_check([&](Tape<D>* t) { return ops::sum(t, x); }, inputs);
                    }});
  checks.push_back({"log", [](Fixture& fx) {
                      return check_unary(fx, fx.uniform(Shape5(1, 1, 2, 3, 4), 0.2, 3.0),
                                         [](Tape<D>* t, const Ptr& v) { return ops::log(t, v); });
                    }});
  checks.push_back({"pow", [](Fixture& fx) {
                      return check_unary(fx, fx.uniform(Shape5(1, 1, 2, 3, 4), 0.2, 3.0),
                                         [](Tape<D>* t, const Ptr& v) { return ops::pow(t, v, 0.3); });
                    }});
  checks.push_back({"clamp_min", [](Fixture& fx) {
                      return check_unary(fx, fx.away_from_zero(Shape5(1, 1, 2, 3, 4)),
                                         [](Tape<D>* t, const Ptr& v) { return ops::clamp_min(t, v, 0.0); });
                    }});
  checks.push_back({"affine", [](Fixture& fx) {
                      return check_unary(fx, fx.normal(Shape5(1, 1, 2, 3, 4)),
                                         [](Tape<D>* t, const Ptr& v) { return ops::affine(t, v, -1.7, 0.4); });
                    }});

  checks.push_back({"block.recurrent_conv", [](Fixture& fx) {
                      ParamLayout layout;
                      BuildContext ctx{layout, 0};
                      auto layer = build_recurrent_conv_layer(ctx, "rcl", 2, 2, Triple{1, 1, 1});
                      return check_block(fx, layer, layout, Shape5(1, 2, 4, 4, 4), [](auto& b, auto& p, Tape<D>* t,
                                                                                       auto& x) {
                        return recurrent_conv_layer<D>(b, p, t, x);
                      });
                    }});
  checks.push_back({"block.rrcu", [](Fixture& fx) {
                      ParamLayout layout;
                      BuildContext ctx{layout, 0};
                      RrcuConfig rc;
                      rc.filters = 3;
                      rc.depth = 2;
                      rc.dilation = {2, 2, 2};
                      auto block = build_rrcu(ctx, "rrcu", 2, rc);
                      return check_block(fx, block, layout, Shape5(1, 2, 4, 4, 4),
                                         [](auto& b, auto& p, Tape<D>* t, auto& x) { return rrcu<D>(b, p, t, x); });
                    }});
  checks.push_back({"block.se_residual", [](Fixture& fx) {
                      ParamLayout layout;
                      BuildContext ctx{layout, 0};
                      auto block = build_se_residual(ctx, "se", SeConfig{8, 4});
                      return check_block(fx, block, layout, Shape5(2, 8, 2, 3, 2), [](auto& b, auto& p, Tape<D>* t,
                                                                                       auto& x) {
                        return se_residual<D>(b, p, t, x);
                      });
                    }});
  checks.push_back({"block.drrcu", [](Fixture& fx) {
                      ParamLayout layout;
                      BuildContext ctx{layout, 0};
                      RrcuConfig rc;
                      rc.filters = 2;
                      rc.depth = 1;
                      auto block = build_drrcu(ctx, "drrcu", 1, rc, SeConfig{2, 16});
                      return check_block(fx, block, layout, Shape5(1, 1, 4, 4, 4),
                                         [](auto& b, auto& p, Tape<D>* t, auto& x) { return drrcu<D>(b, p, t, x); });
                    }});
  checks.push_back({"block.downsample_add", [](Fixture& fx) {
                      ParamLayout layout;
                      BuildContext ctx{layout, 0};
                      DownsampleConfig dc;
                      dc.mode = DownsampleMode::AddBranches;
                      auto block = build_downsample_stage(ctx, "down", 1, dc);
                      return check_block(fx, block, layout, Shape5(1, 1, 4, 6, 4), [](auto& b, auto& p, Tape<D>* t,
                                                                                       auto& x) {
                        return downsample_stage<D>(b, p, t, x);
                      });
                    }});
  checks.push_back({"block.downsample_concat", [](Fixture& fx) {
                      ParamLayout layout;
                      BuildContext ctx{layout, 0};
                      DownsampleConfig dc;
                      dc.mode = DownsampleMode::InceptionConcat;
                      auto block = build_downsample_stage(ctx, "down", 1, dc);
                      return check_block(fx, block, layout, Shape5(1, 1, 4, 6, 4), [](auto& b, auto& p, Tape<D>* t,
                                                                                       auto& x) {
                        return downsample_stage<D>(b, p, t, x);
                      });
                    }});
  checks.push_back({"block.upsample", [](Fixture& fx) {
                      ParamLayout layout;
                      BuildContext ctx{layout, 1};
                      auto block = build_upsample_stage(ctx, "up", 3);
                      return check_block(fx, block, layout, Shape5(1, 3, 2, 3, 2), [](auto& b, auto& p, Tape<D>* t,
                                                                                       auto& x) {
                        return upsample_stage<D>(b, p, t, x);
                      });
                    }});

  checks.push_back({"loss.soft_dsc", [](Fixture& fx) {
                      return check_loss(fx, [](Tape<D>* t, const Ptr& p, const Ptr& g) {
                        return loss::soft_dsc(t, p, g);
                      });
                    }});
  checks.push_back({"loss.dice", [](Fixture& fx) {
                      return check_loss(fx, [](Tape<D>* t, const Ptr& p, const Ptr& g) {
                        return loss::dice_loss(t, p, g);
                      });
                    }});
  checks.push_back({"loss.wcel", [](Fixture& fx) {
                      return check_loss(fx, [](Tape<D>* t, const Ptr& p, const Ptr& g) {
                        return loss::wcel(t, p, g, 2.5);
                      });
                    }});
  checks.push_back({"loss.ell", [](Fixture& fx) {
                      return check_loss(fx, [](Tape<D>* t, const Ptr& p, const Ptr& g) {
                        return loss::ell(t, p, g, EllConfig{});
                      });
                    }});

  checks.push_back({"model.toy_end_to_end", [](Fixture& fx) {
                      ModelConfig cfg = ModelConfig::preset_dynamic();
                      cfg.filters = {2, 3, 4, 5};
                      cfg.stem_stages = 1;
                      const Topology topo = Topology::build(cfg);
                      ParamStore<D> params = fx.params(topo.layout);
                      auto x = fx.normal(Shape5(1, 1, 16, 16, 16));
                      auto g = fx.binary(x->shape());
                      const auto inputs = with_params({}, params);
                      return grad_check(
                          [&](Tape<D>* t) { return loss::dice_loss(t, forward<D>(topo, params, t, x), g); }, inputs,
                          kFrozen);
                    }});
  return checks;
}

}  // namespace

std::vector<std::string> faultable_ops() {
  return {"conv3d", "conv_transpose3d", "maxpool3d", "global_avg_pool", "dense",    "add",
          "mul",    "relu",             "sigmoid",   "scale_channels",  "concat_channels", "sum",
          "log",    "pow",              "clamp_min", "affine",          "soft_dsc", "wcel"};
}

std::vector<std::string> gradcheck_names() {
  std::vector<std::string> names;
  for (const auto& c : build_checks()) names.push_back(c.name);
  return names;
}

GradCheckReport run_gradcheck_suite(uint64_t seed, double tolerance, const std::string& only) {
  GradCheckReport report;
  report.tolerance = tolerance;
  bool matched = only.empty();
  for (const auto& check : build_checks()) {
    if (!only.empty() && check.name != only) continue;
    matched = true;
    Fixture fx(seed);
    const double err = check.run(fx);
    report.results.push_back({check.name, err, err < tolerance});
  }
  require(matched, ErrorCode::InvalidArgument, "unknown gradient check '" + only + "'");
  return report;
}

}  // namespace r2u3d
