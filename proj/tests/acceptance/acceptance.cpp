// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.
//
//   r2u3d_acceptance <scratch dir> <r2u3d cli binary>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include "../common/oracles.hpp"
#include "execution.hpp"
#include "gradcheck_suite.hpp"
#include "losses.hpp"
#include "phantom.hpp"
#include "preprocess.hpp"
#include "trainer.hpp"

using namespace r2u3d;
namespace fs = std::filesystem;

namespace {

fs::path g_work;
std::string g_cli;

struct Outcome {
  bool pass = true;
  std::string detail;

  void expect(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

/// Runs the CLI with stdout captured to `out`; returns the exit status.
int run_cli(const std::string& args, const fs::path& out) {
  const std::string cmd = "\"" + g_cli + "\" " + args + " > \"" + out.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string line_value(const std::string& text, const std::string& prefix) {
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);)
    if (line.rfind(prefix, 0) == 0) return line.substr(prefix.size());
  return {};
}

// ---- criteria ---------------------------------------------------------------

Outcome gradient_fidelity() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const auto report = run_gradcheck_suite(1, 1e-3);
  const double secs = seconds_since(t0);
  double worst = 0;
  std::set<std::string> names;
  for (const auto& r : report.results) {
    worst = std::max(worst, r.max_rel_error);
    names.insert(r.name);
    o.expect(r.passed, r.name + " max_rel_err " + fmt("%.3e", r.max_rel_error));
  }
  for (const char* required :
       {"conv3d.same", "conv_transpose3d.k2s2", "maxpool3d", "global_avg_pool", "dense", "relu", "sigmoid",
        "block.rrcu", "block.se_residual", "block.drrcu", "block.downsample_add", "block.downsample_concat",
        "loss.dice", "loss.ell", "model.toy_end_to_end"})
    o.expect(names.count(required) == 1, std::string("missing check ") + required);
  o.expect(secs < 300, "runtime " + fmt("%.1f", secs) + " s");
  o.detail = std::to_string(report.results.size()) + " checks, worst " + fmt("%.2e", worst) + ", " +
             fmt("%.1f", secs) + " s" + (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

Outcome conv_oracle() {
  Outcome o;
  std::mt19937_64 rng(2024);
  auto fill = [&](const Shape5& s) {
    std::uniform_real_distribution<float> u(-1.f, 1.f);
    auto t = make_tensor<float>(s);
    for (auto& v : t->values()) v = u(rng);
    return t;
  };
  int cases = 0;
  double worst = 0;
  for (auto algo : {ConvAlgorithm::Im2col, ConvAlgorithm::Direct}) {
    set_conv_algorithm(algo);
    for (int i = 0; i < 64; ++i) {
      const auto c = oracle::random_conv_case(rng, i);
      auto x = fill(c.input);
      auto w = fill(Shape5(c.spec.out_channels, c.spec.in_channels, c.spec.kernel));
      auto b = c.spec.has_bias ? fill(Shape5(c.spec.out_channels, 1, 1, 1, 1)) : nullptr;
      const double e = oracle::max_abs_diff(*ops::conv3d<float>(nullptr, x, w, b, c.spec),
                                            oracle::conv3d(*x, *w, b.get(), c.spec));
      worst = std::max(worst, e);
      ++cases;

      auto tc = c;
      tc.input = Shape5(c.input.n(), c.spec.in_channels, 2 + i % 3, 3, 2 + i % 2);
      auto tx = fill(tc.input);
      auto tw = fill(Shape5(c.spec.in_channels, c.spec.out_channels, c.spec.kernel));
      auto tb = c.spec.has_bias ? fill(Shape5(c.spec.out_channels, 1, 1, 1, 1)) : nullptr;
      const Triple out = conv_transpose_output_extent(tc.input.spatial(), c.spec);
      const double te = oracle::max_abs_diff(*ops::conv_transpose3d<float>(nullptr, tx, tw, tb, c.spec),
                                             oracle::conv_transpose3d(*tx, *tw, tb.get(), c.spec, out));
      worst = std::max(worst, te);
      ++cases;
    }
  }
  set_conv_algorithm(ConvAlgorithm::Im2col);
  o.expect(worst < 1e-5, "max abs diff " + fmt("%.3e", worst));
  o.expect(cases >= 100, "only " + std::to_string(cases) + " cases");
  o.detail = std::to_string(cases) + " cases, max abs diff " + fmt("%.2e", worst) +
             (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

Outcome loss_constants() {
  Outcome o;
  auto vec = [](std::vector<double> v) {
    const auto n = static_cast<int64_t>(v.size());
    return make_tensor<double>(Shape5(1, 1, 1, 1, n), std::move(v));
  };
  const double sd = (*loss::soft_dsc<double>(nullptr, vec({0.5, 0.5}), vec({1, 0})))[0];
  o.expect(std::abs(sd - 0.6667) <= 1e-4, "soft_dsc " + fmt("%.6f", sd));

  const double w = (*loss::wcel<double>(nullptr, vec({0.5, 0.5, 0.5, 0.5}), vec({1, 0, 1, 0})))[0];
  o.expect(std::abs(w - std::log(2.0)) <= 1e-6, "wcel " + fmt("%.9f", w));

  std::vector<double> half(128, 0.5), g(128, 0.0);
  for (int i = 0; i < 64; ++i) g[static_cast<size_t>(i)] = 1.0;
  EllConfig cfg;  // w = (0.8, 0.2), gamma = 0.3
  const double oracle_value = 0.8 * std::pow(-std::log(2.0 / 3.0), 0.3) + 0.2 * std::pow(std::log(2.0), 0.3);
  const double ell = (*loss::ell<double>(nullptr, vec(half), vec(g), cfg))[0];
  o.expect(std::abs(ell - oracle_value) <= 1e-4, "ell " + fmt("%.6f", ell) + " vs " + fmt("%.6f", oracle_value));

  const double perfect = (*loss::ell<double>(nullptr, vec(g), vec(g), cfg))[0];
  o.expect(perfect < 1e-2, "perfect ell " + fmt("%.4e", perfect));
  o.detail = "soft_dsc " + fmt("%.4f", sd) + ", wcel " + fmt("%.6f", w) + ", ell " + fmt("%.5f", ell) +
             " (oracle " + fmt("%.5f", oracle_value) + "), perfect ell " + fmt("%.2e", perfect) +
             (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

Outcome shape_law() {
  Outcome o;
  const Model m = Model::build(ModelConfig::preset("default"), 1);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  Tensor<float> x(Shape5(1, 1, 64, 64, 64));
  for (auto& v : x.values()) v = u(rng);
  const auto y = m.predict(x);
  o.expect(y.shape() == x.shape(), "output shape " + y.shape().str());
  bool inside = true;
  for (auto v : y.values()) inside = inside && v > 0.0f && v < 1.0f;
  o.expect(inside, "output outside (0, 1)");
  try {
    (void)m.predict(Tensor<float>(Shape5(1, 1, 64, 64, 60)));
    o.expect(false, "64x64x60 accepted");
  } catch (const Error& e) {
    o.expect(e.code() == ErrorCode::ShapeMismatch && std::string(e.what()).find("multiples of 64") != std::string::npos,
             std::string("unexpected error: ") + e.what());
  }
  o.detail = "[1,1,64,64,64] -> " + y.shape().str() + ", 64x64x60 rejected" + (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

Outcome parameter_audit() {
  Outcome o;
  auto toy_dynamic = ModelConfig::preset("dynamic");
  toy_dynamic.filters = {2, 2, 2, 2};
  toy_dynamic.depths = {1, 1, 1, 1};
  toy_dynamic.stem_stages = 0;
  toy_dynamic.se_reduction = 1;
  auto toy_default = ModelConfig::preset("default");
  toy_default.filters = {2, 3, 4, 5};
  toy_default.depths = {1, 1, 1, 1};
  toy_default.stem_stages = 1;
  // Hand audits, layer by layer (see the unit tests for the breakdown).
  o.expect(Model::build(toy_dynamic, 1).count_parameters() == 1817, "toy dynamic count");
  o.expect(Model::build(toy_default, 1).count_parameters() == 5213, "toy default count");

  std::string summary;
  for (const auto& [preset, reference] : {std::pair{"default", "20306691"}, std::pair{"dynamic", "12953330"}}) {
    const fs::path a = g_work / (std::string("summary_") + preset + "_1.txt");
    const fs::path b = g_work / (std::string("summary_") + preset + "_2.txt");
    o.expect(run_cli(std::string("summarize --preset ") + preset, a) == 0, std::string("summarize ") + preset);
    o.expect(run_cli(std::string("summarize --preset ") + preset, b) == 0, std::string("summarize ") + preset);
    const std::string ta = slurp(a), tb = slurp(b);
    o.expect(ta == tb, std::string(preset) + " summary differs between runs");
    const std::string total = line_value(ta, "total parameters: ");
    o.expect(!total.empty() && total == line_value(ta, "row sum: "), std::string(preset) + " row sum != total");
    o.expect(line_value(ta, "reference total: ") == reference, std::string(preset) + " reference missing");
    const std::string delta = line_value(ta, "delta vs reference: ");
    o.expect(!delta.empty() && (delta[0] == '+' || delta[0] == '-'), std::string(preset) + " delta unsigned");
    summary += std::string(summary.empty() ? "" : ", ") + preset + " " + total + " (" + delta + " vs " + reference + ")";
  }
  o.detail = "toys 1817/5213 exact; " + summary + (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

Outcome weight_sharing() {
  Outcome o;
  auto d1 = ModelConfig::preset("dynamic");
  auto d4 = d1;
  d1.depths = {1, 1, 1, 1};
  d4.depths = {4, 4, 4, 4};
  const int64_t a = Model::build(d1, 1).count_parameters();
  const int64_t b = Model::build(d4, 1).count_parameters();
  o.expect(a == b, "counts differ");
  o.detail = "depth 1: " + std::to_string(a) + ", depth 4: " + std::to_string(b) + (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

Outcome training_audit() {
  Outcome o;
  auto mc = ModelConfig::preset("dynamic");
  mc.filters = {2, 2, 2, 2};
  mc.depths = {0, 1, 1, 1};
  mc.stem_stages = 0;
  mc.se_reduction = 1;
  Model model = Model::build(mc, 3);
  PhantomOptions po;
  po.count = 10;
  po.dims = {8, 8, 8};
  std::vector<Scan> pool;
  const auto phantoms = generate_phantoms(po, 21);
  for (size_t i = 0; i < phantoms.size(); ++i) pool.push_back(make_scan("p" + std::to_string(i), phantoms[i]));

  TrainConfig cfg;
  cfg.sample_size = 5;
  cfg.epochs_per_iteration = 5;
  cfg.iterations = 5;
  cfg.schedule.segments = {{4, 1e-3}, {1, 1e-4}};
  cfg.seed = 5;
  const auto log = train(model, pool, cfg);
  o.expect(log.total_steps() == 125, "steps " + std::to_string(log.total_steps()));
  const double rates[] = {1e-3, 1e-3, 1e-3, 1e-3, 1e-4};
  o.expect(log.records.size() == 5, "records " + std::to_string(log.records.size()));
  std::string lrs;
  for (size_t i = 0; i < log.records.size() && i < 5; ++i) {
    const auto& r = log.records[i];
    o.expect(r.lr == rates[i], "lr at " + std::to_string(i));
    o.expect(r.steps == 25, "steps at " + std::to_string(i));
    o.expect(std::set<std::string>(r.samples.begin(), r.samples.end()).size() == 5 && r.samples.size() == 5,
             "duplicate sample at " + std::to_string(i));
    lrs += (i ? "," : "") + fmt("%g", r.lr);
  }
  o.detail = std::to_string(log.total_steps()) + " steps, lr [" + lrs + "], samples distinct per iteration" +
             (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

Outcome overfit_smoke_check() {
  Outcome o;
  set_deterministic(true);
  const auto r = overfit_smoke(SmokeOptions{});
  o.expect(r.baseline_soft_dsc < 0.9, "baseline " + fmt("%.4f", r.baseline_soft_dsc));
  o.expect(r.final_soft_dsc >= 0.95, "final " + fmt("%.4f", r.final_soft_dsc));
  o.expect(r.seconds < 600, "took " + fmt("%.1f", r.seconds) + " s");
  o.detail = "baseline " + fmt("%.4f", r.baseline_soft_dsc) + " -> " + fmt("%.4f", r.final_soft_dsc) + " in " +
             std::to_string(r.steps) + " steps, " + fmt("%.1f", r.seconds) + " s" +
             (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

Outcome preprocessing() {
  Outcome o;
  o.expect(depth_index_map(3, 6) == std::vector<int64_t>{0, 0, 1, 1, 2, 2}, "3->6 map");
  const auto down = depth_index_map(512, 256);
  bool odd = down.size() == 256;
  for (size_t i = 0; odd && i < down.size(); ++i) odd = down[i] == static_cast<int64_t>(2 * i + 1);
  o.expect(odd, "512->256 map is not the odd indices");

  std::mt19937_64 rng(12);
  std::uniform_real_distribution<float> u(-2000.f, 3000.f);
  for (int k = 0; k < 5; ++k) {
    Volume v({3 + k, 4, 5});
    for (auto& x : v.voxels) x = u(rng);
    const Volume n = normalize(v);
    const auto [lo, hi] = std::minmax_element(n.voxels.begin(), n.voxels.end());
    o.expect(*lo == 0.0f && *hi == 1.0f, "normalize range");
  }

  const fs::path data = R2U3D_TEST_DATA_DIR;
  const Volume v = read_metaimage(data / "fixture_short.mhd");
  std::ifstream expected_in(data / "fixture_short_voxels.txt");
  std::vector<float> expected;
  for (std::string line; std::getline(expected_in, line);)
    if (!line.empty()) expected.push_back(std::strtof(line.c_str(), nullptr));
  o.expect(v.voxels == expected, "MetaImage voxels differ from the fixture listing");
  write_volume(v, g_work / "fixture.vol");
  const Volume back = read_volume(g_work / "fixture.vol");
  o.expect(back.dims == v.dims && back.spacing == v.spacing && back.voxels.size() == v.voxels.size() &&
               std::memcmp(back.voxels.data(), v.voxels.data(), v.voxels.size() * sizeof(float)) == 0,
           "internal round trip not bit-exact");
  o.detail = "maps ok, normalize 0/1, MetaImage fixture " + std::to_string(v.voxels.size()) +
             " voxels round-trip bit-exact" + (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

Outcome determinism() {
  Outcome o;
  const fs::path dir = g_work / "determinism";
  fs::remove_all(dir);
  fs::create_directories(dir / "out");
  o.expect(run_cli("phantoms --out \"" + (dir / "data").string() + "\" --count 4 --dims 16 32 32 --seed 9",
                   dir / "phantoms.txt") == 0,
           "phantoms");
  std::ofstream(dir / "run.json") << R"({
  "model": {"preset": "dynamic", "filters": [4, 6, 8, 10], "depths": [1, 2, 2, 2], "stem_stages": 1, "se_reduction": 2},
  "train": {"sample_size": 3, "epochs_per_iteration": 2, "iterations": 3, "schedule": [[2, 0.001], [1, 0.0001]]},
  "data": {"root": "data", "train": ["phantom00", "phantom01", "phantom02", "phantom03"]},
  "seed": 42, "deterministic": true
})";
  std::string logs[2], ckpts[2];
  for (int run = 0; run < 2; ++run) {
    const fs::path log = dir / "out" / ("train" + std::to_string(run) + ".jsonl");
    const fs::path ckpt = dir / "out" / ("model" + std::to_string(run) + ".ckpt");
    const std::string args = "train --config \"" + (dir / "run.json").string() + "\" --deterministic --no-timestamps" +
                             " --out \"" + log.string() + "\" --checkpoint \"" + ckpt.string() + "\"";
    o.expect(run_cli(args, dir / ("train" + std::to_string(run) + ".txt")) == 0, "train run " + std::to_string(run));
    logs[run] = slurp(log);
    ckpts[run] = slurp(ckpt);
  }
  o.expect(!logs[0].empty() && logs[0] == logs[1], "TrainLogs differ");
  o.expect(!ckpts[0].empty() && ckpts[0] == ckpts[1], "checkpoints differ");
  o.detail = "TrainLog " + std::to_string(logs[0].size()) + " bytes and checkpoint " + std::to_string(ckpts[0].size()) +
             " bytes identical across runs" + (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 3) {
    std::fprintf(stderr, "usage: %s <scratch dir> <r2u3d cli>\n", argv[0]);
    return 2;
  }
  g_work = argv[1];
  g_cli = argv[2];
  fs::create_directories(g_work);
  set_deterministic(true);

  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"gradient fidelity", gradient_fidelity},
      {"convolution oracle equivalence", conv_oracle},
      {"loss constants", loss_constants},
      {"architecture shape law", shape_law},
      {"parameter-count audit", parameter_audit},
      {"recurrence weight sharing", weight_sharing},
      {"training strategy audit", training_audit},
      {"overfit smoke", overfit_smoke_check},
      {"preprocessing fidelity", preprocessing},
      {"determinism", determinism},
  };
  int failed = 0;
  int index = 1;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("threw: ") + e.what();
    }
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", index, name, o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
    ++index;
  }
  std::printf("%d/10 criteria passed\n", 10 - failed);
  return failed == 0 ? 0 : 1;
}
