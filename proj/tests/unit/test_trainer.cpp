#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "doctest.h"
#include "json.hpp"
#include "phantom.hpp"
#include "trainer.hpp"

using namespace r2u3d;

namespace {

ModelConfig tiny_model() {
  auto c = ModelConfig::preset("dynamic");
  c.filters = {2, 2, 2, 2};
  c.depths = {0, 1, 1, 1};
  c.stem_stages = 0;
  c.se_reduction = 1;
  return c;
}

std::vector<Scan> tiny_pool(int count, uint64_t seed = 1) {
  PhantomOptions opts;
  opts.count = count;
  opts.dims = {8, 8, 8};
  std::vector<Scan> pool;
  const auto phantoms = generate_phantoms(opts, seed);
  for (size_t i = 0; i < phantoms.size(); ++i) pool.push_back(make_scan("s" + std::to_string(i), phantoms[i]));
  return pool;
}

TrainConfig scaled_config() {
  TrainConfig cfg;
  cfg.sample_size = 5;
  cfg.epochs_per_iteration = 5;
  cfg.iterations = 5;
  cfg.schedule.segments = {{4, 1e-3}, {1, 1e-4}};
  cfg.seed = 17;
  return cfg;
}

}  // namespace

TEST_CASE("scaled training run: 125 steps, samples without replacement, scheduled rates") {
  auto model = Model::build(tiny_model(), 2);
  const auto pool = tiny_pool(10);
  std::vector<int64_t> seen_iterations;
  TrainHooks hooks;
  hooks.on_iteration = [&](const IterationRecord& r) { seen_iterations.push_back(r.iteration); };
  const auto log = train(model, pool, scaled_config(), hooks);

  CHECK(log.total_steps() == 125);
  REQUIRE(log.records.size() == 5);
  CHECK(seen_iterations == std::vector<int64_t>{0, 1, 2, 3, 4});
  const double rates[] = {1e-3, 1e-3, 1e-3, 1e-3, 1e-4};
  for (size_t i = 0; i < 5; ++i) {
    const auto& r = log.records[i];
    CHECK(r.steps == 25);
    CHECK(r.lr == rates[i]);
    CHECK(std::isfinite(r.mean_loss));
    REQUIRE(r.samples.size() == 5);
    CHECK(std::set<std::string>(r.samples.begin(), r.samples.end()).size() == 5);
  }
}

TEST_CASE("training is reproducible per seed and changes with it") {
  const auto pool = tiny_pool(4);
  auto cfg = scaled_config();
  cfg.sample_size = 2;
  cfg.epochs_per_iteration = 1;
  cfg.iterations = 3;
  auto a = Model::build(tiny_model(), 3);
  auto b = Model::build(tiny_model(), 3);
  const auto la = train(a, pool, cfg);
  const auto lb = train(b, pool, cfg);
  CHECK(la.to_jsonl(false) == lb.to_jsonl(false));
  for (size_t i = 0; i < a.params().size(); ++i) CHECK(a.params()[i]->values() == b.params()[i]->values());

  cfg.seed += 1;
  auto c = Model::build(tiny_model(), 3);
  CHECK(train(c, pool, cfg).to_jsonl(false) != la.to_jsonl(false));
}

TEST_CASE("TrainLog lines carry the documented keys") {
  TrainLog log;
  log.records.push_back({0, {"a", "b"}, 1e-3, 0.5, 10, 1.25});
  const auto with = log.to_jsonl(true);
  const auto without = log.to_jsonl(false);
  CHECK(without == "{\"iteration\":0,\"samples\":[\"a\",\"b\"],\"lr\":0.001,\"mean_loss\":0.5,\"steps\":10}\n");
  const auto j = nlohmann::json::parse(with);
  CHECK(j["wall_time"].get<double>() == 1.25);
}

TEST_CASE("train validates its configuration") {
  auto model = Model::build(tiny_model(), 1);
  const auto pool = tiny_pool(3);
  auto cfg = scaled_config();
  CHECK_THROWS_AS(train(model, pool, cfg), Error);  // sample_size 5 > pool 3
  cfg.sample_size = 2;
  cfg.batch_size = 2;
  CHECK_THROWS_AS(train(model, pool, cfg), Error);
  cfg.batch_size = 1;
  cfg.epochs_per_iteration = 0;
  CHECK_THROWS_AS(train(model, pool, cfg), Error);
}

TEST_CASE("checkpoint hook fires every N iterations") {
  auto model = Model::build(tiny_model(), 1);
  const auto pool = tiny_pool(2);
  auto cfg = scaled_config();
  cfg.sample_size = 1;
  cfg.epochs_per_iteration = 1;
  cfg.iterations = 7;
  cfg.checkpoint_every = 3;
  std::vector<int64_t> fired;
  TrainHooks hooks;
  hooks.on_checkpoint = [&](int64_t index, const Model&) { fired.push_back(index); };
  train(model, pool, cfg, hooks);
  CHECK(fired == std::vector<int64_t>{2, 5});
}

TEST_CASE("a non-finite loss aborts with the iteration number") {
  auto model = Model::build(tiny_model(), 1);
  auto pool = tiny_pool(2);
  // Poison a parameter so the forward pass produces NaN.
  model.params()[0]->values()[0] = std::numeric_limits<float>::quiet_NaN();
  auto cfg = scaled_config();
  cfg.sample_size = 1;
  cfg.iterations = 1;
  try {
    train(model, pool, cfg);
    FAIL("expected a NonFinite error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFinite);
    CHECK(std::string(e.what()).find("iteration 0") != std::string::npos);
  }
}

TEST_CASE("train_step lowers the loss on a single scan") {
  auto model = Model::build(tiny_model(), 4);
  const auto pool = tiny_pool(1);
  AdamState state(model.params());
  const double first = train_step(model, state, pool[0], 1e-2, LossKind::Dice, {});
  double last = first;
  for (int i = 0; i < 30; ++i) last = train_step(model, state, pool[0], 1e-2, LossKind::Dice, {});
  CHECK(last < first);
  CHECK(state.t == 31);
}

TEST_CASE("evaluate with an oracle stub reports perfect scores") {
  const auto pool = tiny_pool(2);
  const Predictor oracle = [&](const Tensor<float>& x) {
    for (const auto& s : pool)
      if (s.image.get() == &x) return *s.mask;
    FAIL("unknown scan");
    return x;
  };
  const auto report = evaluate(oracle, pool);
  REQUIRE(report.rows.size() == 2);
  for (const auto& r : report.rows) {
    CHECK(r.soft_dsc == doctest::Approx(1.0));
    CHECK(r.dsc == doctest::Approx(1.0));
  }
  CHECK(report.mean_dsc == doctest::Approx(1.0));
  const auto jsonl = report.to_jsonl();
  CHECK(std::count(jsonl.begin(), jsonl.end(), '\n') == 3);
  CHECK(jsonl.find("\"scan\":\"mean\",\"count\":2") != std::string::npos);
  CHECK(report.to_table().find("1.0000") != std::string::npos);

  const auto empty = evaluate(oracle, {});
  CHECK(empty.rows.empty());
  CHECK(empty.to_jsonl().find("null") != std::string::npos);
}

TEST_CASE("evaluate scores a constant half prediction as two thirds soft dice against itself thresholded") {
  auto pool = tiny_pool(1);
  const Predictor half = [](const Tensor<float>& x) { return Tensor<float>(x.shape(), 0.5f); };
  const auto report = evaluate(half, pool);
  // Every voxel thresholds to foreground: hard dice = 2|G| / (N + |G|).
  double fg = 0;
  for (auto v : pool[0].mask->values()) fg += v;
  const double n = static_cast<double>(pool[0].mask->numel());
  CHECK(report.rows[0].dsc == doctest::Approx(2 * fg / (n + fg)).epsilon(1e-6));
  CHECK(report.rows[0].soft_dsc == doctest::Approx(fg / (0.25 * n + fg)).epsilon(1e-6));
}

TEST_CASE("single-scan dice training descends in at least 45 of 50 steps at lr 1e-3") {
  auto model = Model::build(tiny_model(), 6);
  const auto pool = tiny_pool(1, 3);
  AdamState state(model.params());
  // train_step reports the loss before its update, so 51 calls cover 50 steps.
  std::vector<double> losses;
  for (int i = 0; i <= 50; ++i) losses.push_back(train_step(model, state, pool[0], 1e-3, LossKind::Dice, {}));
  int descending = 0;
  for (size_t i = 1; i < losses.size(); ++i) descending += losses[i] <= losses[i - 1];
  CAPTURE(descending);
  CHECK(descending >= 45);
}

TEST_CASE("two iterations over a single scan take exactly 2 * epochs steps") {
  auto model = Model::build(tiny_model(), 7);
  const auto pool = tiny_pool(1);
  auto cfg = scaled_config();
  cfg.sample_size = 1;
  cfg.iterations = 2;
  cfg.epochs_per_iteration = 3;
  const auto log = train(model, pool, cfg);
  CHECK(log.total_steps() == 6);
  for (const auto& r : log.records) CHECK(std::isfinite(r.mean_loss));
}

TEST_CASE("zero smoke iterations leave the untrained baseline") {
  SmokeOptions opts;
  opts.iterations = 0;
  const auto r = overfit_smoke(opts);
  CHECK(r.steps == 0);
  CHECK(r.final_soft_dsc == r.baseline_soft_dsc);
  CHECK(r.baseline_soft_dsc < 0.9);
}
