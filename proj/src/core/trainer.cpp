#include "trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"
#include "phantom.hpp"

namespace r2u3d {

std::string to_string(LossKind k) { return k == LossKind::Dice ? "dice" : "ell"; }

void TrainConfig::validate() const {
  require(sample_size >= 1, ErrorCode::Config, "train: sample_size must be >= 1");
  require(epochs_per_iteration >= 1, ErrorCode::Config, "train: epochs_per_iteration must be >= 1");
  require(iterations >= 0, ErrorCode::Config, "train: iterations must be >= 0");
  require(batch_size == 1, ErrorCode::Config, "train: only batch_size 1 is supported");
  require(checkpoint_every >= 0, ErrorCode::Config, "train: checkpoint_every must be >= 0");
  schedule.validate();
  ell.validate();
}

Scan make_scan(std::string id, const ScanPair& pair) {
  require(pair.image.dims == pair.mask.dims, ErrorCode::ShapeMismatch,
          "scan '" + id + "': image dims " + to_string(pair.image.dims) + " differ from mask dims " +
              to_string(pair.mask.dims));
  return {std::move(id), std::make_shared<Tensor<float>>(pair.image.to_tensor()),
          std::make_shared<Tensor<float>>(pair.mask.to_tensor())};
}

int64_t TrainLog::total_steps() const {
  int64_t n = 0;
  for (const auto& r : records) n += r.steps;
  return n;
}

std::string TrainLog::to_jsonl(bool timestamps) const {
  std::string out;
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["iteration"] = r.iteration;
    j["samples"] = r.samples;
    j["lr"] = r.lr;
    j["mean_loss"] = r.mean_loss;
    j["steps"] = r.steps;
    if (timestamps) j["wall_time"] = r.wall_time;
    out += j.dump() + "\n";
  }
  return out;
}

template <typename T>
TensorPtr<T> compute_loss(Tape<T>* tape, const TensorPtr<T>& pred, const TensorPtr<T>& target, LossKind kind,
                          const EllConfig& ell) {
  if (kind == LossKind::Dice) return loss::dice_loss(tape, pred, target, ell.eps);
  return loss::ell(tape, pred, target, ell);
}

template TensorPtr<float> compute_loss(Tape<float>*, const TensorPtr<float>&, const TensorPtr<float>&, LossKind,
                                       const EllConfig&);
template TensorPtr<double> compute_loss(Tape<double>*, const TensorPtr<double>&, const TensorPtr<double>&, LossKind,
                                        const EllConfig&);

double train_step(Model& model, AdamState& state, const Scan& scan, double lr, LossKind kind, const EllConfig& ell) {
  Tape<float> tape;
  model.params().zero_grad();
  auto pred = forward<float>(model.topology(), model.params(), &tape, scan.image);
  auto loss = compute_loss<float>(&tape, pred, scan.mask, kind, ell);
  const double value = (*loss)[0];
  require(std::isfinite(value), ErrorCode::NonFinite, "non-finite loss on scan '" + scan.id + "'");
  tape.backward(loss);
  adam_step(model.params(), state, lr);
  return value;
}

TrainLog train(Model& model, const std::vector<Scan>& pool, const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  require(cfg.sample_size <= static_cast<int64_t>(pool.size()), ErrorCode::Config,
          "train: sample_size " + std::to_string(cfg.sample_size) + " exceeds pool size " +
              std::to_string(pool.size()));
  AdamState state(model.params());
  std::mt19937_64 rng(cfg.seed);
  const auto start = std::chrono::steady_clock::now();
  std::vector<size_t> order(pool.size());

  TrainLog log;
  for (int64_t it = 0; it < cfg.iterations; ++it) {
    std::iota(order.begin(), order.end(), size_t{0});
    // Partial Fisher-Yates: the first k entries are a uniform draw without replacement.
    for (size_t i = 0; i < static_cast<size_t>(cfg.sample_size); ++i) {
      std::uniform_int_distribution<size_t> pick(i, order.size() - 1);
      std::swap(order[i], order[pick(rng)]);
    }
    std::vector<size_t> sample(order.begin(), order.begin() + cfg.sample_size);

    IterationRecord rec;
    rec.iteration = it;
    for (auto s : sample) rec.samples.push_back(pool[s].id);
    rec.lr = lr_at(cfg.schedule, it);

    double loss_sum = 0;
    for (int64_t epoch = 0; epoch < cfg.epochs_per_iteration; ++epoch) {
      std::shuffle(sample.begin(), sample.end(), rng);
      for (auto s : sample) {
        double loss = 0;
        try {
          loss = train_step(model, state, pool[s], rec.lr, cfg.loss, cfg.ell);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::NonFinite) throw;
          fail(ErrorCode::NonFinite, "training aborted at iteration " + std::to_string(it) + ": " + e.what());
        }
        loss_sum += loss;
        ++rec.steps;
      }
    }
    rec.mean_loss = loss_sum / static_cast<double>(rec.steps);
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log.records.push_back(rec);
    if (hooks.on_iteration) hooks.on_iteration(rec);
    if (cfg.checkpoint_every > 0 && hooks.on_checkpoint && (it + 1) % cfg.checkpoint_every == 0)
      hooks.on_checkpoint(it, model);
  }
  return log;
}

std::string EvalReport::to_jsonl() const {
  std::string out;
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["scan"] = r.id;
    j["soft_dsc"] = r.soft_dsc;
    j["dsc"] = r.dsc;
    out += j.dump() + "\n";
  }
  nlohmann::ordered_json mean;
  mean["scan"] = "mean";
  mean["count"] = rows.size();
  mean["soft_dsc"] = rows.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(mean_soft_dsc);
  mean["dsc"] = rows.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(mean_dsc);
  mean["threshold"] = threshold;
  out += mean.dump() + "\n";
  return out;
}

std::string EvalReport::to_table() const {
  size_t width = 4;
  for (const auto& r : rows) width = std::max(width, r.id.size());
  std::ostringstream out;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-*s  %8s  %8s\n", static_cast<int>(width), "scan", "soft_dsc", "dsc");
  out << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-*s  %8.4f  %8.4f\n", static_cast<int>(width), r.id.c_str(), r.soft_dsc, r.dsc);
    out << buf;
  }
  if (rows.empty())
    std::snprintf(buf, sizeof buf, "%-*s  %8s  %8s\n", static_cast<int>(width), "mean", "-", "-");
  else
    std::snprintf(buf, sizeof buf, "%-*s  %8.4f  %8.4f\n", static_cast<int>(width), "mean", mean_soft_dsc, mean_dsc);
  out << buf;
  return out.str();
}

EvalReport evaluate(const Predictor& predict, const std::vector<Scan>& scans, double threshold_value) {
  EvalReport report;
  report.threshold = threshold_value;
  report.rows.resize(scans.size());
  for (size_t i = 0; i < scans.size(); ++i) {
    const Tensor<float> pred = predict(*scans[i].image);
    report.rows[i] = {scans[i].id, soft_dsc_value(pred, *scans[i].mask),
                      dsc(threshold(pred, threshold_value), *scans[i].mask)};
  }
  for (const auto& r : report.rows) {
    report.mean_soft_dsc += r.soft_dsc;
    report.mean_dsc += r.dsc;
  }
  if (!scans.empty()) {
    report.mean_soft_dsc /= static_cast<double>(scans.size());
    report.mean_dsc /= static_cast<double>(scans.size());
  }
  return report;
}

EvalReport evaluate(const Model& model, const std::vector<Scan>& scans, double threshold_value) {
  return evaluate([&model](const Tensor<float>& x) { return model.predict(x); }, scans, threshold_value);
}

ModelConfig SmokeOptions::smoke_model() {
  ModelConfig cfg = ModelConfig::preset_dynamic();
  cfg.filters = {8, 12, 16, 20};
  cfg.depths = {1, 1, 1, 1};
  cfg.stem_stages = 1;
  cfg.se_reduction = 4;
  return cfg;
}

SmokeReport overfit_smoke(const SmokeOptions& opts) {
  PhantomOptions popts;
  popts.dims = opts.dims;
  popts.count = opts.phantoms;
  popts.noise_sigma = opts.noise_sigma;
  const auto phantoms = generate_phantoms(popts, opts.seed);
  std::vector<Scan> scans;
  for (size_t i = 0; i < phantoms.size(); ++i) scans.push_back(make_scan("phantom" + std::to_string(i), phantoms[i]));

  Model model = Model::build(opts.model, opts.seed);
  SmokeReport report;
  report.baseline_soft_dsc = evaluate(model, scans).mean_soft_dsc;

  TrainConfig tc;
  tc.sample_size = static_cast<int64_t>(scans.size());
  tc.epochs_per_iteration = opts.epochs_per_iteration;
  tc.iterations = opts.iterations;
  tc.schedule.segments = {{std::max<int64_t>(opts.iterations, 1), opts.lr}};
  tc.seed = opts.seed;
  tc.loss = opts.loss;
  const auto start = std::chrono::steady_clock::now();
  const TrainLog log = train(model, scans, tc);
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report.steps = log.total_steps();
  for (const auto& r : log.records) report.loss_trace.push_back(r.mean_loss);
  report.final_soft_dsc = evaluate(model, scans).mean_soft_dsc;
  return report;
}

}  // namespace r2u3d
