#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "losses.hpp"
#include "model.hpp"
#include "optim.hpp"
#include "volume.hpp"

namespace r2u3d {

enum class LossKind { Dice, Ell };

std::string to_string(LossKind k);

struct TrainConfig {
  int64_t sample_size = 5;
  int64_t epochs_per_iteration = 5;
  int64_t iterations = 500;
  LrSchedule schedule;
  int64_t batch_size = 1;
  uint64_t seed = 0;
  LossKind loss = LossKind::Ell;
  EllConfig ell;
  /// Write a checkpoint every N outer iterations; 0 disables.
  int64_t checkpoint_every = 0;

  void validate() const;
};

/// A preprocessed training or evaluation scan as [1, 1, D, H, W] tensors.
struct Scan {
  std::string id;
  TensorPtr<float> image;
  TensorPtr<float> mask;
};

Scan make_scan(std::string id, const ScanPair& pair);

struct IterationRecord {
  int64_t iteration = 0;
  std::vector<std::string> samples;
  double lr = 0;
  double mean_loss = 0;
  int64_t steps = 0;
  double wall_time = 0;  // seconds since training started
};

struct TrainLog {
  std::vector<IterationRecord> records;

  int64_t total_steps() const;
  /// One JSON object per line; wall_time omitted when `timestamps` is false.
  std::string to_jsonl(bool timestamps) const;
};

struct TrainHooks {
  std::function<void(const IterationRecord&)> on_iteration;
  /// Called after iteration `index` (0-based) when checkpoint_every divides index + 1.
  std::function<void(int64_t index, const Model&)> on_checkpoint;
};

/// Loss of one prediction/target pair as a recorded scalar.
template <typename T>
TensorPtr<T> compute_loss(Tape<T>* tape, const TensorPtr<T>& pred, const TensorPtr<T>& target, LossKind kind,
                          const EllConfig& ell);

/// One Adam step on a single scan; returns the loss before the update.
double train_step(Model& model, AdamState& state, const Scan& scan, double lr, LossKind kind, const EllConfig& ell);

/// Pool-sampling loop: per outer iteration, k scans drawn without replacement,
/// epochs_per_iteration passes in a fresh seeded order, one Adam step per scan.
TrainLog train(Model& model, const std::vector<Scan>& pool, const TrainConfig& cfg, const TrainHooks& hooks = {});

struct ScanMetrics {
  std::string id;
  double soft_dsc = 0;  // on raw probabilities
  double dsc = 0;       // on the thresholded mask
};

struct EvalReport {
  std::vector<ScanMetrics> rows;
  double mean_soft_dsc = 0;
  double mean_dsc = 0;
  double threshold = 0.5;

  std::string to_jsonl() const;
  /// Fixed-width table, metrics to 4 decimals.
  std::string to_table() const;
};

using Predictor = std::function<Tensor<float>(const Tensor<float>&)>;

/// Rows follow input order; an empty scan list gives an empty report.
EvalReport evaluate(const Predictor& predict, const std::vector<Scan>& scans, double threshold = 0.5);
EvalReport evaluate(const Model& model, const std::vector<Scan>& scans, double threshold = 0.5);

struct SmokeOptions {
  uint64_t seed = 7;
  int phantoms = 5;
  Triple dims{16, 32, 32};
  double noise_sigma = 0.1;
  int64_t iterations = 240;
  int64_t epochs_per_iteration = 1;
  double lr = 1e-3;
  LossKind loss = LossKind::Dice;
  ModelConfig model = smoke_model();

  /// Toy Dynamic-variant network sized for 16x32x32 inputs.
  static ModelConfig smoke_model();
};

struct SmokeReport {
  double baseline_soft_dsc = 0;
  double final_soft_dsc = 0;
  int64_t steps = 0;
  double seconds = 0;
  std::vector<double> loss_trace;  // mean loss per outer iteration
};

/// Trains a toy model on seeded ellipsoid phantoms and reports training-set Soft-DSC.
SmokeReport overfit_smoke(const SmokeOptions& opts);

}  // namespace r2u3d
