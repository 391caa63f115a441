#include "r2u3d/r2u3d.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <filesystem>
#include <new>
#include <string>

#include "checkpoint.hpp"
#include "config.hpp"
#include "execution.hpp"
#include "gradcheck_suite.hpp"
#include "phantom.hpp"
#include "preprocess.hpp"
#include "tape.hpp"
#include "trainer.hpp"
#include "fileio.hpp"

struct r2u3d_config {
  r2u3d::RunConfig cfg;
};

struct r2u3d_model {
  r2u3d::Model model;
};

struct r2u3d_volume {
  r2u3d::Volume volume;
};

namespace {

thread_local std::string g_last_error;

r2u3d_status to_status(r2u3d::ErrorCode code) {
  using r2u3d::ErrorCode;
  switch (code) {
    case ErrorCode::InvalidArgument: return R2U3D_ERR_ARGUMENT;
    case ErrorCode::ShapeMismatch: return R2U3D_ERR_SHAPE;
    case ErrorCode::NonFinite: return R2U3D_ERR_NON_FINITE;
    case ErrorCode::Config: return R2U3D_ERR_CONFIG;
    case ErrorCode::Io: return R2U3D_ERR_IO;
    case ErrorCode::Format: return R2U3D_ERR_FORMAT;
    case ErrorCode::State: return R2U3D_ERR_STATE;
    case ErrorCode::Verification: return R2U3D_ERR_VERIFICATION;
  }
  return R2U3D_ERR_INTERNAL;
}

/// Runs `fn`, mapping exceptions to status codes and recording the message.
template <typename Fn>
r2u3d_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return R2U3D_OK;
  } catch (const r2u3d::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return R2U3D_ERR_IO;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return R2U3D_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return R2U3D_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return R2U3D_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  r2u3d::require(p != nullptr, r2u3d::ErrorCode::InvalidArgument, std::string(what) + " must not be null");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

r2u3d::Triple to_triple(const int64_t v[3]) { return {v[0], v[1], v[2]}; }

size_t parameter_index(const r2u3d::Model& m, const char* path) {
  need(path, "parameter path");
  const auto idx = m.layout().find(path);
  r2u3d::require(idx.has_value(), r2u3d::ErrorCode::InvalidArgument, std::string("no parameter named '") + path + "'");
  return *idx;
}

r2u3d::Volume preprocess_image(const r2u3d::Volume& v, int64_t target_depth) {
  return r2u3d::normalize(target_depth > 0 ? r2u3d::resample_depth(v, target_depth) : v);
}

}  // namespace

extern "C" {

const char* r2u3d_last_error(void) { return g_last_error.c_str(); }

const char* r2u3d_version(void) { return R2U3D_VERSION_STRING; }

void r2u3d_string_free(char* s) { std::free(s); }

r2u3d_status r2u3d_set_deterministic(int on) {
  return guarded([&] { r2u3d::set_deterministic(on != 0); });
}

r2u3d_status r2u3d_set_threads(int threads) {
  return guarded([&] { r2u3d::set_threads(threads); });
}

r2u3d_status r2u3d_config_load(const char* path, r2u3d_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new r2u3d_config{r2u3d::load_run_config(path)};
  });
}

r2u3d_status r2u3d_config_parse(const char* json, const char* base_dir, r2u3d_config** out) {
  return guarded([&] {
    need(json, "json");
    need(out, "out");
    *out = new r2u3d_config{r2u3d::parse_run_config(json, base_dir ? base_dir : "")};
  });
}

r2u3d_status r2u3d_config_from_preset(const char* preset, r2u3d_config** out) {
  return guarded([&] {
    need(preset, "preset");
    need(out, "out");
    r2u3d::RunConfig cfg;
    cfg.model = r2u3d::ModelConfig::preset(preset);
    *out = new r2u3d_config{cfg};
  });
}

r2u3d_status r2u3d_config_set_preset(r2u3d_config* cfg, const char* preset) {
  return guarded([&] {
    need(cfg, "config");
    need(preset, "preset");
    cfg->cfg.model = r2u3d::ModelConfig::preset(preset);
  });
}

r2u3d_status r2u3d_config_set_seed(r2u3d_config* cfg, uint64_t seed) {
  return guarded([&] {
    need(cfg, "config");
    cfg->cfg.seed = seed;
    cfg->cfg.train.seed = seed;
  });
}

r2u3d_status r2u3d_config_set_threshold(r2u3d_config* cfg, double threshold) {
  return guarded([&] {
    need(cfg, "config");
    r2u3d::require(threshold > 0 && threshold < 1, r2u3d::ErrorCode::Config, "threshold must lie in (0, 1)");
    cfg->cfg.threshold = threshold;
  });
}

r2u3d_status r2u3d_config_set_target_depth(r2u3d_config* cfg, int64_t depth) {
  return guarded([&] {
    need(cfg, "config");
    r2u3d::require(depth >= 0, r2u3d::ErrorCode::Config, "target depth must be >= 0");
    cfg->cfg.data.target_depth = depth;
  });
}

r2u3d_status r2u3d_config_set_deterministic(r2u3d_config* cfg, int on) {
  return guarded([&] {
    need(cfg, "config");
    cfg->cfg.deterministic = on != 0;
  });
}

r2u3d_status r2u3d_config_get_deterministic(const r2u3d_config* cfg, int* out) {
  return guarded([&] {
    need(cfg, "config");
    need(out, "out");
    *out = cfg->cfg.deterministic ? 1 : 0;
  });
}

r2u3d_status r2u3d_config_get_threshold(const r2u3d_config* cfg, double* out) {
  return guarded([&] {
    need(cfg, "config");
    need(out, "out");
    *out = cfg->cfg.threshold;
  });
}

r2u3d_status r2u3d_config_get_target_depth(const r2u3d_config* cfg, int64_t* out) {
  return guarded([&] {
    need(cfg, "config");
    need(out, "out");
    *out = cfg->cfg.data.target_depth;
  });
}

r2u3d_status r2u3d_config_get_path(const r2u3d_config* cfg, const char* which, char** out) {
  return guarded([&] {
    need(cfg, "config");
    need(which, "which");
    need(out, "out");
    const std::string w = which;
    const auto& p = cfg->cfg.paths;
    if (w == "checkpoint") *out = dup_string(p.checkpoint.string());
    else if (w == "report") *out = dup_string(p.report.string());
    else if (w == "train_log") *out = dup_string(p.train_log.string());
    else r2u3d::fail(r2u3d::ErrorCode::InvalidArgument, "unknown path key '" + w + "'");
  });
}

r2u3d_status r2u3d_config_to_json(const r2u3d_config* cfg, char** out) {
  return guarded([&] {
    need(cfg, "config");
    need(out, "out");
    *out = dup_string(r2u3d::run_config_to_json(cfg->cfg));
  });
}

void r2u3d_config_free(r2u3d_config* cfg) { delete cfg; }

r2u3d_status r2u3d_model_build(const r2u3d_config* cfg, r2u3d_model** out) {
  return guarded([&] {
    need(cfg, "config");
    need(out, "out");
    *out = new r2u3d_model{r2u3d::Model::build(cfg->cfg.model, cfg->cfg.seed)};
  });
}

r2u3d_status r2u3d_model_load(const char* checkpoint_path, r2u3d_model** out) {
  return guarded([&] {
    need(checkpoint_path, "checkpoint path");
    need(out, "out");
    *out = new r2u3d_model{r2u3d::load_checkpoint(checkpoint_path)};
  });
}

r2u3d_status r2u3d_model_save(const r2u3d_model* model, const char* checkpoint_path) {
  return guarded([&] {
    need(model, "model");
    need(checkpoint_path, "checkpoint path");
    r2u3d::save_checkpoint(model->model, checkpoint_path);
  });
}

void r2u3d_model_free(r2u3d_model* model) { delete model; }

r2u3d_status r2u3d_model_parameter_count(const r2u3d_model* model, int64_t* out) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    *out = model->model.count_parameters();
  });
}

r2u3d_status r2u3d_model_reference_count(const r2u3d_model* model, int64_t* out) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    *out = model->model.config().reference_parameter_count();
  });
}

r2u3d_status r2u3d_model_summary(const r2u3d_model* model, const int64_t extent[3], char** out) {
  return guarded([&] {
    need(model, "model");
    need(extent, "extent");
    need(out, "out");
    *out = dup_string(model->model.summary_table(to_triple(extent)));
  });
}

r2u3d_status r2u3d_model_parameter_names(const r2u3d_model* model, char** out) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    std::string names;
    for (size_t i = 0; i < model->model.layout().size(); ++i) names += model->model.layout().path(i) + "\n";
    *out = dup_string(names);
  });
}

r2u3d_status r2u3d_model_parameter_size(const r2u3d_model* model, const char* path, size_t* out) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    *out = static_cast<size_t>(model->model.params()[parameter_index(model->model, path)]->numel());
  });
}

r2u3d_status r2u3d_model_get_parameter(const r2u3d_model* model, const char* path, float* values, size_t count) {
  return guarded([&] {
    need(model, "model");
    need(values, "values");
    const auto& t = *model->model.params()[parameter_index(model->model, path)];
    r2u3d::require(count == static_cast<size_t>(t.numel()), r2u3d::ErrorCode::ShapeMismatch,
                   std::string("parameter '") + path + "' has " + std::to_string(t.numel()) + " elements, not " +
                       std::to_string(count));
    std::copy(t.values().begin(), t.values().end(), values);
  });
}

r2u3d_status r2u3d_model_set_parameter(r2u3d_model* model, const char* path, const float* values, size_t count) {
  return guarded([&] {
    need(model, "model");
    need(values, "values");
    auto& t = *model->model.params()[parameter_index(model->model, path)];
    r2u3d::require(count == static_cast<size_t>(t.numel()), r2u3d::ErrorCode::ShapeMismatch,
                   std::string("parameter '") + path + "' has " + std::to_string(t.numel()) + " elements, not " +
                       std::to_string(count));
    r2u3d::require(r2u3d::all_finite<float>({values, count}), r2u3d::ErrorCode::NonFinite,
                   std::string("non-finite value for parameter '") + path + "'");
    std::copy(values, values + count, t.values().begin());
  });
}

r2u3d_status r2u3d_model_forward(const r2u3d_model* model, const r2u3d_volume* image, r2u3d_volume** out) {
  return guarded([&] {
    need(model, "model");
    need(image, "image");
    need(out, "out");
    const auto prob = model->model.predict(image->volume.to_tensor());
    *out = new r2u3d_volume{r2u3d::Volume::from_tensor(prob, image->volume.spacing)};
  });
}

r2u3d_status r2u3d_volume_read(const char* path, r2u3d_volume** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new r2u3d_volume{r2u3d::read_any_volume(path)};
  });
}

r2u3d_status r2u3d_volume_create(const int64_t dims[3], const float* data, r2u3d_volume** out) {
  return guarded([&] {
    need(dims, "dims");
    need(out, "out");
    r2u3d::Volume v(to_triple(dims));
    if (data) std::copy(data, data + v.voxels.size(), v.voxels.begin());
    *out = new r2u3d_volume{std::move(v)};
  });
}

r2u3d_status r2u3d_volume_write(const r2u3d_volume* volume, const char* path) {
  return guarded([&] {
    need(volume, "volume");
    need(path, "path");
    r2u3d::write_volume(volume->volume, path);
  });
}

r2u3d_status r2u3d_volume_dims(const r2u3d_volume* volume, int64_t dims[3]) {
  return guarded([&] {
    need(volume, "volume");
    need(dims, "dims");
    std::copy(volume->volume.dims.begin(), volume->volume.dims.end(), dims);
  });
}

r2u3d_status r2u3d_volume_spacing(const r2u3d_volume* volume, double spacing[3]) {
  return guarded([&] {
    need(volume, "volume");
    need(spacing, "spacing");
    std::copy(volume->volume.spacing.begin(), volume->volume.spacing.end(), spacing);
  });
}

r2u3d_status r2u3d_volume_data(const r2u3d_volume* volume, const float** out, size_t* count) {
  return guarded([&] {
    need(volume, "volume");
    need(out, "out");
    need(count, "count");
    *out = volume->volume.voxels.data();
    *count = volume->volume.voxels.size();
  });
}

void r2u3d_volume_free(r2u3d_volume* volume) { delete volume; }

r2u3d_status r2u3d_preprocess_image(const r2u3d_volume* image, int64_t target_depth, r2u3d_volume** out) {
  return guarded([&] {
    need(image, "image");
    need(out, "out");
    *out = new r2u3d_volume{preprocess_image(image->volume, target_depth)};
  });
}

r2u3d_status r2u3d_preprocess_pair(const r2u3d_volume* image, const r2u3d_volume* mask, int64_t target_depth,
                                   r2u3d_volume** out_image, r2u3d_volume** out_mask) {
  return guarded([&] {
    need(image, "image");
    need(mask, "mask");
    need(out_image, "out_image");
    need(out_mask, "out_mask");
    const int64_t depth = target_depth > 0 ? target_depth : image->volume.dims[0];
    auto pair = r2u3d::preprocess_pair(image->volume, mask->volume, depth);
    auto* img = new r2u3d_volume{std::move(pair.image)};
    try {
      *out_mask = new r2u3d_volume{std::move(pair.mask)};
    } catch (...) {
      delete img;
      throw;
    }
    *out_image = img;
  });
}

r2u3d_status r2u3d_segment(const r2u3d_model* model, const r2u3d_volume* image, int64_t target_depth,
                           double threshold, r2u3d_volume** mask, r2u3d_volume** prob) {
  return guarded([&] {
    need(model, "model");
    need(image, "image");
    need(mask, "mask");
    r2u3d::require(threshold > 0 && threshold < 1, r2u3d::ErrorCode::InvalidArgument, "threshold must lie in (0, 1)");
    const r2u3d::Volume input = preprocess_image(image->volume, target_depth);
    const auto p = model->model.predict(input.to_tensor());
    auto m = r2u3d::Volume::from_tensor(r2u3d::threshold(p, threshold), input.spacing);
    r2u3d_volume* prob_out = prob ? new r2u3d_volume{r2u3d::Volume::from_tensor(p, input.spacing)} : nullptr;
    try {
      *mask = new r2u3d_volume{std::move(m)};
    } catch (...) {
      delete prob_out;
      throw;
    }
    if (prob) *prob = prob_out;
  });
}

r2u3d_status r2u3d_train(r2u3d_model* model, const r2u3d_config* cfg, const r2u3d_train_outputs* outputs) {
  return guarded([&] {
    need(model, "model");
    need(cfg, "config");
    const r2u3d::RunConfig& rc = cfg->cfg;
    r2u3d::require(model->model.config() == rc.model, r2u3d::ErrorCode::Config,
                   "model architecture does not match the config's model section");
    const std::string log_path = outputs && outputs->train_log_path ? outputs->train_log_path : "";
    const std::string ckpt_path = outputs && outputs->checkpoint_path ? outputs->checkpoint_path : "";
    const bool timestamps = outputs && outputs->timestamps;
    r2u3d::require(!rc.data.train_ids.empty(), r2u3d::ErrorCode::Config, "config.data.train lists no scans");
    const auto pool = r2u3d::load_scans(rc.data, rc.data.train_ids);

    r2u3d::TrainHooks hooks;
    if (!ckpt_path.empty())
      hooks.on_checkpoint = [&](int64_t index, const r2u3d::Model& m) {
        r2u3d::save_checkpoint(m, ckpt_path + ".iter" + std::to_string(index + 1));
      };
    const auto log = r2u3d::train(model->model, pool, rc.train, hooks);
    if (!log_path.empty()) r2u3d::write_file_text(log_path, log.to_jsonl(timestamps));
    if (!ckpt_path.empty()) r2u3d::save_checkpoint(model->model, ckpt_path);
  });
}

r2u3d_status r2u3d_evaluate(const r2u3d_model* model, const r2u3d_config* cfg, char** jsonl, char** table) {
  return guarded([&] {
    need(model, "model");
    need(cfg, "config");
    const auto scans = r2u3d::load_scans(cfg->cfg.data, cfg->cfg.data.eval_ids);
    const auto report = r2u3d::evaluate(model->model, scans, cfg->cfg.threshold);
    char* j = jsonl ? dup_string(report.to_jsonl()) : nullptr;
    try {
      if (table) *table = dup_string(report.to_table());
    } catch (...) {
      std::free(j);
      throw;
    }
    if (jsonl) *jsonl = j;
  });
}

r2u3d_status r2u3d_gradcheck(uint64_t seed, const char* inject_fault, char** report, int* passed) {
  return guarded([&] {
    need(passed, "passed");
    if (inject_fault && *inject_fault) {
      const auto ops = r2u3d::faultable_ops();
      r2u3d::require(std::find(ops.begin(), ops.end(), inject_fault) != ops.end(), r2u3d::ErrorCode::InvalidArgument,
                     std::string("cannot inject a fault into unknown op '") + inject_fault + "'");
      r2u3d::testing::set_backward_fault(std::string(inject_fault));
    }
    struct ClearFault {
      ~ClearFault() { r2u3d::testing::set_backward_fault(std::nullopt); }
    } clear;
    const auto result = r2u3d::run_gradcheck_suite(seed);
    if (report) *report = dup_string(result.to_text());
    *passed = result.passed() ? 1 : 0;
  });
}

r2u3d_status r2u3d_overfit_smoke(uint64_t seed, int64_t iterations, r2u3d_smoke_report* out) {
  return guarded([&] {
    need(out, "out");
    r2u3d::SmokeOptions opts;
    opts.seed = seed;
    if (iterations >= 0) opts.iterations = iterations;
    const auto r = r2u3d::overfit_smoke(opts);
    *out = {r.baseline_soft_dsc, r.final_soft_dsc, r.steps, r.seconds};
  });
}

r2u3d_status r2u3d_generate_phantoms(const char* dir, int count, const int64_t dims[3], double noise_sigma,
                                     uint64_t seed) {
  return guarded([&] {
    need(dir, "dir");
    need(dims, "dims");
    r2u3d::PhantomOptions opts;
    opts.count = count;
    opts.dims = to_triple(dims);
    opts.noise_sigma = noise_sigma;
    const auto phantoms = r2u3d::generate_phantoms(opts, seed);
    const std::filesystem::path root(dir);
    std::filesystem::create_directories(root);
    for (size_t i = 0; i < phantoms.size(); ++i) {
      char id[32];
      std::snprintf(id, sizeof id, "phantom%02zu", i);
      r2u3d::write_volume(phantoms[i].image, root / (std::string(id) + "_image.vol"));
      r2u3d::write_volume(phantoms[i].mask, root / (std::string(id) + "_mask.vol"));
    }
  });
}

}  // extern "C"
