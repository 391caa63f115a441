// r2u3d command-line front end. Talks to the library only through the C API.
//
// Exit codes: 0 success, 1 usage or config error, 2 verification failure,
// 3 I/O error.

#include <r2u3d/r2u3d.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"

namespace {

enum Exit : int { kOk = 0, kUsage = 1, kVerification = 2, kIo = 3 };

/// Carries a failed C API status up to main.
struct Failure {
  int exit_code;
  std::string message;
};

int exit_code_for(r2u3d_status s) {
  switch (s) {
    case R2U3D_OK: return kOk;
    case R2U3D_ERR_IO:
    case R2U3D_ERR_FORMAT: return kIo;
    case R2U3D_ERR_VERIFICATION: return kVerification;
    default: return kUsage;
  }
}

void check(r2u3d_status s) {
  if (s != R2U3D_OK) throw Failure{exit_code_for(s), r2u3d_last_error()};
}

struct ConfigDeleter {
  void operator()(r2u3d_config* c) const { r2u3d_config_free(c); }
};
struct ModelDeleter {
  void operator()(r2u3d_model* m) const { r2u3d_model_free(m); }
};
struct VolumeDeleter {
  void operator()(r2u3d_volume* v) const { r2u3d_volume_free(v); }
};
struct StringDeleter {
  void operator()(char* s) const { r2u3d_string_free(s); }
};
using ConfigPtr = std::unique_ptr<r2u3d_config, ConfigDeleter>;
using ModelPtr = std::unique_ptr<r2u3d_model, ModelDeleter>;
using VolumePtr = std::unique_ptr<r2u3d_volume, VolumeDeleter>;
using StringPtr = std::unique_ptr<char, StringDeleter>;

std::string take(char* s) { return StringPtr(s).get(); }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  out.close();
  if (!out) throw Failure{kIo, "cannot write '" + path + "'"};
}

/// Options shared by every subcommand; unset fields leave the config alone.
struct Common {
  std::string config;
  std::string preset;
  std::optional<uint64_t> seed;
  bool deterministic = false;
  std::optional<double> threshold;
  std::optional<int64_t> target_depth;
  std::string checkpoint;
  std::string out;
  bool no_timestamps = false;
};

ConfigPtr resolve_config(const Common& c) {
  r2u3d_config* raw = nullptr;
  if (!c.config.empty()) {
    check(r2u3d_config_load(c.config.c_str(), &raw));
  } else {
    check(r2u3d_config_from_preset(c.preset.empty() ? "dynamic" : c.preset.c_str(), &raw));
  }
  ConfigPtr cfg(raw);
  if (!c.config.empty() && !c.preset.empty()) check(r2u3d_config_set_preset(cfg.get(), c.preset.c_str()));
  if (c.seed) check(r2u3d_config_set_seed(cfg.get(), *c.seed));
  if (c.threshold) check(r2u3d_config_set_threshold(cfg.get(), *c.threshold));
  if (c.target_depth) check(r2u3d_config_set_target_depth(cfg.get(), *c.target_depth));
  if (c.deterministic) check(r2u3d_config_set_deterministic(cfg.get(), 1));
  int det = 0;
  check(r2u3d_config_get_deterministic(cfg.get(), &det));
  check(r2u3d_set_deterministic(det));
  return cfg;
}

/// --checkpoint wins over the config's paths.checkpoint.
std::string checkpoint_path(const Common& c, const r2u3d_config* cfg, bool required) {
  std::string path = c.checkpoint;
  if (path.empty()) path = take([&] {
      char* s = nullptr;
      check(r2u3d_config_get_path(cfg, "checkpoint", &s));
      return s;
    }());
  if (path.empty() && required) throw Failure{kUsage, "no checkpoint given (use --checkpoint or paths.checkpoint)"};
  return path;
}

std::string config_path(const r2u3d_config* cfg, const char* which) {
  char* s = nullptr;
  check(r2u3d_config_get_path(cfg, which, &s));
  return take(s);
}

ModelPtr load_model(const std::string& path) {
  r2u3d_model* m = nullptr;
  check(r2u3d_model_load(path.c_str(), &m));
  return ModelPtr(m);
}

VolumePtr read_volume(const std::string& path) {
  r2u3d_volume* v = nullptr;
  check(r2u3d_volume_read(path.c_str(), &v));
  return VolumePtr(v);
}

int cmd_summarize(const Common& c, const std::array<int64_t, 3>& extent) {
  auto cfg = resolve_config(c);
  r2u3d_model* raw = nullptr;
  check(r2u3d_model_build(cfg.get(), &raw));
  ModelPtr model(raw);
  char* table = nullptr;
  check(r2u3d_model_summary(model.get(), extent.data(), &table));
  const std::string text = take(table);
  std::cout << text;
  if (!c.out.empty()) write_text(c.out, text);
  return kOk;
}

int cmd_gradcheck(const Common& c, const std::string& fault) {
  check(r2u3d_set_deterministic(1));
  char* report = nullptr;
  int passed = 0;
  check(r2u3d_gradcheck(c.seed.value_or(1), fault.empty() ? nullptr : fault.c_str(), &report, &passed));
  const std::string text = take(report);
  std::cout << text;
  if (!c.out.empty()) write_text(c.out, text);
  return passed ? kOk : kVerification;
}

int cmd_preprocess(const Common& c, const std::string& in, const std::string& mask_in, const std::string& mask_out) {
  if (c.out.empty()) throw Failure{kUsage, "preprocess needs --out"};
  if (mask_in.empty() != mask_out.empty()) throw Failure{kUsage, "--mask and --mask-out go together"};
  const int64_t depth = c.target_depth.value_or(0);
  auto image = read_volume(in);
  if (mask_in.empty()) {
    r2u3d_volume* out = nullptr;
    check(r2u3d_preprocess_image(image.get(), depth, &out));
    VolumePtr result(out);
    check(r2u3d_volume_write(result.get(), c.out.c_str()));
    return kOk;
  }
  auto mask = read_volume(mask_in);
  r2u3d_volume* img_out = nullptr;
  r2u3d_volume* mask_out_v = nullptr;
  check(r2u3d_preprocess_pair(image.get(), mask.get(), depth, &img_out, &mask_out_v));
  VolumePtr a(img_out), b(mask_out_v);
  check(r2u3d_volume_write(a.get(), c.out.c_str()));
  check(r2u3d_volume_write(b.get(), mask_out.c_str()));
  return kOk;
}

int cmd_phantoms(const Common& c, int count, const std::array<int64_t, 3>& dims, double noise) {
  if (c.out.empty()) throw Failure{kUsage, "phantoms needs --out <dir>"};
  check(r2u3d_generate_phantoms(c.out.c_str(), count, dims.data(), noise, c.seed.value_or(7)));
  return kOk;
}

int cmd_train(const Common& c) {
  if (c.config.empty()) throw Failure{kUsage, "train needs --config"};
  auto cfg = resolve_config(c);
  r2u3d_model* raw = nullptr;
  check(r2u3d_model_build(cfg.get(), &raw));
  ModelPtr model(raw);
  const std::string ckpt = checkpoint_path(c, cfg.get(), false);
  const std::string log = c.out.empty() ? config_path(cfg.get(), "train_log") : c.out;
  r2u3d_train_outputs outputs{log.c_str(), ckpt.c_str(), c.no_timestamps ? 0 : 1};
  check(r2u3d_train(model.get(), cfg.get(), &outputs));
  if (!log.empty()) std::cout << "train log: " << log << "\n";
  if (!ckpt.empty()) std::cout << "checkpoint: " << ckpt << "\n";
  return kOk;
}

int cmd_eval(const Common& c) {
  if (c.config.empty()) throw Failure{kUsage, "eval needs --config"};
  auto cfg = resolve_config(c);
  auto model = load_model(checkpoint_path(c, cfg.get(), true));
  char* jsonl = nullptr;
  char* table = nullptr;
  check(r2u3d_evaluate(model.get(), cfg.get(), &jsonl, &table));
  StringPtr j(jsonl), t(table);
  std::cout << t.get();
  const std::string report = c.out.empty() ? config_path(cfg.get(), "report") : c.out;
  if (!report.empty()) write_text(report, j.get());
  return kOk;
}

int cmd_segment(const Common& c, const std::string& scan, const std::string& prob_out) {
  if (c.out.empty()) throw Failure{kUsage, "segment needs --out <mask>"};
  auto cfg = resolve_config(c);
  auto model = load_model(checkpoint_path(c, cfg.get(), true));
  auto image = read_volume(scan);
  double threshold = 0.5;
  check(r2u3d_config_get_threshold(cfg.get(), &threshold));
  // resolve_config already folded --target-depth into data.target_depth.
  int64_t depth = 0;
  check(r2u3d_config_get_target_depth(cfg.get(), &depth));
  r2u3d_volume* mask = nullptr;
  r2u3d_volume* prob = nullptr;
  check(r2u3d_segment(model.get(), image.get(), depth, threshold, &mask, prob_out.empty() ? nullptr : &prob));
  VolumePtr m(mask), p(prob);
  check(r2u3d_volume_write(m.get(), c.out.c_str()));
  if (p) check(r2u3d_volume_write(p.get(), prob_out.c_str()));
  return kOk;
}

int cmd_smoke(const Common& c, int64_t iterations) {
  check(r2u3d_set_deterministic(1));
  r2u3d_smoke_report r{};
  check(r2u3d_overfit_smoke(c.seed.value_or(7), iterations, &r));
  const bool ok = r.baseline_soft_dsc < 0.9 && r.final_soft_dsc >= 0.95 && r.seconds < 600;
  std::printf("baseline_soft_dsc=%.4f final_soft_dsc=%.4f steps=%lld seconds=%.1f %s\n", r.baseline_soft_dsc,
              r.final_soft_dsc, static_cast<long long>(r.steps), r.seconds, ok ? "PASS" : "FAIL");
  return ok ? kOk : kVerification;
}

void add_common(CLI::App* sub, Common& c, bool with_config) {
  if (with_config) {
    sub->add_option("--config", c.config, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--preset", c.preset, "Model preset")->check(CLI::IsMember({"default", "dynamic"}));
    sub->add_option("--seed", c.seed, "Seed for initialization and sampling");
    sub->add_flag("--deterministic", c.deterministic, "Single thread, fixed reduction order");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"r2u3d: recurrent residual 3D U-Net segmentation toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(r2u3d_version()));
  Common c;

  std::array<int64_t, 3> extent{64, 64, 64};
  auto* summarize = app.add_subcommand("summarize", "Layer table, parameter total and delta vs the reference count");
  add_common(summarize, c, true);
  summarize->add_option("--extent", extent, "Input extent D H W for the output-shape column");
  summarize->add_option("--out", c.out, "Also write the table here");

  std::string fault;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every op, block and loss");
  gradcheck->add_option("--seed", c.seed, "Seed for the random fixtures");
  gradcheck->add_option("--inject-fault", fault, "Corrupt the backward of this op (test fixture)");
  gradcheck->add_option("--out", c.out, "Also write the report here");

  std::string in_path, mask_in, mask_out;
  auto* preprocess = app.add_subcommand("preprocess", "Resample depth and min-max normalize into the internal format");
  preprocess->add_option("input", in_path, "Image volume (.mhd or internal)")->required();
  preprocess->add_option("--out", c.out, "Output image path")->required();
  preprocess->add_option("--target-depth", c.target_depth, "Slices after resampling (0 keeps)");
  preprocess->add_option("--mask", mask_in, "Matching mask volume");
  preprocess->add_option("--mask-out", mask_out, "Output mask path");

  int count = 5;
  std::array<int64_t, 3> dims{16, 32, 32};
  double noise = 0.1;
  auto* phantoms = app.add_subcommand("phantoms", "Write seeded ellipsoid phantoms with ground-truth masks");
  phantoms->add_option("--out", c.out, "Output directory")->required();
  phantoms->add_option("--count", count, "Number of phantoms")->check(CLI::PositiveNumber);
  phantoms->add_option("--dims", dims, "D H W");
  phantoms->add_option("--noise", noise, "Gaussian noise sigma")->check(CLI::NonNegativeNumber);
  phantoms->add_option("--seed", c.seed, "Generator seed");

  auto* train = app.add_subcommand("train", "Train from scratch on data.train; write TrainLog and checkpoint");
  add_common(train, c, true);
  train->add_option("--checkpoint", c.checkpoint, "Final checkpoint path (overrides paths.checkpoint)");
  train->add_option("--out", c.out, "TrainLog path (overrides paths.train_log)");
  train->add_option("--target-depth", c.target_depth, "Resample scans to this depth");
  train->add_flag("--no-timestamps", c.no_timestamps, "Omit wall_time so logs are byte-comparable");

  auto* eval = app.add_subcommand("eval", "Per-scan and mean Soft-DSC on data.eval");
  add_common(eval, c, true);
  eval->add_option("--checkpoint", c.checkpoint, "Model checkpoint (overrides paths.checkpoint)");
  eval->add_option("--out", c.out, "JSON lines report (overrides paths.report)");
  eval->add_option("--threshold", c.threshold, "Binarization threshold");
  eval->add_option("--target-depth", c.target_depth, "Resample scans to this depth");

  std::string scan, prob_out;
  auto* segment = app.add_subcommand("segment", "Write a binary mask for one scan");
  add_common(segment, c, true);
  segment->add_option("scan", scan, "Input scan (.mhd or internal)")->required();
  segment->add_option("--checkpoint", c.checkpoint, "Model checkpoint (overrides paths.checkpoint)");
  segment->add_option("--out", c.out, "Output mask path")->required();
  segment->add_option("--prob-out", prob_out, "Also write the probability volume");
  segment->add_option("--threshold", c.threshold, "Binarization threshold (default 0.5)");
  segment->add_option("--target-depth", c.target_depth, "Resample the scan to this depth first");

  int64_t iterations = -1;
  auto* smoke = app.add_subcommand("smoke", "Overfit a toy model on phantoms and check it learns");
  smoke->add_option("--seed", c.seed, "Phantom and initialization seed");
  smoke->add_option("--iterations", iterations, "Outer iterations (default built in)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*summarize) return cmd_summarize(c, extent);
    if (*gradcheck) return cmd_gradcheck(c, fault);
    if (*preprocess) return cmd_preprocess(c, in_path, mask_in, mask_out);
    if (*phantoms) return cmd_phantoms(c, count, dims, noise);
    if (*train) return cmd_train(c);
    if (*eval) return cmd_eval(c);
    if (*segment) return cmd_segment(c, scan, prob_out);
    if (*smoke) return cmd_smoke(c, iterations);
  } catch (const Failure& f) {
    std::cerr << "r2u3d: " << f.message << "\n";
    return f.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "r2u3d: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
