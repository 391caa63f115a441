#include "config.hpp"

#include <set>

#include "json.hpp"
#include "preprocess.hpp"
#include "fileio.hpp"

namespace r2u3d {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

/// Reads keys from one JSON object and rejects any key never asked for.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    require(j_.is_object(), ErrorCode::Config, where_ + " must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  template <typename V>
  void get(const std::string& key, V& out) {
    if (const json* v = find(key)) out = convert<V>(*v, path(key));
  }

  std::string path(const std::string& key) const { return where_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      require(seen_.count(it.key()) > 0, ErrorCode::Config, "unknown key '" + path(it.key()) + "'");
  }

  template <typename V>
  static V convert(const json& v, const std::string& where) {
    try {
      if constexpr (std::is_same_v<V, bool>) {
        require(v.is_boolean(), ErrorCode::Config, where + " must be a boolean");
      } else if constexpr (std::is_integral_v<V>) {
        require(v.is_number_integer(), ErrorCode::Config, where + " must be an integer");
        if constexpr (std::is_unsigned_v<V>)
          require(v.is_number_unsigned() || v.get<int64_t>() >= 0, ErrorCode::Config, where + " must be >= 0");
      } else if constexpr (std::is_floating_point_v<V>) {
        require(v.is_number(), ErrorCode::Config, where + " must be a number");
      } else if constexpr (std::is_same_v<V, std::string>) {
        require(v.is_string(), ErrorCode::Config, where + " must be a string");
      }
      return v.get<V>();
    } catch (const json::exception& e) {
      fail(ErrorCode::Config, where + ": " + e.what());
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

template <typename V, size_t N>
void get_array(ObjectReader& r, const std::string& key, std::array<V, N>& out) {
  const json* v = r.find(key);
  if (!v) return;
  require(v->is_array() && v->size() == N, ErrorCode::Config,
          r.path(key) + " must be an array of " + std::to_string(N) + " values");
  for (size_t i = 0; i < N; ++i) out[i] = ObjectReader::convert<V>((*v)[i], r.path(key) + "[" + std::to_string(i) + "]");
}

Triple parse_kernel(const json& v, const std::string& where) {
  if (v.is_number_integer()) {
    const auto k = ObjectReader::convert<int64_t>(v, where);
    return {k, k, k};
  }
  require(v.is_array() && v.size() == 3, ErrorCode::Config, where + " must be an integer or an array of 3 integers");
  Triple t{};
  for (size_t i = 0; i < 3; ++i) t[i] = ObjectReader::convert<int64_t>(v[i], where + "[" + std::to_string(i) + "]");
  return t;
}

json parse_document(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::Config, what + ": " + e.what());
  }
}

Variant parse_variant(const std::string& s, const std::string& where) {
  if (s == "default") return Variant::Default;
  if (s == "dynamic") return Variant::Dynamic;
  fail(ErrorCode::Config, where + " must be 'default' or 'dynamic', got '" + s + "'");
}

ModelConfig model_from(const json& j, const std::string& where) {
  ObjectReader r(j, where);
  ModelConfig cfg;
  if (const json* p = r.find("preset")) cfg = ModelConfig::preset(ObjectReader::convert<std::string>(*p, r.path("preset")));
  if (const json* v = r.find("variant"))
    cfg.variant = parse_variant(ObjectReader::convert<std::string>(*v, r.path("variant")), r.path("variant"));
  get_array(r, "filters", cfg.filters);
  get_array(r, "depths", cfg.depths);
  r.get("stem_stages", cfg.stem_stages);
  r.get("dilation", cfg.dilation);
  r.get("se_reduction", cfg.se_reduction);
  r.get("layers_per_unit", cfg.layers_per_unit);
  r.get("transition_conv", cfg.transition_conv);
  if (const json* d = r.find("downsample")) {
    ObjectReader dr(*d, r.path("downsample"));
    if (const json* m = dr.find("mode")) {
      const auto s = ObjectReader::convert<std::string>(*m, dr.path("mode"));
      if (s == "add") cfg.downsample.mode = DownsampleMode::AddBranches;
      else if (s == "concat") cfg.downsample.mode = DownsampleMode::InceptionConcat;
      else fail(ErrorCode::Config, dr.path("mode") + " must be 'add' or 'concat', got '" + s + "'");
    }
    if (const json* k = dr.find("branch_kernels")) {
      require(k->is_array(), ErrorCode::Config, dr.path("branch_kernels") + " must be an array");
      cfg.downsample.branch_kernels.clear();
      for (size_t i = 0; i < k->size(); ++i)
        cfg.downsample.branch_kernels.push_back(
            parse_kernel((*k)[i], dr.path("branch_kernels") + "[" + std::to_string(i) + "]"));
    }
    if (const json* s = dr.find("stride")) cfg.downsample.stride = parse_kernel(*s, dr.path("stride"));
    dr.get("include_maxpool_branch", cfg.downsample.include_maxpool_branch);
    dr.finish();
  }
  r.finish();
  try {
    cfg.validate();
  } catch (const Error& e) {
    fail(ErrorCode::Config, where + ": " + e.what());
  }
  return cfg;
}

ordered_json model_to(const ModelConfig& cfg) {
  ordered_json j;
  j["variant"] = to_string(cfg.variant);
  j["filters"] = cfg.filters;
  j["depths"] = cfg.depths;
  j["stem_stages"] = cfg.stem_stages;
  j["dilation"] = cfg.dilation;
  ordered_json d;
  d["mode"] = cfg.downsample.mode == DownsampleMode::AddBranches ? "add" : "concat";
  d["branch_kernels"] = cfg.downsample.branch_kernels;
  d["stride"] = cfg.downsample.stride;
  d["include_maxpool_branch"] = cfg.downsample.include_maxpool_branch;
  j["downsample"] = d;
  j["se_reduction"] = cfg.se_reduction;
  j["layers_per_unit"] = cfg.layers_per_unit;
  j["transition_conv"] = cfg.transition_conv;
  return j;
}

void ell_from(const json& j, const std::string& where, EllConfig& ell) {
  ObjectReader r(j, where);
  r.get("w_dsc", ell.w_dsc);
  r.get("w_wcel", ell.w_wcel);
  r.get("gamma_dsc", ell.gamma_dsc);
  r.get("gamma_wcel", ell.gamma_wcel);
  r.get("pos_weight", ell.pos_weight);
  r.get("eps", ell.eps);
  r.get("prob_clamp", ell.prob_clamp);
  r.finish();
}

void train_from(const json& j, const std::string& where, TrainConfig& t) {
  ObjectReader r(j, where);
  r.get("sample_size", t.sample_size);
  r.get("epochs_per_iteration", t.epochs_per_iteration);
  r.get("iterations", t.iterations);
  r.get("batch_size", t.batch_size);
  r.get("checkpoint_every", t.checkpoint_every);
  if (const json* l = r.find("loss")) {
    const auto s = ObjectReader::convert<std::string>(*l, r.path("loss"));
    if (s == "dice") t.loss = LossKind::Dice;
    else if (s == "ell") t.loss = LossKind::Ell;
    else fail(ErrorCode::Config, r.path("loss") + " must be 'dice' or 'ell', got '" + s + "'");
  }
  if (const json* s = r.find("schedule")) {
    require(s->is_array(), ErrorCode::Config, r.path("schedule") + " must be an array of [count, rate] pairs");
    t.schedule.segments.clear();
    for (size_t i = 0; i < s->size(); ++i) {
      const std::string w = r.path("schedule") + "[" + std::to_string(i) + "]";
      const json& seg = (*s)[i];
      require(seg.is_array() && seg.size() == 2, ErrorCode::Config, w + " must be a [count, rate] pair");
      t.schedule.segments.emplace_back(ObjectReader::convert<int64_t>(seg[0], w + "[0]"),
                                       ObjectReader::convert<double>(seg[1], w + "[1]"));
    }
  }
  r.finish();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

std::string model_config_to_json(const ModelConfig& cfg) { return model_to(cfg).dump(2); }

ModelConfig model_config_from_json(const std::string& text) {
  return model_from(parse_document(text, "model config"), "model");
}

void RunConfig::validate() const {
  model.validate();
  train.validate();
  require(threshold > 0 && threshold < 1, ErrorCode::Config, "threshold must lie in (0, 1)");
  require(data.target_depth >= 0, ErrorCode::Config, "data.target_depth must be >= 0");
}

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir) {
  const json doc = parse_document(text, "run config");
  ObjectReader r(doc, "config");
  RunConfig cfg;
  if (const json* m = r.find("model")) cfg.model = model_from(*m, "config.model");
  if (const json* t = r.find("train")) train_from(*t, "config.train", cfg.train);
  if (const json* e = r.find("ell")) ell_from(*e, "config.ell", cfg.train.ell);
  if (const json* d = r.find("data")) {
    ObjectReader dr(*d, "config.data");
    std::string root;
    dr.get("root", root);
    cfg.data.root = resolve(base_dir, root);
    dr.get("train", cfg.data.train_ids);
    dr.get("eval", cfg.data.eval_ids);
    dr.get("target_depth", cfg.data.target_depth);
    dr.finish();
  }
  if (const json* p = r.find("paths")) {
    ObjectReader pr(*p, "config.paths");
    std::string checkpoint, report, train_log;
    pr.get("checkpoint", checkpoint);
    pr.get("report", report);
    pr.get("train_log", train_log);
    pr.finish();
    cfg.paths = {resolve(base_dir, checkpoint), resolve(base_dir, report), resolve(base_dir, train_log)};
  }
  r.get("seed", cfg.seed);
  r.get("deterministic", cfg.deterministic);
  r.get("threshold", cfg.threshold);
  r.finish();
  cfg.train.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_file_text(path), path.parent_path());
}

std::string run_config_to_json(const RunConfig& cfg) {
  ordered_json j;
  j["model"] = model_to(cfg.model);
  ordered_json t;
  t["sample_size"] = cfg.train.sample_size;
  t["epochs_per_iteration"] = cfg.train.epochs_per_iteration;
  t["iterations"] = cfg.train.iterations;
  t["schedule"] = cfg.train.schedule.segments;
  t["batch_size"] = cfg.train.batch_size;
  t["loss"] = to_string(cfg.train.loss);
  t["checkpoint_every"] = cfg.train.checkpoint_every;
  j["train"] = t;
  const EllConfig& e = cfg.train.ell;
  j["ell"] = {{"w_dsc", e.w_dsc},         {"w_wcel", e.w_wcel}, {"gamma_dsc", e.gamma_dsc},
              {"gamma_wcel", e.gamma_wcel}, {"pos_weight", e.pos_weight}, {"eps", e.eps},
              {"prob_clamp", e.prob_clamp}};
  j["data"] = {{"root", cfg.data.root.string()},
               {"train", cfg.data.train_ids},
               {"eval", cfg.data.eval_ids},
               {"target_depth", cfg.data.target_depth}};
  j["paths"] = {{"checkpoint", cfg.paths.checkpoint.string()},
                {"report", cfg.paths.report.string()},
                {"train_log", cfg.paths.train_log.string()}};
  j["seed"] = cfg.seed;
  j["deterministic"] = cfg.deterministic;
  j["threshold"] = cfg.threshold;
  return j.dump(2);
}

std::vector<Scan> load_scans(const DataConfig& data, const std::vector<std::string>& ids) {
  std::vector<Scan> scans;
  for (const auto& id : ids) {
    const Volume image = read_volume(data.root / (id + "_image.vol"));
    const Volume mask = read_volume(data.root / (id + "_mask.vol"));
    const int64_t depth = data.target_depth > 0 ? data.target_depth : image.dims[0];
    scans.push_back(make_scan(id, preprocess_pair(image, mask, depth)));
  }
  return scans;
}

}  // namespace r2u3d
