#include "checkpoint.hpp"

#include <cstring>

#include "byteorder.hpp"
#include "config.hpp"
#include "fileio.hpp"
#include "json.hpp"

namespace r2u3d {

namespace {
constexpr char kMagic[8] = {'R', '2', 'U', '3', 'D', 'C', 'K', 'P'};
constexpr size_t kPrefix = 8 + 4 + 8;
}  // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  const ParamLayout& layout = model.layout();
  nlohmann::ordered_json manifest;
  manifest["format_version"] = kCheckpointVersion;
  manifest["config"] = nlohmann::ordered_json::parse(model_config_to_json(model.config()));
  auto params = nlohmann::ordered_json::array();
  int64_t offset = 0;
  for (size_t i = 0; i < layout.size(); ++i) {
    const int64_t count = model.params()[i]->numel();
    params.push_back({{"path", layout.path(i)}, {"shape", layout.shape(i).dims}, {"offset", offset}, {"count", count}});
    offset += count;
  }
  manifest["parameters"] = params;
  const std::string text = manifest.dump();

  std::vector<unsigned char> bytes(kPrefix + text.size() + static_cast<size_t>(offset) * 4);
  std::memcpy(bytes.data(), kMagic, 8);
  le::store_uint<uint32_t>(bytes.data() + 8, kCheckpointVersion);
  le::store_uint<uint64_t>(bytes.data() + 12, text.size());
  std::memcpy(bytes.data() + kPrefix, text.data(), text.size());
  unsigned char* payload = bytes.data() + kPrefix + text.size();
  for (size_t i = 0; i < layout.size(); ++i)
    for (float v : model.params()[i]->values()) {
      le::store_f32(payload, v);
      payload += 4;
    }
  write_file_bytes(path, bytes.data(), bytes.size());
}

Model load_checkpoint(const std::filesystem::path& path) {
  const std::string what = "checkpoint '" + path.string() + "'";
  const auto bytes = read_file_bytes(path);
  require(bytes.size() >= kPrefix && std::memcmp(bytes.data(), kMagic, 8) == 0, ErrorCode::Format,
          what + ": not a checkpoint file");
  const uint32_t version = le::load_uint<uint32_t>(bytes.data() + 8);
  require(version == kCheckpointVersion, ErrorCode::Format, what + ": unsupported version " + std::to_string(version));
  const uint64_t mlen = le::load_uint<uint64_t>(bytes.data() + 12);
  require(mlen <= bytes.size() - kPrefix, ErrorCode::Format, what + ": truncated manifest");

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.begin() + kPrefix, bytes.begin() + static_cast<std::ptrdiff_t>(kPrefix + mlen));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Format, what + ": bad manifest: " + e.what());
  }

  ModelConfig cfg;
  ParamStore<float> params;
  try {
    require(manifest.at("format_version").get<uint32_t>() == kCheckpointVersion, ErrorCode::Format,
            what + ": manifest version mismatch");
    try {
      cfg = model_config_from_json(manifest.at("config").dump());
    } catch (const Error& e) {
      fail(ErrorCode::Format, what + ": bad config snapshot: " + e.what());
    }
    const Topology topo = Topology::build(cfg);
    const auto& entries = manifest.at("parameters");
    require(entries.is_array() && entries.size() == topo.layout.size(), ErrorCode::Format,
            what + ": parameter list does not match the configured model");
    const size_t payload_bytes = bytes.size() - kPrefix - mlen;
    const unsigned char* payload = bytes.data() + kPrefix + mlen;
    int64_t expected_offset = 0;
    for (size_t i = 0; i < entries.size(); ++i) {
      const auto& e = entries[i];
      const std::string p = e.at("path").get<std::string>();
      require(p == topo.layout.path(i), ErrorCode::Format,
              what + ": parameter " + std::to_string(i) + " is '" + p + "', expected '" + topo.layout.path(i) + "'");
      Shape5 shape;
      shape.dims = e.at("shape").get<std::array<int64_t, 5>>();
      require(shape == topo.layout.shape(i), ErrorCode::Format,
              what + ": parameter '" + p + "' has shape " + shape.str() + ", expected " + topo.layout.shape(i).str());
      const int64_t offset = e.at("offset").get<int64_t>();
      const int64_t count = e.at("count").get<int64_t>();
      require(offset == expected_offset && count == shape.numel(), ErrorCode::Format,
              what + ": parameter '" + p + "' has inconsistent offset or count");
      require(static_cast<size_t>(offset + count) * 4 <= payload_bytes, ErrorCode::Format,
              what + ": payload truncated at '" + p + "'");
      std::vector<float> values(static_cast<size_t>(count));
      le::decode_f32({payload + offset * 4, static_cast<size_t>(count) * 4}, values);
      params.push(make_tensor<float>(shape, std::move(values)));
      expected_offset += count;
    }
    require(static_cast<size_t>(expected_offset) * 4 == payload_bytes, ErrorCode::Format,
            what + ": payload has trailing bytes");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Format, what + ": bad manifest: " + e.what());
  }
  return Model::from_parameters(cfg, std::move(params));
}

}  // namespace r2u3d
