#include "volume.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <map>
#include <sstream>

#include "byteorder.hpp"
#include "fileio.hpp"

namespace r2u3d {

Volume::Volume(const Triple& d, std::array<double, 3> s) : dims(d), spacing(s) {
  for (auto e : dims) require(e >= 1, ErrorCode::InvalidArgument, "volume extents must be >= 1, got " + to_string(dims));
  voxels.assign(static_cast<size_t>(size()), 0.0f);
}

void Volume::validate() const {
  for (auto e : dims) require(e >= 1, ErrorCode::InvalidArgument, "volume extents must be >= 1, got " + to_string(dims));
  require(static_cast<int64_t>(voxels.size()) == size(), ErrorCode::ShapeMismatch,
          "volume holds " + std::to_string(voxels.size()) + " voxels for dims " + to_string(dims));
  for (auto s : spacing) require(s > 0 && std::isfinite(s), ErrorCode::InvalidArgument, "volume spacing must be > 0");
}

Tensor<float> Volume::to_tensor() const {
  validate();
  return Tensor<float>(Shape5(1, 1, dims), voxels);
}

Volume Volume::from_tensor(const Tensor<float>& t, std::array<double, 3> spacing) {
  require(t.shape().n() == 1 && t.shape().c() == 1, ErrorCode::ShapeMismatch,
          "volume from tensor needs shape [1,1,D,H,W], got " + t.shape().str());
  Volume v(t.shape().spatial(), spacing);
  v.voxels = t.values();
  return v;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// Ordered `key = value` lines; blank lines and '#' comments are skipped.
std::map<std::string, std::string> parse_key_values(const std::string& text, const std::string& what) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    require(eq != std::string::npos, ErrorCode::Format,
            what + ": line " + std::to_string(lineno) + " is not 'key = value'");
    kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return kv;
}

template <typename V>
std::vector<V> parse_list(const std::string& value, const std::string& key, const std::string& what) {
  std::istringstream in(value);
  std::vector<V> out;
  V x;
  while (in >> x) out.push_back(x);
  require(in.eof(), ErrorCode::Format, what + ": malformed value for " + key + ": '" + value + "'");
  return out;
}

const std::string& required(const std::map<std::string, std::string>& kv, const std::string& key,
                            const std::string& what) {
  auto it = kv.find(key);
  require(it != kv.end(), ErrorCode::Format, what + ": missing required key " + key);
  return it->second;
}

bool is_true(const std::string& v) {
  std::string lower;
  for (char c : v) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return lower == "true" || lower == "1";
}

}  // namespace

Volume read_metaimage(const std::filesystem::path& header) {
  const std::string what = "metaimage '" + header.string() + "'";
  const auto kv = parse_key_values(read_file_text(header), what);

  const auto ndims = parse_list<int64_t>(required(kv, "NDims", what), "NDims", what);
  require(ndims.size() == 1 && ndims[0] == 3, ErrorCode::Format, what + ": NDims must be 3");
  const auto size = parse_list<int64_t>(required(kv, "DimSize", what), "DimSize", what);
  require(size.size() == 3, ErrorCode::Format, what + ": DimSize needs three values");
  for (auto e : size) require(e >= 1, ErrorCode::Format, what + ": DimSize values must be >= 1");
  const std::string type = required(kv, "ElementType", what);
  const std::string data_file = required(kv, "ElementDataFile", what);

  for (const char* key : {"CompressedData"})
    if (auto it = kv.find(key); it != kv.end() && is_true(it->second))
      fail(ErrorCode::Format, what + ": compressed payloads are not supported");
  for (const char* key : {"BinaryDataByteOrderMSB", "ElementByteOrderMSB"})
    if (auto it = kv.find(key); it != kv.end() && is_true(it->second))
      fail(ErrorCode::Format, what + ": big-endian payloads are not supported");
  if (auto it = kv.find("ElementNumberOfChannels"); it != kv.end())
    require(trim(it->second) == "1", ErrorCode::Format, what + ": only single-channel volumes are supported");
  require(data_file != "LOCAL" && data_file != "LIST" && data_file.find('%') == std::string::npos,
          ErrorCode::Format, what + ": ElementDataFile must name a separate raw file (got '" + data_file + "')");

  size_t elem = 0;
  if (type == "MET_UCHAR") elem = 1;
  else if (type == "MET_SHORT") elem = 2;
  else if (type == "MET_FLOAT") elem = 4;
  else fail(ErrorCode::Format, what + ": unsupported ElementType " + type);

  int64_t header_size = 0;
  if (auto it = kv.find("HeaderSize"); it != kv.end()) {
    const auto hs = parse_list<int64_t>(it->second, "HeaderSize", what);
    require(hs.size() == 1 && hs[0] >= 0, ErrorCode::Format, what + ": HeaderSize must be a non-negative integer");
    header_size = hs[0];
  }

  Volume v({size[2], size[1], size[0]});
  if (auto it = kv.find("ElementSpacing"); it != kv.end()) {
    const auto sp = parse_list<double>(it->second, "ElementSpacing", what);
    require(sp.size() == 3, ErrorCode::Format, what + ": ElementSpacing needs three values");
    for (auto s : sp) require(s > 0 && std::isfinite(s), ErrorCode::Format, what + ": ElementSpacing must be > 0");
    v.spacing = {sp[2], sp[1], sp[0]};
  }

  const auto payload_path = header.parent_path() / data_file;
  const auto bytes = read_file_bytes(payload_path);
  const size_t expected = static_cast<size_t>(header_size) + static_cast<size_t>(v.size()) * elem;
  require(bytes.size() == expected, ErrorCode::Format,
          what + ": payload '" + payload_path.string() + "' has " + std::to_string(bytes.size()) +
              " bytes, expected " + std::to_string(expected));

  const unsigned char* p = bytes.data() + header_size;
  for (size_t i = 0; i < v.voxels.size(); ++i) {
    switch (elem) {
      case 1: v.voxels[i] = static_cast<float>(p[i]); break;
      case 2: v.voxels[i] = static_cast<float>(le::load_i16(p + 2 * i)); break;
      default: v.voxels[i] = le::load_f32(p + 4 * i); break;
    }
  }
  return v;
}

namespace {
constexpr const char* kVolumeFormat = "r2u3d-volume";
constexpr int kVolumeVersion = 1;

std::filesystem::path payload_path_for(const std::filesystem::path& manifest) {
  auto p = manifest;
  p += ".raw";
  return p;
}

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}
}  // namespace

void write_volume(const Volume& v, const std::filesystem::path& path) {
  v.validate();
  const auto payload = payload_path_for(path);
  const auto bytes = le::encode_f32(v.voxels);
  write_file_bytes(payload, bytes.data(), bytes.size());
  std::ostringstream m;
  m << "format = " << kVolumeFormat << "\n"
    << "version = " << kVolumeVersion << "\n"
    << "dims = " << v.dims[0] << " " << v.dims[1] << " " << v.dims[2] << "\n"
    << "spacing = " << format_double(v.spacing[0]) << " " << format_double(v.spacing[1]) << " "
    << format_double(v.spacing[2]) << "\n"
    << "dtype = f32\n"
    << "payload = " << payload.filename().string() << "\n";
  write_file_text(path, m.str());
}

Volume read_volume(const std::filesystem::path& path) {
  const std::string what = "volume '" + path.string() + "'";
  const auto kv = parse_key_values(read_file_text(path), what);
  require(required(kv, "format", what) == kVolumeFormat, ErrorCode::Format, what + ": not an internal volume manifest");
  require(required(kv, "version", what) == std::to_string(kVolumeVersion), ErrorCode::Format,
          what + ": unsupported version " + kv.at("version"));
  require(required(kv, "dtype", what) == "f32", ErrorCode::Format, what + ": unsupported dtype " + kv.at("dtype"));
  for (const auto& [key, _] : kv)
    require(key == "format" || key == "version" || key == "dims" || key == "spacing" || key == "dtype" ||
                key == "payload",
            ErrorCode::Format, what + ": unknown key " + key);
  const auto dims = parse_list<int64_t>(required(kv, "dims", what), "dims", what);
  require(dims.size() == 3, ErrorCode::Format, what + ": dims needs three values");
  for (auto e : dims) require(e >= 1, ErrorCode::Format, what + ": dims must be >= 1");
  const auto spacing = parse_list<double>(required(kv, "spacing", what), "spacing", what);
  require(spacing.size() == 3, ErrorCode::Format, what + ": spacing needs three values");
  for (auto s : spacing) require(s > 0 && std::isfinite(s), ErrorCode::Format, what + ": spacing must be > 0");
  const std::string payload = required(kv, "payload", what);
  require(std::filesystem::path(payload).filename().string() == payload, ErrorCode::Format,
          what + ": payload must be a file name beside the manifest");

  Volume v({dims[0], dims[1], dims[2]}, {spacing[0], spacing[1], spacing[2]});
  const auto bytes = read_file_bytes(path.parent_path() / payload);
  require(bytes.size() == v.voxels.size() * 4, ErrorCode::Format,
          what + ": payload has " + std::to_string(bytes.size()) + " bytes, expected " +
              std::to_string(v.voxels.size() * 4));
  le::decode_f32(bytes, v.voxels);
  return v;
}

Volume read_any_volume(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".mhd" ? read_metaimage(path) : read_volume(path);
}

}  // namespace r2u3d
