#include "params.hpp"

namespace r2u3d {

size_t ParamLayout::add(const std::string& path, const Shape5& shape) {
  require(!index_.contains(path), ErrorCode::Config, "duplicate parameter path " + path);
  const size_t i = paths_.size();
  paths_.push_back(path);
  shapes_.push_back(shape);
  index_.emplace(path, i);
  return i;
}

std::optional<size_t> ParamLayout::find(const std::string& path) const {
  auto it = index_.find(path);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int64_t ParamLayout::total_elements() const {
  int64_t total = 0;
  for (const auto& s : shapes_) total += s.numel();
  return total;
}

}  // namespace r2u3d
