#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "tensor.hpp"

namespace r2u3d {

/// One row of a model summary: a layer, its output channels, the number of
/// 2x downsamplings between the network input and its output, and the
/// parameters it owns.
struct LayerRecord {
  std::string name;
  int64_t out_channels = 0;
  int scale_shift = 0;
  std::vector<size_t> params;
};

/// Ordered registry of parameter paths and shapes plus the layer table.
class ParamLayout {
 public:
  size_t add(const std::string& path, const Shape5& shape);
  void add_layer(LayerRecord layer) { layers_.push_back(std::move(layer)); }

  size_t size() const { return paths_.size(); }
  const std::string& path(size_t i) const { return paths_.at(i); }
  const Shape5& shape(size_t i) const { return shapes_.at(i); }
  std::optional<size_t> find(const std::string& path) const;
  int64_t total_elements() const;
  const std::vector<LayerRecord>& layers() const { return layers_; }

 private:
  std::vector<std::string> paths_;
  std::vector<Shape5> shapes_;
  std::unordered_map<std::string, size_t> index_;
  std::vector<LayerRecord> layers_;
};

/// Parameter values in layout order.
template <typename T>
class ParamStore {
 public:
  ParamStore() = default;
  explicit ParamStore(const ParamLayout& layout) {
    tensors_.reserve(layout.size());
    for (size_t i = 0; i < layout.size(); ++i) tensors_.push_back(make_tensor<T>(layout.shape(i)));
  }

  size_t size() const { return tensors_.size(); }
  const TensorPtr<T>& operator[](size_t i) const { return tensors_.at(i); }
  TensorPtr<T>& operator[](size_t i) { return tensors_.at(i); }
  /// Null for an absent optional parameter.
  TensorPtr<T> get(const std::optional<size_t>& i) const { return i ? tensors_.at(*i) : nullptr; }

  void zero_grad() {
    for (auto& t : tensors_) t->zero_grad();
  }

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& t : tensors_) out.push(std::make_shared<Tensor<U>>(tensor_cast<U>(*t)));
    return out;
  }

  void push(TensorPtr<T> t) { tensors_.push_back(std::move(t)); }

 private:
  std::vector<TensorPtr<T>> tensors_;
};

}  // namespace r2u3d
