#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"

namespace r2u3d {

/// Spatial triple in (depth, height, width) order.
using Triple = std::array<int64_t, 3>;

std::string to_string(const Triple& t);

/// Extents of a dense [N, C, D, H, W] array. W is the fastest axis.
struct Shape5 {
  std::array<int64_t, 5> dims{0, 0, 0, 0, 0};

  Shape5() = default;
  Shape5(int64_t n, int64_t c, int64_t d, int64_t h, int64_t w) : dims{n, c, d, h, w} {}
  Shape5(int64_t n, int64_t c, const Triple& s) : dims{n, c, s[0], s[1], s[2]} {}

  int64_t n() const { return dims[0]; }
  int64_t c() const { return dims[1]; }
  int64_t d() const { return dims[2]; }
  int64_t h() const { return dims[3]; }
  int64_t w() const { return dims[4]; }
  Triple spatial() const { return {dims[2], dims[3], dims[4]}; }
  int64_t spatial_size() const { return dims[2] * dims[3] * dims[4]; }
  int64_t numel() const { return dims[0] * dims[1] * spatial_size(); }

  bool operator==(const Shape5&) const = default;

  std::string str() const;
};

inline Shape5 scalar_shape() { return {1, 1, 1, 1, 1}; }

template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(const Shape5& shape, T fill = T(0)) : shape_(shape) {
    for (auto e : shape.dims)
      require(e >= 0, ErrorCode::InvalidArgument, "negative tensor extent in " + shape.str());
    data_.assign(static_cast<size_t>(shape.numel()), fill);
  }

  Tensor(const Shape5& shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    require(static_cast<int64_t>(data_.size()) == shape.numel(), ErrorCode::ShapeMismatch,
            "data length " + std::to_string(data_.size()) + " does not match shape " + shape.str());
  }

  const Shape5& shape() const { return shape_; }
  int64_t numel() const { return shape_.numel(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

  T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  int64_t offset(int64_t n, int64_t c, int64_t d, int64_t h, int64_t w) const {
    return (((n * shape_.c() + c) * shape_.d() + d) * shape_.h() + h) * shape_.w() + w;
  }
  T& at(int64_t n, int64_t c, int64_t d, int64_t h, int64_t w) { return data_[offset(n, c, d, h, w)]; }
  const T& at(int64_t n, int64_t c, int64_t d, int64_t h, int64_t w) const {
    return data_[offset(n, c, d, h, w)];
  }

  bool has_grad() const { return !grad_.empty() || shape_.numel() == 0; }

  /// Allocates the gradient slot if absent; leaves existing contents untouched.
  std::span<T> ensure_grad() {
    if (grad_.size() != data_.size()) grad_.assign(data_.size(), T(0));
    return grad_;
  }
  void zero_grad() { grad_.assign(data_.size(), T(0)); }
  void clear_grad() { grad_.clear(); grad_.shrink_to_fit(); }

  std::span<T> grad() { return grad_; }
  std::span<const T> grad() const { return grad_; }

 private:
  Shape5 shape_;
  std::vector<T> data_;
  std::vector<T> grad_;
};

template <typename T>
using TensorPtr = std::shared_ptr<Tensor<T>>;

template <typename T>
TensorPtr<T> make_tensor(const Shape5& shape, T fill = T(0)) {
  return std::make_shared<Tensor<T>>(shape, fill);
}

template <typename T>
TensorPtr<T> make_tensor(const Shape5& shape, std::vector<T> data) {
  return std::make_shared<Tensor<T>>(shape, std::move(data));
}

template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& src) {
  std::vector<To> out(src.values().begin(), src.values().end());
  return Tensor<To>(src.shape(), std::move(out));
}

template <typename T>
bool all_finite(std::span<const T> values) {
  return std::all_of(values.begin(), values.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
void require_finite(const Tensor<T>& t, const std::string& op) {
  require(all_finite<T>(t.data()), ErrorCode::NonFinite, op + ": non-finite value in input");
}

}  // namespace r2u3d
