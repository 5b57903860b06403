#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "v2ir/common.hpp"

namespace v2ir {

using Shape = std::vector<int>;

inline std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ')';
  return os.str();
}

// Dense row-major tensor. Image batches use NCHW layout. The grad buffer is
// empty until backward() allocates it; when present it matches data in size.
template <class T>
struct Tensor {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;

  Tensor() = default;

  explicit Tensor(Shape s, T fill = T(0)) : shape(std::move(s)) {
    for (int d : shape) require(d > 0, "tensor extents must be positive, got " + shape_str(shape));
    data.assign(static_cast<std::size_t>(shape_numel(shape)), fill);
  }

  Tensor(Shape s, std::vector<T> values) : shape(std::move(s)), data(std::move(values)) {
    for (int d : shape) require(d > 0, "tensor extents must be positive, got " + shape_str(shape));
    require(static_cast<std::int64_t>(data.size()) == shape_numel(shape),
            "tensor data length does not match shape " + shape_str(shape));
  }

  static Tensor scalar(T v) { return Tensor(Shape{1}, std::vector<T>{v}); }

  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
  int dim(std::size_t i) const { return shape[i]; }
  std::size_t ndim() const { return shape.size(); }

  bool has_grad() const { return !grad.empty(); }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
  }
  void zero_grad() { grad.assign(data.size(), T(0)); }

  // 4-d accessors for NCHW code paths.
  T& at(int n, int c, int h, int w) {
    return data[((static_cast<std::size_t>(n) * shape[1] + c) * shape[2] + h) * shape[3] + w];
  }
  const T& at(int n, int c, int h, int w) const {
    return data[((static_cast<std::size_t>(n) * shape[1] + c) * shape[2] + h) * shape[3] + w];
  }

  bool all_finite() const {
    for (T v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }
};

template <class T>
using TensorPtr = std::shared_ptr<Tensor<T>>;

template <class T>
TensorPtr<T> make_tensor(Shape s, T fill = T(0)) {
  return std::make_shared<Tensor<T>>(std::move(s), fill);
}

template <class T>
TensorPtr<T> make_tensor(Shape s, std::vector<T> values) {
  return std::make_shared<Tensor<T>>(std::move(s), std::move(values));
}

template <class T>
bool same_shape(const Tensor<T>& a, const Tensor<T>& b) {
  return a.shape == b.shape;
}

}  // namespace v2ir
