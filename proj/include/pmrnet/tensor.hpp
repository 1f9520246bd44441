#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pmrnet/errors.hpp"

namespace pmrnet {

// Spatial extent of a feature map or image.
struct Extent {
  std::size_t height = 0;
  std::size_t width = 0;

  friend bool operator==(const Extent&, const Extent&) = default;
  std::string to_string() const;
};

// NCHW shape of a dense 4-axis array.
struct Shape {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t size() const { return n * c * h * w; }
  std::size_t plane() const { return h * w; }
  Extent extent() const { return {h, w}; }

  friend bool operator==(const Shape&, const Shape&) = default;
  std::string to_string() const;
};

// Dense row-major NCHW array. Plain value type: copies are deep.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{})
      : shape_(shape), data_(shape.size(), fill) {}

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::size_t offset(std::size_t n, std::size_t c, std::size_t h,
                     std::size_t w) const {
    return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[offset(n, c, h, w)];
  }
  const T& at(std::size_t n, std::size_t c, std::size_t h,
              std::size_t w) const {
    return data_[offset(n, c, h, w)];
  }

  T* plane(std::size_t n, std::size_t c) {
    return data_.data() + (n * shape_.c + c) * shape_.plane();
  }
  const T* plane(std::size_t n, std::size_t c) const {
    return data_.data() + (n * shape_.c + c) * shape_.plane();
  }

  void fill(T v) { data_.assign(data_.size(), v); }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (std::size_t i = 0; i < data_.size(); ++i) {
      out[i] = static_cast<U>(data_[i]);
    }
    return out;
  }

  // Copy of sample n as a batch of one.
  Tensor slice_batch(std::size_t n) const {
    Shape s = shape_;
    s.n = 1;
    Tensor out(s);
    const std::size_t stride = s.size();
    std::copy(data_.begin() + n * stride, data_.begin() + (n + 1) * stride,
              out.data_.begin());
    return out;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

// Concatenate batches of one (or more) along the batch axis.
template <typename T>
Tensor<T> stack_batch(std::span<const Tensor<T>> items) {
  if (items.empty()) return {};
  Shape s = items.front().shape();
  std::size_t n = 0;
  for (const auto& t : items) {
    const Shape& ts = t.shape();
    if (ts.c != s.c || ts.h != s.h || ts.w != s.w) {
      throw ShapeError("stack_batch: " + ts.to_string() + " vs " +
                       s.to_string());
    }
    n += ts.n;
  }
  s.n = n;
  Tensor<T> out(s);
  std::size_t pos = 0;
  for (const auto& t : items) {
    std::copy(t.data(), t.data() + t.size(), out.data() + pos);
    pos += t.size();
  }
  return out;
}

}  // namespace pmrnet
