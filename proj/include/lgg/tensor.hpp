#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace lgg {

using NodeId = std::int32_t;
inline constexpr NodeId kNoNode = -1;

// Dense row-major 64-bit float array. A rank-0 tensor is a scalar (one
// element). `node` optionally links the value into the active Graph; it is
// transport only and never affects numerics.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::int64_t> shape);
  Tensor(std::vector<std::int64_t> shape, std::vector<double> data);

  static Tensor scalar(double v);
  static Tensor full(std::vector<std::int64_t> shape, double v);
  static Tensor zeros_like(const Tensor& t);

  const std::vector<std::int64_t>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  std::int64_t extent(int axis) const;
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  // Bounds-checked multi-index access; convenience for tests and small code.
  double& at(std::initializer_list<std::int64_t> idx);
  double at(std::initializer_list<std::int64_t> idx) const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;
  double item() const;  // requires size() == 1

  std::string shape_str() const;

  NodeId node = kNoNode;

 private:
  std::int64_t flat_index(std::initializer_list<std::int64_t> idx) const;

  std::vector<std::int64_t> shape_;
  std::vector<double> data_;
};

std::int64_t shape_product(const std::vector<std::int64_t>& shape);
std::string shape_to_string(const std::vector<std::int64_t>& shape);

// Contiguous slice along one axis; plain value op, not recorded on any tape.
Tensor slice_axis(const Tensor& t, int axis, std::int64_t start, std::int64_t count);

}  // namespace lgg
