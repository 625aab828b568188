#include "lgg/tensor.hpp"

#include <cmath>
#include <sstream>

#include "lgg/errors.hpp"

namespace lgg {

std::int64_t shape_product(const std::vector<std::int64_t>& shape) {
  std::int64_t n = 1;
  for (std::int64_t e : shape) n *= e;
  return n;
}

std::string shape_to_string(const std::vector<std::int64_t>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

namespace {
void check_extents(const std::vector<std::int64_t>& shape) {
  for (std::int64_t e : shape) {
    if (e < 1) throw ShapeError("tensor extent must be >= 1, got shape " + shape_to_string(shape));
  }
}
}  // namespace

Tensor::Tensor(std::vector<std::int64_t> shape) : shape_(std::move(shape)) {
  check_extents(shape_);
  data_.assign(static_cast<std::size_t>(shape_product(shape_)), 0.0);
}

Tensor::Tensor(std::vector<std::int64_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_extents(shape_);
  if (static_cast<std::int64_t>(data_.size()) != shape_product(shape_)) {
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                     shape_to_string(shape_));
  }
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

Tensor Tensor::full(std::vector<std::int64_t> shape, double v) {
  Tensor t(std::move(shape));
  for (auto& x : t.data_) x = v;
  return t;
}

Tensor Tensor::zeros_like(const Tensor& t) { return Tensor(t.shape_); }

std::int64_t Tensor::extent(int axis) const {
  if (axis < 0 || axis >= rank()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str());
  }
  return shape_[static_cast<std::size_t>(axis)];
}

std::int64_t Tensor::flat_index(std::initializer_list<std::int64_t> idx) const {
  if (static_cast<int>(idx.size()) != rank()) {
    throw ShapeError("index rank " + std::to_string(idx.size()) + " does not match " + shape_str());
  }
  std::int64_t flat = 0;
  int axis = 0;
  for (std::int64_t i : idx) {
    if (i < 0 || i >= shape_[static_cast<std::size_t>(axis)]) {
      throw ShapeError("index out of bounds for " + shape_str());
    }
    flat = flat * shape_[static_cast<std::size_t>(axis)] + i;
    ++axis;
  }
  return flat;
}

double& Tensor::at(std::initializer_list<std::int64_t> idx) {
  return data_[static_cast<std::size_t>(flat_index(idx))];
}

double Tensor::at(std::initializer_list<std::int64_t> idx) const {
  return data_[static_cast<std::size_t>(flat_index(idx))];
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item() requires a single-element tensor, got " + shape_str());
  return data_[0];
}

std::string Tensor::shape_str() const { return shape_to_string(shape_); }

Tensor slice_axis(const Tensor& t, int axis, std::int64_t start, std::int64_t count) {
  if (axis < 0 || axis >= t.rank()) throw ShapeError("slice axis out of range");
  if (start < 0 || count < 1 || start + count > t.extent(axis)) {
    throw ShapeError("slice range [" + std::to_string(start) + ", " + std::to_string(start + count) +
                     ") out of bounds for " + t.shape_str());
  }
  std::vector<std::int64_t> out_shape = t.shape();
  out_shape[static_cast<std::size_t>(axis)] = count;

  std::int64_t outer = 1, inner = 1;
  for (int a = 0; a < axis; ++a) outer *= t.extent(a);
  for (int a = axis + 1; a < t.rank(); ++a) inner *= t.extent(a);

  Tensor out(out_shape);
  const std::int64_t in_stride = t.extent(axis) * inner;
  const std::int64_t out_stride = count * inner;
  for (std::int64_t o = 0; o < outer; ++o) {
    const double* src = t.data() + o * in_stride + start * inner;
    double* dst = out.data() + o * out_stride;
    for (std::int64_t i = 0; i < count * inner; ++i) dst[i] = src[i];
  }
  return out;
}

}  // namespace lgg
