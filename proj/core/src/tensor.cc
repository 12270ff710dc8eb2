#include "msunet/tensor.h"

#include <cmath>

#include "msunet/error.h"

namespace msunet {

size_t NumElements(const Shape& shape) {
  size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ShapeError("negative dimension in " + ShapeString(shape));
    n *= static_cast<size_t>(d);
  }
  return n;
}

std::string ShapeString(const Shape& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape shape, float fill)
    : shape_(std::move(shape)), data_(NumElements(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (NumElements(shape_) != data_.size()) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + ShapeString(shape_));
  }
}

Tensor Tensor::Reshaped(Shape shape) const {
  Tensor t = *this;
  t.Reshape(std::move(shape));
  return t;
}

void Tensor::Reshape(Shape shape) {
  if (NumElements(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + ShapeString(shape_) + " to " + ShapeString(shape));
  }
  shape_ = std::move(shape);
}

void Tensor::Fill(float v) {
  for (float& x : data_) x = v;
}

void Tensor::Add(const Tensor& other) {
  if (other.shape_ != shape_) {
    throw ShapeError("add: " + ShapeString(shape_) + " vs " + ShapeString(other.shape_));
  }
  for (size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
}

bool Tensor::AllFinite() const {
  for (float x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace msunet
