#ifndef MSUNET_TENSOR_H_
#define MSUNET_TENSOR_H_

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace msunet {

using Shape = std::vector<int>;

// Dense row-major float32 array. The only numeric carrier for images,
// activations and gradients.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> data);

  static Tensor Zeros(Shape shape) { return Tensor(std::move(shape), 0.0f); }
  static Tensor ZerosLike(const Tensor& t) { return Tensor(t.shape_, 0.0f); }

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<size_t>(i < 0 ? rank() + i : i)); }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  std::span<float> values() { return data_; }
  std::span<const float> values() const { return data_; }
  std::vector<float>& storage() { return data_; }
  const std::vector<float>& storage() const { return data_; }

  float& operator[](size_t i) { return data_[i]; }
  float operator[](size_t i) const { return data_[i]; }

  // 2-D / 4-D accessors (no bounds checks beyond debug asserts).
  float& at(int y, int x) { return data_[static_cast<size_t>(y) * shape_[1] + x]; }
  float at(int y, int x) const { return data_[static_cast<size_t>(y) * shape_[1] + x]; }

  // Returns a copy with a new shape of equal element count.
  Tensor Reshaped(Shape shape) const;
  void Reshape(Shape shape);

  void Fill(float v);
  // this += other (shapes must match).
  void Add(const Tensor& other);
  bool AllFinite() const;

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<float> data_;
};

size_t NumElements(const Shape& shape);
std::string ShapeString(const Shape& shape);

}  // namespace msunet

#endif  // MSUNET_TENSOR_H_
