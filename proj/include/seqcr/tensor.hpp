#pragma once

#include <cstddef>
#include <initializer_list>
#include <new>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace seqcr {

/// 64-byte aligned storage. Vectorised kernels pick their code path from the
/// buffer alignment, so a fixed alignment keeps results bitwise reproducible.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

using AlignedBuffer = std::vector<double, AlignedAllocator<double>>;

/// Dense row-major array of doubles with a dynamic shape.
///
/// Images use (C, H, W); network activations use (C, T, H, W) with an
/// implicit batch of one.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, double fill = 0.0);
  Tensor(std::vector<int> shape, std::vector<double> values);

  const std::vector<int>& shape() const { return shape_; }
  int dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t ndim() const { return shape_.size(); }
  std::size_t numel() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  double& at(int i0, int i1, int i2) { return values_[offset3(i0, i1, i2)]; }
  double at(int i0, int i1, int i2) const { return values_[offset3(i0, i1, i2)]; }
  double& at(int i0, int i1) { return values_[static_cast<std::size_t>(i0) * shape_[1] + i1]; }
  double at(int i0, int i1) const { return values_[static_cast<std::size_t>(i0) * shape_[1] + i1]; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  /// Same values under a new shape with identical element count.
  Tensor reshaped(std::vector<int> shape) const;

  void fill(double v);

  bool operator==(const Tensor& other) const = default;

 private:
  std::size_t offset3(int i0, int i1, int i2) const {
    return (static_cast<std::size_t>(i0) * shape_[1] + i1) * shape_[2] + i2;
  }

  std::vector<int> shape_;
  AlignedBuffer values_;
};

std::size_t shape_numel(const std::vector<int>& shape);
std::string shape_string(const std::vector<int>& shape);

}  // namespace seqcr
