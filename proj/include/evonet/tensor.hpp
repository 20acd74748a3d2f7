#pragma once

#include <cassert>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

namespace evonet {

/// Dense row-major float tensor, rank 1..4. Activations are laid out
/// batch x height x width x channels; convolution filters kh x kw x cin x cout.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> dims, float fill = 0.0f)
      : dims_(std::move(dims)), data_(numel_of(dims_), fill) {}

  static Tensor zeros(std::vector<int> dims) { return Tensor(std::move(dims)); }

  const std::vector<int>& dims() const { return dims_; }
  int rank() const { return int(dims_.size()); }
  int dim(int i) const { return dims_[size_t(i)]; }
  size_t numel() const { return data_.size(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  float& operator[](size_t i) { return data_[i]; }
  float operator[](size_t i) const { return data_[i]; }

  /// NHWC addressing for rank-4 activations.
  float& at4(int n, int h, int w, int c) {
    return data_[((size_t(n) * dims_[1] + h) * dims_[2] + w) * dims_[3] + c];
  }
  float at4(int n, int h, int w, int c) const {
    return data_[((size_t(n) * dims_[1] + h) * dims_[2] + w) * dims_[3] + c];
  }
  /// HWC addressing for rank-3 activations.
  float& at3(int h, int w, int c) {
    return data_[(size_t(h) * dims_[1] + w) * dims_[2] + c];
  }
  float at3(int h, int w, int c) const {
    return data_[(size_t(h) * dims_[1] + w) * dims_[2] + c];
  }

  bool same_shape(const Tensor& other) const { return dims_ == other.dims_; }

  void fill(float v) { std::fill(data_.begin(), data_.end(), v); }

  static size_t numel_of(const std::vector<int>& dims) {
    size_t n = 1;
    for (int d : dims) n *= size_t(d);
    return n;
  }

  static std::string shape_string(const std::vector<int>& dims) {
    std::string s = "(";
    for (size_t i = 0; i < dims.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(dims[i]);
    }
    return s + ")";
  }

 private:
  std::vector<int> dims_;
  std::vector<float> data_;
};

}  // namespace evonet
