#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace respscl {

template <typename T>
using EMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using EMatMap = Eigen::Map<EMat<T>>;
template <typename T>
using EMatCMap = Eigen::Map<const EMat<T>>;

// Dense row-major n-d array. Shapes are explicit; views into the flat buffer
// are taken as Eigen maps where matrix algebra is needed.
template <typename T>
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int64_t> s) : shape(std::move(s)) {
    data.assign(static_cast<size_t>(numel_of(shape)), T{0});
  }

  static int64_t numel_of(const std::vector<int64_t>& s) {
    int64_t n = 1;
    for (int64_t d : s) {
      if (d < 0) {
        throw std::invalid_argument("Tensor: negative dimension");
      }
      n *= d;
    }
    return n;
  }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  bool empty() const { return data.empty(); }
  int64_t dim(size_t i) const { return shape.at(i); }
  int rank() const { return static_cast<int>(shape.size()); }

  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }

  void set_zero() { std::fill(data.begin(), data.end(), T{0}); }

  EMatMap<T> as_matrix(int64_t rows, int64_t cols) {
    if (rows * cols != numel()) {
      throw std::invalid_argument("Tensor::as_matrix: shape mismatch");
    }
    return EMatMap<T>(data.data(), rows, cols);
  }
  EMatCMap<T> as_matrix(int64_t rows, int64_t cols) const {
    if (rows * cols != numel()) {
      throw std::invalid_argument("Tensor::as_matrix: shape mismatch");
    }
    return EMatCMap<T>(data.data(), rows, cols);
  }

  std::string shape_str() const {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
      if (i) {
        s += "x";
      }
      s += std::to_string(shape[i]);
    }
    return s + "]";
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

}  // namespace respscl
