#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <cstring>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "vtd/errors.hpp"

namespace vtd {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

// Dense double tensor, flat row-major storage. Elementwise work goes through
// `data` (an Eigen array); matrix work through mat()/as_mat() maps.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int64_t> shape) : shape_(std::move(shape)) {
    data = Eigen::ArrayXd::Zero(count(shape_));
  }

  Tensor(std::initializer_list<int64_t> shape)
      : Tensor(std::vector<int64_t>(shape)) {}

  static Tensor zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<int64_t> shape, double v) {
    Tensor t(std::move(shape));
    t.data.setConstant(v);
    return t;
  }

  static Tensor from_vector(std::vector<int64_t> shape, const std::vector<double>& v) {
    Tensor t(std::move(shape));
    if (static_cast<int64_t>(v.size()) != t.numel())
      throw ShapeMismatch("from_vector: element count mismatch");
    for (int64_t i = 0; i < t.numel(); ++i) t.data[i] = v[static_cast<size_t>(i)];
    return t;
  }

  int64_t numel() const { return data.size(); }
  int ndim() const { return static_cast<int>(shape_.size()); }
  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t dim(int i) const { return shape_.at(static_cast<size_t>(i)); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  double& operator[](int64_t i) { return data[i]; }
  double operator[](int64_t i) const { return data[i]; }

  double& at(int64_t i, int64_t j) { return data[i * dim(1) + j]; }
  double at(int64_t i, int64_t j) const { return data[i * dim(1) + j]; }

  double& at(int64_t i, int64_t j, int64_t k) {
    return data[(i * dim(1) + j) * dim(2) + k];
  }
  double at(int64_t i, int64_t j, int64_t k) const {
    return data[(i * dim(1) + j) * dim(2) + k];
  }

  double& at(int64_t i, int64_t j, int64_t k, int64_t l) {
    return data[((i * dim(1) + j) * dim(2) + k) * dim(3) + l];
  }
  double at(int64_t i, int64_t j, int64_t k, int64_t l) const {
    return data[((i * dim(1) + j) * dim(2) + k) * dim(3) + l];
  }

  // 2D matrix view; for higher-rank tensors as_mat collapses leading dims.
  MatMap mat() {
    if (ndim() != 2) throw ShapeMismatch("mat() on tensor of rank " + std::to_string(ndim()));
    return MatMap(data.data(), dim(0), dim(1));
  }
  ConstMatMap mat() const {
    if (ndim() != 2) throw ShapeMismatch("mat() on tensor of rank " + std::to_string(ndim()));
    return ConstMatMap(data.data(), dim(0), dim(1));
  }
  MatMap as_mat(int64_t rows, int64_t cols) {
    if (rows * cols != numel()) throw ShapeMismatch("as_mat: element count mismatch");
    return MatMap(data.data(), rows, cols);
  }
  ConstMatMap as_mat(int64_t rows, int64_t cols) const {
    if (rows * cols != numel()) throw ShapeMismatch("as_mat: element count mismatch");
    return ConstMatMap(data.data(), rows, cols);
  }

  Tensor reshaped(std::vector<int64_t> new_shape) const {
    Tensor t = *this;
    if (count(new_shape) != numel()) throw ShapeMismatch("reshaped: element count mismatch");
    t.shape_ = std::move(new_shape);
    return t;
  }

  bool all_finite() const { return data.isFinite().all(); }

  bool bitwise_equal(const Tensor& o) const {
    if (shape_ != o.shape_) return false;
    return std::memcmp(data.data(), o.data.data(), sizeof(double) * static_cast<size_t>(numel())) == 0;
  }

  Eigen::ArrayXd data;

 private:
  static int64_t count(const std::vector<int64_t>& s) {
    return std::accumulate(s.begin(), s.end(), int64_t{1}, std::multiplies<int64_t>());
  }

  std::vector<int64_t> shape_;
};

}  // namespace vtd
