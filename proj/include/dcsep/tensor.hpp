#pragma once

#include <Eigen/Core>

#include <initializer_list>
#include <numeric>
#include <vector>

#include "dcsep/error.hpp"

namespace dcsep::nn {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

// Dense tensor of doubles in row-major order (last axis fastest).
// Rank is dynamic; all network activations and parameters use this type.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<Eigen::Index> shape)
      : shape_(std::move(shape)), data_(Eigen::ArrayXd::Zero(count(shape_))) {}

  Tensor(std::initializer_list<Eigen::Index> shape)
      : Tensor(std::vector<Eigen::Index>(shape)) {}

  static Tensor zeros(std::vector<Eigen::Index> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<Eigen::Index> shape, double v) {
    Tensor t(std::move(shape));
    t.data_.setConstant(v);
    return t;
  }

  static Tensor from(std::vector<Eigen::Index> shape, Eigen::ArrayXd values) {
    if (values.size() != count(shape)) throw ShapeError("tensor data does not match shape");
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::move(values);
    return t;
  }

  int rank() const { return static_cast<int>(shape_.size()); }
  const std::vector<Eigen::Index>& shape() const { return shape_; }
  Eigen::Index dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  Eigen::Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  Eigen::ArrayXd& array() { return data_; }
  const Eigen::ArrayXd& array() const { return data_; }

  double& operator[](Eigen::Index i) { return data_[i]; }
  double operator[](Eigen::Index i) const { return data_[i]; }

  double& operator()(Eigen::Index i, Eigen::Index j) { return data_[i * shape_[1] + j]; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return data_[i * shape_[1] + j]; }

  double& operator()(Eigen::Index i, Eigen::Index j, Eigen::Index k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double operator()(Eigen::Index i, Eigen::Index j, Eigen::Index k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  // Views the flat storage as a rows x cols row-major matrix.
  MatMap as_matrix(Eigen::Index rows, Eigen::Index cols) {
    if (rows * cols != size()) throw ShapeError("matrix view does not cover tensor");
    return MatMap(data_.data(), rows, cols);
  }
  ConstMatMap as_matrix(Eigen::Index rows, Eigen::Index cols) const {
    if (rows * cols != size()) throw ShapeError("matrix view does not cover tensor");
    return ConstMatMap(data_.data(), rows, cols);
  }

  // Rank-2 and rank-3 tensors have a canonical matrix view: trailing axis = columns.
  MatMap as_matrix() {
    const Eigen::Index c = last_dim();
    return as_matrix(c == 0 ? 0 : size() / c, c);
  }
  ConstMatMap as_matrix() const {
    const Eigen::Index c = last_dim();
    return as_matrix(c == 0 ? 0 : size() / c, c);
  }

  Tensor reshaped(std::vector<Eigen::Index> shape) const {
    if (count(shape) != size()) throw ShapeError("reshape changes element count");
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = data_;
    return t;
  }

  void set_zero() { data_.setZero(); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  static Eigen::Index count(const std::vector<Eigen::Index>& shape) {
    Eigen::Index n = 1;
    for (Eigen::Index d : shape) n *= d;
    return n;
  }

 private:
  Eigen::Index last_dim() const {
    if (shape_.empty()) throw ShapeError("matrix view of rank-0 tensor");
    return shape_.back();
  }

  std::vector<Eigen::Index> shape_;
  Eigen::ArrayXd data_;
};

}  // namespace dcsep::nn
