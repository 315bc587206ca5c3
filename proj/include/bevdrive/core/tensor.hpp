#pragma once

#include <Eigen/Core>

#include <cassert>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace bevdrive {

/// Dense row-major n-d array. Small fixed surface: shape bookkeeping plus
/// Eigen views for the hot linear-algebra paths.
template <typename S>
class Tensor {
 public:
  using Scalar = S;
  using MatrixMap =
      Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using ConstMatrixMap =
      Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

  Tensor() = default;
  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(computeNumel(shape_), S(0));
  }
  Tensor(std::vector<int> shape, S fill) : shape_(std::move(shape)) {
    data_.assign(computeNumel(shape_), fill);
  }
  Tensor(std::vector<int> shape, std::vector<S> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (static_cast<std::int64_t>(data_.size()) != computeNumel(shape_))
      throw std::invalid_argument("tensor: data size does not match shape");
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int> shape, S v) { return Tensor(std::move(shape), v); }
  static Tensor scalar(S v) { return Tensor({1}, std::vector<S>{v}); }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(i); }
  std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  S* data() { return data_.data(); }
  const S* data() const { return data_.data(); }
  std::vector<S>& raw() { return data_; }
  const std::vector<S>& raw() const { return data_; }

  S& operator[](std::int64_t i) { return data_[i]; }
  S operator[](std::int64_t i) const { return data_[i]; }

  S& at(int i, int j) { return data_[static_cast<std::int64_t>(i) * dim(1) + j]; }
  S at(int i, int j) const { return data_[static_cast<std::int64_t>(i) * dim(1) + j]; }
  S& at(int i, int j, int k) {
    return data_[(static_cast<std::int64_t>(i) * dim(1) + j) * dim(2) + k];
  }
  S at(int i, int j, int k) const {
    return data_[(static_cast<std::int64_t>(i) * dim(1) + j) * dim(2) + k];
  }
  S& at(int i, int j, int k, int l) {
    return data_[((static_cast<std::int64_t>(i) * dim(1) + j) * dim(2) + k) * dim(3) + l];
  }
  S at(int i, int j, int k, int l) const {
    return data_[((static_cast<std::int64_t>(i) * dim(1) + j) * dim(2) + k) * dim(3) + l];
  }

  /// View as a rows x cols row-major matrix; total size must match.
  MatrixMap asMatrix(int rows, int cols) {
    assert(static_cast<std::int64_t>(rows) * cols == numel());
    return MatrixMap(data_.data(), rows, cols);
  }
  ConstMatrixMap asMatrix(int rows, int cols) const {
    assert(static_cast<std::int64_t>(rows) * cols == numel());
    return ConstMatrixMap(data_.data(), rows, cols);
  }

  Tensor reshaped(std::vector<int> shape) const {
    if (computeNumel(shape) != numel())
      throw std::invalid_argument("tensor: reshape size mismatch");
    Tensor out;
    out.shape_ = std::move(shape);
    out.data_ = data_;
    return out;
  }

  void fill(S v) { std::fill(data_.begin(), data_.end(), v); }

  template <typename T>
  Tensor<T> cast() const {
    Tensor<T> out;
    out = Tensor<T>(shape_);
    for (std::int64_t i = 0; i < numel(); ++i) out[i] = static_cast<T>(data_[i]);
    return out;
  }

  bool sameShape(const Tensor& o) const { return shape_ == o.shape_; }

  static std::int64_t computeNumel(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int d : shape) {
      if (d < 0) throw std::invalid_argument("tensor: negative dim");
      n *= d;
    }
    return shape.empty() ? 0 : n;
  }

 private:
  std::vector<int> shape_;
  std::vector<S> data_;
};

}  // namespace bevdrive
