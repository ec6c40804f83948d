#pragma once

// Row-major dense linear operator applied through the dispatched SIMD
// kernels. Used for the precomputed "coefficients -> point values" maps.

#include <Eigen/Dense>

#include <vector>

namespace regmap {

class DenseOp {
 public:
  DenseOp() = default;
  DenseOp(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  explicit DenseOp(const Eigen::MatrixXd& m);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double* row(std::size_t r) { return data_.data() + r * cols_; }
  const double* row(std::size_t r) const { return data_.data() + r * cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  /// y = A x
  void apply(const double* x, double* y) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  /// y = A^T x
  void apply_t(const double* x, double* y) const;
  Eigen::VectorXd apply_t(const Eigen::VectorXd& x) const;

  /// A W (W is cols x m).
  DenseOp times(const Eigen::MatrixXd& w) const;
  Eigen::MatrixXd to_matrix() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

}  // namespace regmap
