#include "regmap/dense_op.hpp"

#include "regmap/simd/kernels.hpp"

#include <algorithm>

namespace regmap {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

DenseOp::DenseOp(const Eigen::MatrixXd& m) : DenseOp(m.rows(), m.cols()) {
  Eigen::Map<RowMajor>(data_.data(), rows_, cols_) = m;
}

void DenseOp::apply(const double* x, double* y) const {
  if (rows_ == 0) return;
  if (cols_ == 0) {
    std::fill(y, y + rows_, 0.0);
    return;
  }
  simd::kernels().gemv(data_.data(), rows_, cols_, x, y);
}

Eigen::VectorXd DenseOp::apply(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y(rows_);
  apply(x.data(), y.data());
  return y;
}

void DenseOp::apply_t(const double* x, double* y) const {
  if (cols_ == 0) return;
  if (rows_ == 0) {
    std::fill(y, y + cols_, 0.0);
    return;
  }
  simd::kernels().gemv_t(data_.data(), rows_, cols_, x, y);
}

Eigen::VectorXd DenseOp::apply_t(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y(cols_);
  apply_t(x.data(), y.data());
  return y;
}

DenseOp DenseOp::times(const Eigen::MatrixXd& w) const {
  DenseOp out(rows_, w.cols());
  Eigen::Map<RowMajor>(out.data_.data(), rows_, w.cols()) =
      Eigen::Map<const RowMajor>(data_.data(), rows_, cols_) * w;
  return out;
}

Eigen::MatrixXd DenseOp::to_matrix() const { return Eigen::Map<const RowMajor>(data_.data(), rows_, cols_); }

}  // namespace regmap
