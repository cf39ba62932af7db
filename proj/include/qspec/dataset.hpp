#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace qspec {

//! Axis-aligned box.
struct Box
{
  std::vector<double> lo;
  std::vector<double> hi;

  std::size_t dim() const noexcept { return lo.size(); }
  bool contains(std::span<const double> x) const;
  //! Shrink every side by `margin`; sides that would cross collapse to the
  //! midpoint.
  Box shrunk(double margin) const;
};

//! n observations (X_i, Y_i) with X_i in the support box. Immutable after
//! construction.
class Dataset
{
public:
  //! Support defaults to the per-axis data range.
  Dataset(Eigen::MatrixXd x, Eigen::VectorXd y);
  Dataset(Eigen::MatrixXd x, Eigen::VectorXd y, Box support);

  std::size_t size() const noexcept { return static_cast<std::size_t>(y_.size()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(x_.cols()); }
  const Eigen::MatrixXd& x() const noexcept { return x_; }
  const Eigen::VectorXd& y() const noexcept { return y_; }
  const Box& support() const noexcept { return support_; }

  //! Row i as a contiguous copy.
  std::vector<double> row(std::size_t i) const;

private:
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  Box support_;
};

Box data_range(const Eigen::MatrixXd& x);

//! Per-axis affine map x -> (x - shift) / scale.
struct Standardization
{
  std::vector<double> shift;
  std::vector<double> scale;
};

//! Map covariates to unit interquartile range (shift = lower support bound).
//! Axes with zero IQR are scaled by their range instead, or left alone.
Standardization unit_iqr_standardization(const Dataset& data);

Dataset apply(const Standardization& s, const Dataset& data);

//! Linear-interpolation sample quantile (type 7) of v.
double sample_quantile(std::vector<double> v, double p);

} // namespace qspec
