#include "qspec/dataset.hpp"

#include "qspec/error.hpp"

#include <algorithm>
#include <cmath>
#include <span>

namespace qspec {

bool Box::contains(std::span<const double> x) const
{
  for (std::size_t j = 0; j < lo.size(); ++j)
    if (x[j] < lo[j] || x[j] > hi[j])
      return false;
  return true;
}

Box Box::shrunk(double margin) const
{
  Box b = *this;
  for (std::size_t j = 0; j < lo.size(); ++j) {
    b.lo[j] = lo[j] + margin;
    b.hi[j] = hi[j] - margin;
    if (b.lo[j] > b.hi[j])
      b.lo[j] = b.hi[j] = 0.5 * (lo[j] + hi[j]);
  }
  return b;
}

Box data_range(const Eigen::MatrixXd& x)
{
  Box b;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    b.lo.push_back(x.col(j).minCoeff());
    b.hi.push_back(x.col(j).maxCoeff());
  }
  return b;
}

Dataset::Dataset(Eigen::MatrixXd x, Eigen::VectorXd y)
  : Dataset(x, y, x.rows() > 0 ? data_range(x) : Box{})
{}

Dataset::Dataset(Eigen::MatrixXd x, Eigen::VectorXd y, Box support)
  : x_(std::move(x))
  , y_(std::move(y))
  , support_(std::move(support))
{
  if (y_.size() < 1)
    fail(ErrorKind::Data, "empty data");
  if (x_.rows() != y_.size())
    fail(ErrorKind::Data, "covariate and response lengths differ");
  if (support_.lo.size() != dim() || support_.hi.size() != dim())
    fail(ErrorKind::Data, "support box has wrong dimension");
  if (!x_.allFinite() || !y_.allFinite())
    fail(ErrorKind::Data, "non-finite value in data");
  for (std::size_t i = 0; i < size(); ++i) {
    const auto r = row(i);
    if (!support_.contains(r))
      fail(ErrorKind::Data, "row " + std::to_string(i) + " lies outside the support box");
  }
}

std::vector<double> Dataset::row(std::size_t i) const
{
  std::vector<double> r(dim());
  for (std::size_t j = 0; j < dim(); ++j)
    r[j] = x_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return r;
}

double sample_quantile(std::vector<double> v, double p)
{
  require(!v.empty(), "quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

Standardization unit_iqr_standardization(const Dataset& data)
{
  Standardization s;
  for (std::size_t j = 0; j < data.dim(); ++j) {
    const auto col = data.x().col(static_cast<Eigen::Index>(j));
    std::vector<double> v(col.begin(), col.end());
    double scale = sample_quantile(v, 0.75) - sample_quantile(v, 0.25);
    if (!(scale > 0.0))
      scale = data.support().hi[j] - data.support().lo[j];
    if (!(scale > 0.0))
      scale = 1.0;
    s.shift.push_back(data.support().lo[j]);
    s.scale.push_back(scale);
  }
  return s;
}

Dataset apply(const Standardization& s, const Dataset& data)
{
  Eigen::MatrixXd x = data.x();
  Box b = data.support();
  for (std::size_t j = 0; j < data.dim(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    x.col(jj) = (x.col(jj).array() - s.shift[j]) / s.scale[j];
    b.lo[j] = (b.lo[j] - s.shift[j]) / s.scale[j];
    b.hi[j] = (b.hi[j] - s.shift[j]) / s.scale[j];
  }
  // rounding can push boundary rows a hair outside
  for (std::size_t j = 0; j < data.dim(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    b.lo[j] = std::min(b.lo[j], x.col(jj).minCoeff());
    b.hi[j] = std::max(b.hi[j], x.col(jj).maxCoeff());
  }
  return Dataset(std::move(x), data.y(), std::move(b));
}

} // namespace qspec
