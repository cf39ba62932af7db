#include "qspec/smoother.hpp"

#include "qspec/error.hpp"
#include "qspec/linear_quantile.hpp"
#include "qspec/wquantile.hpp"

#include <algorithm>
#include <cmath>

namespace qspec {

void kernel_weights(const Dataset& data,
                    std::span<const double> x,
                    double h,
                    const ProductKernel& kernel,
                    std::vector<double>& out)
{
  const std::size_t n = data.size();
  const std::size_t d = data.dim();
  const auto& xs = data.x();
  out.resize(n);
  const double inv_h = 1.0 / h;
  const Kernel1D& k = kernel.base();
  for (std::size_t i = 0; i < n; ++i) {
    double w = 1.0;
    for (std::size_t j = 0; j < d && w != 0.0; ++j)
      w *= k((x[j] - xs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) * inv_h);
    out[i] = w;
  }
}

namespace {

void require_bandwidth(double h)
{
  require(std::isfinite(h) && h > 0.0, "bandwidth must be positive");
}

bool any_positive(const std::vector<double>& w)
{
  return std::any_of(w.begin(), w.end(), [](double v) { return v > 0.0; });
}

std::vector<double> to_vector(std::span<const double> x)
{
  return {x.begin(), x.end()};
}

} // namespace

double nw_quantile(const Dataset& data,
                   std::span<const double> residuals,
                   std::span<const double> x,
                   double alpha,
                   double h,
                   const ProductKernel& kernel)
{
  require_bandwidth(h);
  require(residuals.size() == data.size(), "one residual per row required");
  thread_local std::vector<double> w;
  kernel_weights(data, x, h, kernel, w);
  if (!any_positive(w))
    throw EmptyWindowError(to_vector(x));
  return weighted_quantile({residuals, w}, alpha);
}

std::vector<double> linearization_weights(const Dataset& data,
                                          std::span<const double> x,
                                          double h,
                                          const ProductKernel& kernel,
                                          std::span<const double> density_at_rows,
                                          int degree,
                                          const MultiIndex& target)
{
  require_bandwidth(h);
  require(density_at_rows.size() == data.size(), "one density value per row required");
  std::vector<double> w;
  kernel_weights(data, x, h, kernel, w);
  const std::size_t n = data.size();

  if (degree == 0) {
    double denom = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      denom += w[i] * density_at_rows[i];
    if (!(denom > 0.0))
      throw EmptyWindowError(to_vector(x));
    for (double& v : w)
      v /= denom;
    return w;
  }

  const auto indices = multi_indices(data.dim(), degree);
  const auto pos = static_cast<Eigen::Index>(
    std::find(indices.begin(), indices.end(), target) - indices.begin());
  require(pos < static_cast<Eigen::Index>(indices.size()),
          "target multi-index not in the polynomial basis");
  const auto q = static_cast<Eigen::Index>(indices.size());
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(q, q);
  std::vector<Eigen::VectorXd> zs(n);
  std::vector<double> u(data.dim());
  bool any = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (w[i] == 0.0)
      continue;
    any = true;
    for (std::size_t j = 0; j < data.dim(); ++j)
      u[j] = (data.x()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) - x[j]) / h;
    zs[i] = poly_basis(u, indices);
    gram.noalias() += (w[i] * density_at_rows[i]) * zs[i] * zs[i].transpose();
  }
  if (!any)
    throw EmptyWindowError(to_vector(x));
  Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
  lu.setThreshold(1e-12);
  if (lu.rank() < q)
    fail(ErrorKind::DegenerateDesign, "local design is rank deficient");
  Eigen::VectorXd e = Eigen::VectorXd::Zero(q);
  e(pos) = 1.0;
  const Eigen::VectorXd row = lu.solve(e); // gram symmetric
  std::vector<double> a(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    if (w[i] != 0.0)
      a[i] = w[i] * row.dot(zs[i]);
  return a;
}

double bahadur_linearization(const Dataset& data,
                             std::span<const double> indicators,
                             std::span<const double> x,
                             double alpha,
                             double h,
                             const ProductKernel& kernel,
                             std::span<const double> density_at_rows)
{
  require(indicators.size() == data.size(), "one indicator per row required");
  const auto a = linearization_weights(data, x, h, kernel, density_at_rows);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    s += a[i] * (indicators[i] - alpha);
  return -s;
}

LocalPolyFit local_poly_fit(const Dataset& data,
                            std::span<const double> residuals,
                            std::span<const double> x,
                            double alpha,
                            double h,
                            const ProductKernel& kernel,
                            int degree)
{
  require_bandwidth(h);
  require(degree >= 0, "degree must be nonnegative");
  require(residuals.size() == data.size(), "one residual per row required");
  std::vector<double> w;
  kernel_weights(data, x, h, kernel, w);
  if (!any_positive(w))
    throw EmptyWindowError(to_vector(x));
  const auto indices = multi_indices(data.dim(), degree);
  const std::size_t n = data.size();
  const auto q = static_cast<Eigen::Index>(indices.size());

  std::size_t m = 0;
  for (double v : w)
    m += v > 0.0;
  Eigen::MatrixXd z(static_cast<Eigen::Index>(m), q);
  Eigen::VectorXd r(static_cast<Eigen::Index>(m));
  Eigen::VectorXd ww(static_cast<Eigen::Index>(m));
  std::vector<double> u(data.dim());
  Eigen::Index k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (w[i] == 0.0)
      continue;
    for (std::size_t j = 0; j < data.dim(); ++j)
      u[j] = (data.x()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) - x[j]) / h;
    z.row(k) = poly_basis(u, indices).transpose();
    r(k) = residuals[i];
    ww(k) = w[i];
    ++k;
  }
  const auto fit = fit_linear_quantile(z, r, ww, alpha);
  return {fit.coef, fit.objective};
}

double local_poly_quantile(const Dataset& data,
                           std::span<const double> residuals,
                           std::span<const double> x,
                           double alpha,
                           double h,
                           const ProductKernel& kernel,
                           int degree,
                           const MultiIndex& target)
{
  if (degree == 0)
    return nw_quantile(data, residuals, x, alpha, h, kernel);
  const auto indices = multi_indices(data.dim(), degree);
  const auto it = std::find(indices.begin(), indices.end(), target);
  require(it != indices.end(), "target multi-index not in the polynomial basis");
  const auto fit = local_poly_fit(data, residuals, x, alpha, h, kernel, degree);
  return fit.coef(static_cast<Eigen::Index>(it - indices.begin()));
}

double robust_scale(std::span<const double> v, std::span<const double> w)
{
  double sw = 0.0;
  double mean = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    sw += w[i];
    mean += w[i] * v[i];
  }
  if (!(sw > 0.0))
    return 0.0;
  mean /= sw;
  double var = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i)
    var += w[i] * (v[i] - mean) * (v[i] - mean);
  const double sd = std::sqrt(var / sw);
  const double iqr =
    weighted_quantile({v, w}, 0.75) - weighted_quantile({v, w}, 0.25);
  if (iqr > 0.0)
    return std::min(sd, iqr / 1.349);
  return sd;
}

CondDensityEstimator::CondDensityEstimator(const Dataset& data, const ProductKernel& kernel)
  : data_(&data)
  , kernel_(kernel)
{}

CondDensityEstimator::CondDensityEstimator(const Dataset& data,
                                           std::span<const double> residuals,
                                           double alpha,
                                           double h,
                                           const ProductKernel& kernel,
                                           Options options)
  : CondDensityEstimator(data, kernel)
{
  require(residuals.size() == data.size(), "one residual per row required");
  centered_.resize(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto xi = data.row(i);
    centered_[i] = residuals[i] - nw_quantile(data, residuals, xi, alpha, h, kernel);
  }
  h_x_ = options.h_x > 0.0 ? options.h_x : h;
  h_e_ = options.h_e;
  floor_ = options.floor;
  const std::vector<double> ones(data.size(), 1.0);
  global_scale_ = robust_scale(centered_, ones);
}

CondDensityEstimator CondDensityEstimator::from_centered(const Dataset& data,
                                                         std::vector<double> centered,
                                                         double h_x,
                                                         const ProductKernel& kernel,
                                                         Options options)
{
  require(centered.size() == data.size(), "one residual per row required");
  require_bandwidth(h_x);
  CondDensityEstimator est(data, kernel);
  est.centered_ = std::move(centered);
  est.h_x_ = h_x;
  est.h_e_ = options.h_e;
  est.floor_ = options.floor;
  const std::vector<double> ones(data.size(), 1.0);
  est.global_scale_ = robust_scale(est.centered_, ones);
  return est;
}

DensityValue CondDensityEstimator::operator()(std::span<const double> x) const
{
  thread_local std::vector<double> w;
  kernel_weights(*data_, x, h_x_, kernel_, w);
  double sw = 0.0;
  std::size_t n_loc = 0;
  for (double v : w) {
    sw += v;
    n_loc += v > 0.0;
  }
  if (!(sw > 0.0))
    throw EmptyWindowError(to_vector(x));

  double h_e = 0.0;
  if (h_e_) {
    h_e = *h_e_;
  } else {
    double s = robust_scale(centered_, w);
    if (!(s > 0.0))
      s = global_scale_;
    h_e = 1.06 * s * std::pow(static_cast<double>(n_loc), -0.2);
    h_e = std::max(h_e, 1e-8);
  }
  require_bandwidth(h_e);

  const Kernel1D& k = kernel_.base();
  double num = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i)
    if (w[i] > 0.0)
      num += w[i] * k(centered_[i] / h_e);
  const double raw = num / (sw * h_e);
  if (raw < floor_)
    return {floor_, true};
  return {raw, false};
}

double estimate_cond_density_zero(const Dataset& data,
                                  std::span<const double> residuals,
                                  double alpha,
                                  std::span<const double> x,
                                  double h_x,
                                  std::optional<double> h_e,
                                  const ProductKernel& kernel,
                                  double floor)
{
  CondDensityEstimator::Options opt;
  opt.h_x = h_x;
  opt.h_e = h_e;
  opt.floor = floor;
  return CondDensityEstimator(data, residuals, alpha, h_x, kernel, opt)(x).value;
}

DensityValue estimate_fx(const Dataset& data,
                         std::span<const double> x,
                         double h,
                         const ProductKernel& kernel,
                         double floor)
{
  require_bandwidth(h);
  thread_local std::vector<double> w;
  kernel_weights(data, x, h, kernel, w);
  double s = 0.0;
  for (double v : w)
    s += v;
  const double raw =
    s / (static_cast<double>(data.size()) * std::pow(h, static_cast<double>(data.dim())));
  if (raw < floor)
    return {floor, true};
  return {raw, false};
}

} // namespace qspec
