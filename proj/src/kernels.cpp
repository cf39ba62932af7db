#include "qspec/kernels.hpp"

#include "qspec/error.hpp"
#include "qspec/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qspec {

Kernel1D::Kernel1D(KernelFamily family)
  : family_(family)
{
  switch (family) {
    case KernelFamily::Epanechnikov:
      power_ = 1;
      norm_ = 0.75;
      break;
    case KernelFamily::Biweight:
      power_ = 2;
      norm_ = 15.0 / 16.0;
      break;
    case KernelFamily::Triweight:
      power_ = 3;
      norm_ = 35.0 / 32.0;
      break;
  }
}

Kernel1D Kernel1D::from_name(std::string_view name)
{
  if (name == "epanechnikov")
    return Kernel1D(KernelFamily::Epanechnikov);
  if (name == "biweight")
    return Kernel1D(KernelFamily::Biweight);
  if (name == "triweight")
    return Kernel1D(KernelFamily::Triweight);
  fail(ErrorKind::InvalidArgument, "unknown kernel '" + std::string(name) + "'");
}

std::string Kernel1D::name() const
{
  switch (family_) {
    case KernelFamily::Epanechnikov: return "epanechnikov";
    case KernelFamily::Biweight: return "biweight";
    case KernelFamily::Triweight: return "triweight";
  }
  return "";
}

double eval_k(const Kernel1D& kernel, double u)
{
  return kernel(u);
}

namespace {

double factorial(int m)
{
  double f = 1.0;
  for (int i = 2; i <= m; ++i)
    f *= i;
  return f;
}

// t^a k(t) / a!
double scaled_monomial(const Kernel1D& k, int a, double t)
{
  return std::pow(t, a) * k(t) / factorial(a);
}

// (g_a * g_b)(s) with g_a(t) = t^a k(t) / a!. The integrand is a polynomial
// on the overlap of the supports, so Gauss-Legendre is exact.
double monomial_convolution(const Kernel1D& k, int a, int b, double s)
{
  const double lo = std::max(-1.0, s - 1.0);
  const double hi = std::min(1.0, s + 1.0);
  if (hi <= lo)
    return 0.0;
  return quad::integrate(
    [&](double t) { return scaled_monomial(k, a, t) * scaled_monomial(k, b, s - t); },
    lo,
    hi);
}

// int (g_a * g_b)(s) (g_c * g_e)(s) ds. Each convolution is polynomial on
// [-2, 0] and on [0, 2].
double convolution_product_integral(const Kernel1D& k, int a, int b, int c, int e)
{
  auto f = [&](double s) {
    return monomial_convolution(k, a, b, s) * monomial_convolution(k, c, e, s);
  };
  return quad::integrate(f, -2.0, 0.0) + quad::integrate(f, 0.0, 2.0);
}

// int g_a g_b
double monomial_moment(const Kernel1D& k, int a, int b)
{
  return quad::integrate(
    [&](double t) { return scaled_monomial(k, a, t) * scaled_monomial(k, b, t); },
    -1.0,
    1.0);
}

} // namespace

double conv_at_zero(const Kernel1D& kernel, int j)
{
  if (j == 2)
    return monomial_moment(kernel, 0, 0);
  if (j == 4)
    return convolution_product_integral(kernel, 0, 0, 0, 0);
  fail(ErrorKind::InvalidArgument,
       "convolution order must be 2 or 4, got " + std::to_string(j));
}

double product_conv_at_zero(const ProductKernel& pk, int j)
{
  return std::pow(conv_at_zero(pk.base(), j), static_cast<double>(pk.dim()));
}

std::vector<MultiIndex> multi_indices(std::size_t d, int p)
{
  std::vector<MultiIndex> out;
  for (int total = 0; total <= p; ++total) {
    // compositions of `total` into d parts, earlier axes taking more first
    MultiIndex nu(d, 0);
    auto rec = [&](auto&& self, std::size_t axis, int left) -> void {
      if (axis + 1 == d || d == 0) {
        if (d > 0)
          nu[axis] = left;
        if (d > 0 || left == 0)
          out.push_back(nu);
        return;
      }
      for (int v = left; v >= 0; --v) {
        nu[axis] = v;
        self(self, axis + 1, left - v);
      }
    };
    rec(rec, 0, total);
    if (d == 0)
      break;
  }
  return out;
}

Eigen::VectorXd poly_basis(std::span<const double> z,
                           const std::vector<MultiIndex>& indices)
{
  Eigen::VectorXd out(static_cast<Eigen::Index>(indices.size()));
  for (std::size_t r = 0; r < indices.size(); ++r) {
    double v = 1.0;
    for (std::size_t j = 0; j < z.size(); ++j) {
      for (int e = 0; e < indices[r][j]; ++e)
        v *= z[j] / (e + 1);
    }
    out(static_cast<Eigen::Index>(r)) = v;
  }
  return out;
}

EquivalentKernel::EquivalentKernel(Kernel1D base,
                                   std::size_t dim,
                                   int degree,
                                   MultiIndex target)
  : kernel_(base, dim)
  , dim_(dim)
  , degree_(degree)
  , target_(std::move(target))
{
  require(degree >= 0, "local polynomial degree must be nonnegative");
  require(target_.size() == dim, "target multi-index has wrong dimension");
  const int order = std::accumulate(target_.begin(), target_.end(), 0);
  require(std::all_of(target_.begin(), target_.end(), [](int v) { return v >= 0; }),
          "target multi-index must be nonnegative");
  require(order <= degree, "target multi-index order exceeds the polynomial degree");

  indices_ = multi_indices(dim, degree);
  target_pos_ = static_cast<std::size_t>(
    std::find(indices_.begin(), indices_.end(), target_) - indices_.begin());

  const int maxpow = degree;
  // raw moments int t^m k(t) dt, m <= 2p
  std::vector<double> raw(static_cast<std::size_t>(2 * maxpow + 1));
  for (int mpow = 0; mpow <= 2 * maxpow; ++mpow)
    raw[static_cast<std::size_t>(mpow)] = quad::integrate(
      [&](double t) { return std::pow(t, mpow) * base(t); }, -1.0, 1.0);

  const auto r = static_cast<Eigen::Index>(indices_.size());
  moments_.resize(r, r);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index k = 0; k < r; ++k) {
      // int pi_nu pi_mu K = prod_j int t^{nu_j + mu_j} k(t) dt / (nu! mu!)
      double v = 1.0;
      for (std::size_t j = 0; j < dim; ++j) {
        const int a = indices_[i][j];
        const int b = indices_[k][j];
        v *= raw[static_cast<std::size_t>(a + b)] / (factorial(a) * factorial(b));
      }
      moments_(i, k) = v;
    }
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(moments_);
  const double smallest = eig.eigenvalues().minCoeff();
  const double largest = eig.eigenvalues().maxCoeff();
  if (!(smallest > 1e-12 * std::max(1.0, largest)))
    fail(ErrorKind::SingularMoment,
         "kernel moment matrix is singular (smallest eigenvalue " +
           std::to_string(smallest) + ")");

  Eigen::VectorXd e = Eigen::VectorXd::Zero(r);
  e(static_cast<Eigen::Index>(target_pos_)) = 1.0;
  coef_ = moments_.ldlt().solve(e);

  if (degree == 0) {
    // L is K itself; share the product-kernel constants exactly.
    conv2_ = product_conv_at_zero(kernel_, 2);
    conv4_ = product_conv_at_zero(kernel_, 4);
    return;
  }

  // L(u) = sum_nu c_nu prod_j g_{nu_j}(u_j), so every convolution integral
  // factorizes over the axes.
  const int m = maxpow + 1;
  std::vector<double> sq(static_cast<std::size_t>(m * m));
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b)
      sq[static_cast<std::size_t>(a * m + b)] = monomial_moment(base, a, b);
  std::vector<double> quart(static_cast<std::size_t>(m * m * m * m));
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b)
      for (int c = 0; c < m; ++c)
        for (int e2 = 0; e2 < m; ++e2)
          quart[static_cast<std::size_t>(((a * m + b) * m + c) * m + e2)] =
            convolution_product_integral(base, a, b, c, e2);

  double c2 = 0.0;
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index k = 0; k < r; ++k) {
      double v = coef_(i) * coef_(k);
      for (std::size_t j = 0; j < dim; ++j)
        v *= sq[static_cast<std::size_t>(indices_[i][j] * m + indices_[k][j])];
      c2 += v;
    }
  }
  double c4 = 0.0;
  for (Eigen::Index i1 = 0; i1 < r; ++i1)
    for (Eigen::Index i2 = 0; i2 < r; ++i2)
      for (Eigen::Index i3 = 0; i3 < r; ++i3)
        for (Eigen::Index i4 = 0; i4 < r; ++i4) {
          double v = coef_(i1) * coef_(i2) * coef_(i3) * coef_(i4);
          if (v == 0.0)
            continue;
          for (std::size_t j = 0; j < dim; ++j) {
            const auto at = ((indices_[i1][j] * m + indices_[i2][j]) * m +
                             indices_[i3][j]) * m + indices_[i4][j];
            v *= quart[static_cast<std::size_t>(at)];
          }
          c4 += v;
        }
  conv2_ = c2;
  conv4_ = c4;
}

double EquivalentKernel::operator()(std::span<const double> u) const
{
  const double k = kernel_(u);
  if (k == 0.0)
    return 0.0;
  return coef_.dot(poly_basis(u, indices_)) * k;
}

EquivalentKernel build_equivalent_kernel(const Kernel1D& base,
                                         std::size_t d,
                                         int p,
                                         const MultiIndex& target)
{
  return EquivalentKernel(base, d, p, target);
}

} // namespace qspec
