#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qspec {

enum class KernelFamily { Epanechnikov, Biweight, Triweight };

//! Symmetric polynomial kernel c_m (1 - u^2)^m on [-1, 1].
class Kernel1D
{
public:
  explicit Kernel1D(KernelFamily family = KernelFamily::Epanechnikov);

  //! Parse "epanechnikov" | "biweight" | "triweight".
  static Kernel1D from_name(std::string_view name);

  KernelFamily family() const noexcept { return family_; }
  std::string name() const;

  double operator()(double u) const noexcept
  {
    if (u <= -1.0 || u >= 1.0)
      return 0.0;
    const double b = 1.0 - u * u;
    double p = b;
    for (int i = 1; i < power_; ++i)
      p *= b;
    return norm_ * p;
  }

  //! Polynomial degree of the kernel on its support.
  int degree() const noexcept { return 2 * power_; }

private:
  KernelFamily family_;
  int power_;
  double norm_;
};

double eval_k(const Kernel1D& kernel, double u);

//! j-fold self-convolution of k evaluated at zero, j in {2, 4}.
double conv_at_zero(const Kernel1D& kernel, int j);

//! K(u) = prod_j k(u_j).
class ProductKernel
{
public:
  ProductKernel(Kernel1D base, std::size_t dim)
    : base_(base)
    , dim_(dim)
  {}

  const Kernel1D& base() const noexcept { return base_; }
  std::size_t dim() const noexcept { return dim_; }

  double operator()(std::span<const double> u) const noexcept
  {
    double p = 1.0;
    for (double v : u) {
      p *= base_(v);
      if (p == 0.0)
        return 0.0;
    }
    return p;
  }

private:
  Kernel1D base_;
  std::size_t dim_;
};

//! K^{(j)}(0) = (k^{(j)}(0))^d.
double product_conv_at_zero(const ProductKernel& pk, int j);

using MultiIndex = std::vector<int>;

//! All multi-indices of dimension d with total degree <= p, ordered by total
//! degree and then with higher powers of earlier axes first.
std::vector<MultiIndex> multi_indices(std::size_t d, int p);

//! pi(z)_nu = z^nu / nu!.
Eigen::VectorXd poly_basis(std::span<const double> z,
                           const std::vector<MultiIndex>& indices);

//! Local polynomial equivalent kernel
//!   L(u) = e_target' M^{-1} pi(u) K(u),  M = int pi pi' K.
class EquivalentKernel
{
public:
  EquivalentKernel(Kernel1D base, std::size_t dim, int degree, MultiIndex target);

  double operator()(std::span<const double> u) const;

  std::size_t dim() const noexcept { return dim_; }
  int degree() const noexcept { return degree_; }
  const MultiIndex& target() const noexcept { return target_; }
  std::size_t target_position() const noexcept { return target_pos_; }
  const std::vector<MultiIndex>& indices() const noexcept { return indices_; }
  const Eigen::MatrixXd& moment_matrix() const noexcept { return moments_; }
  const ProductKernel& product_kernel() const noexcept { return kernel_; }

  //! int L^2 (equals (L*L)(0) up to the sign (-1)^{|target|}).
  double conv2() const noexcept { return conv2_; }
  //! int (L*L)(s)^2 ds, the 4-fold convolution at zero.
  double conv4() const noexcept { return conv4_; }

private:
  ProductKernel kernel_;
  std::size_t dim_;
  int degree_;
  MultiIndex target_;
  std::vector<MultiIndex> indices_;
  std::size_t target_pos_ = 0;
  Eigen::MatrixXd moments_;
  Eigen::VectorXd coef_;
  double conv2_ = 0.0;
  double conv4_ = 0.0;
};

EquivalentKernel build_equivalent_kernel(const Kernel1D& base,
                                         std::size_t d,
                                         int p,
                                         const MultiIndex& target);

} // namespace qspec
