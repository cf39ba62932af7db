#pragma once

#include "qspec/dataset.hpp"
#include "qspec/kernels.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <vector>

namespace qspec {

//! Lower clamp applied to every plug-in density.
inline constexpr double default_density_floor = 1e-3;

//! w_i = K((x - X_i) / h) for every row.
void kernel_weights(const Dataset& data,
                    std::span<const double> x,
                    double h,
                    const ProductKernel& kernel,
                    std::vector<double>& out);

//! Local-constant quantile of the residuals at x: the kernel-weighted
//! alpha-quantile. Throws EmptyWindowError when no row gets weight.
double nw_quantile(const Dataset& data,
                   std::span<const double> residuals,
                   std::span<const double> x,
                   double alpha,
                   double h,
                   const ProductKernel& kernel);

//! Coefficients a_i(x) of the first-order expansion
//!   r~(x) = -sum_i a_i(x) (I_i - alpha).
//! Local constant: a_i = K_i / sum_j K_j f_j. Local polynomial of degree p:
//! a_i = e_target' (sum_j K_j f_j z_j z_j')^{-1} z_i K_i with
//! z_i = pi((X_i - x) / h).
std::vector<double> linearization_weights(const Dataset& data,
                                          std::span<const double> x,
                                          double h,
                                          const ProductKernel& kernel,
                                          std::span<const double> density_at_rows,
                                          int degree = 0,
                                          const MultiIndex& target = {});

//! r~_alpha(x) = -sum_i K_i (I_i - alpha) / sum_i K_i f0_i.
double bahadur_linearization(const Dataset& data,
                             std::span<const double> indicators,
                             std::span<const double> x,
                             double alpha,
                             double h,
                             const ProductKernel& kernel,
                             std::span<const double> density_at_rows);

struct LocalPolyFit
{
  Eigen::VectorXd coef; //!< ordered as multi_indices(d, p)
  double objective = 0.0;
};

//! argmin_b sum_i K_i tau_alpha(e_i - pi_h(X_i - x)' b).
LocalPolyFit local_poly_fit(const Dataset& data,
                            std::span<const double> residuals,
                            std::span<const double> x,
                            double alpha,
                            double h,
                            const ProductKernel& kernel,
                            int degree);

//! Component `target` of local_poly_fit. Degree 0 is exactly nw_quantile.
double local_poly_quantile(const Dataset& data,
                           std::span<const double> residuals,
                           std::span<const double> x,
                           double alpha,
                           double h,
                           const ProductKernel& kernel,
                           int degree,
                           const MultiIndex& target);

struct DensityValue
{
  double value = 0.0;
  bool clamped = false;
};

//! Plug-in estimate of the conditional density of the quantile error at
//! zero, f(0 | x). Residuals are centered by the local quantile fit at each
//! row so that their alpha-quantile is near zero.
class CondDensityEstimator
{
public:
  struct Options
  {
    double h_x = 0.0;              //!< covariate bandwidth; <= 0 means h
    std::optional<double> h_e;     //!< error bandwidth; unset: normal reference
    double floor = default_density_floor;
  };

  //! Residuals are Y_i - m(X_i); h is the bandwidth of the centering fit.
  CondDensityEstimator(const Dataset& data,
                       std::span<const double> residuals,
                       double alpha,
                       double h,
                       const ProductKernel& kernel,
                       Options options);

  //! Same, with the centered residuals supplied.
  static CondDensityEstimator from_centered(const Dataset& data,
                                            std::vector<double> centered,
                                            double h_x,
                                            const ProductKernel& kernel,
                                            Options options);

  DensityValue operator()(std::span<const double> x) const;

  const std::vector<double>& centered_residuals() const noexcept { return centered_; }
  double h_x() const noexcept { return h_x_; }

private:
  CondDensityEstimator(const Dataset& data, const ProductKernel& kernel);

  const Dataset* data_;
  ProductKernel kernel_;
  std::vector<double> centered_;
  double h_x_ = 0.0;
  std::optional<double> h_e_;
  double floor_ = default_density_floor;
  double global_scale_ = 0.0;
};

//! One-shot form of CondDensityEstimator.
double estimate_cond_density_zero(const Dataset& data,
                                  std::span<const double> residuals,
                                  double alpha,
                                  std::span<const double> x,
                                  double h_x,
                                  std::optional<double> h_e,
                                  const ProductKernel& kernel,
                                  double floor = default_density_floor);

//! (1 / (n h^d)) sum_i K((x - X_i) / h), clamped below at `floor`.
DensityValue estimate_fx(const Dataset& data,
                         std::span<const double> x,
                         double h,
                         const ProductKernel& kernel,
                         double floor = default_density_floor);

//! min(sd, IQR / 1.349) of v under weights w (w > 0 entries only).
double robust_scale(std::span<const double> v, std::span<const double> w);

} // namespace qspec
