#pragma once

#include "qspec/dataset.hpp"

#include <Eigen/Dense>

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qspec {

//! Monomial of degree <= 2 in the covariates: 1, x_a, or x_a * x_b.
struct Term
{
  int a = -1; //!< zero-based covariate index, -1 for the constant
  int b = -1;

  double operator()(std::span<const double> x) const noexcept
  {
    if (a < 0)
      return 1.0;
    return b < 0 ? x[static_cast<std::size_t>(a)]
                 : x[static_cast<std::size_t>(a)] * x[static_cast<std::size_t>(b)];
  }

  //! "1", "x1", "x1^2", "x1*x2" (one-based covariate indices).
  std::string name() const;

  bool operator==(const Term&) const = default;
};

//! Linear-in-parameters quantile family m(x) = theta' basis(x); the
//! gradient in theta is basis(x) itself.
class ParametricQuantileModel
{
public:
  explicit ParametricQuantileModel(std::vector<Term> terms);

  //! Parse "1 + x1 + x1^2 + x1*x2". The constant must be present.
  static ParametricQuantileModel from_formula(std::string_view formula);

  const std::vector<Term>& terms() const noexcept { return terms_; }
  std::size_t size() const noexcept { return terms_.size(); }
  std::string formula() const;
  //! Largest covariate index used, plus one.
  std::size_t min_dim() const noexcept;

  Eigen::VectorXd basis(std::span<const double> x) const;
  Eigen::MatrixXd design(const Dataset& data) const;

  //! Store theta-hat(alpha); a level can be stored once.
  void set_fit(double alpha, Eigen::VectorXd theta);
  bool has_fit(double alpha) const { return fits_.count(alpha) > 0; }
  const Eigen::VectorXd& theta(double alpha) const;

private:
  std::vector<Term> terms_;
  std::map<double, Eigen::VectorXd> fits_;
};

//! Global quantile regression fit of the family at level alpha.
Eigen::VectorXd fit_parametric(const Dataset& data,
                               double alpha,
                               const ParametricQuantileModel& model);

//! theta-hat(alpha)' basis(x); throws NotFitted for unknown levels.
double eval_model(const ParametricQuantileModel& model,
                  double alpha,
                  std::span<const double> x);

//! Gradient of m_{alpha,theta}(x) with respect to theta.
Eigen::VectorXd gradient_gamma(const ParametricQuantileModel& model,
                               double alpha,
                               std::span<const double> x);

//! Y_i - m_{alpha,theta-hat}(X_i).
std::vector<double> model_residuals(const Dataset& data,
                                    const ParametricQuantileModel& model,
                                    double alpha);

} // namespace qspec
