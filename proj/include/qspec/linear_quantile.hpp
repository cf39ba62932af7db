#pragma once

#include <Eigen/Dense>

namespace qspec {

struct LinearQuantileFit
{
  Eigen::VectorXd coef;
  double objective = 0.0;
  int iterations = 0;
};

//! Exact minimizer of sum_i w_i tau_alpha(r_i - z_i' b) over b.
//!
//! Rows with zero weight are ignored. The solver walks between basic
//! solutions (fits interpolating q rows) along edges of steepest descent,
//! doing an exact weighted-median line search on each edge, and stops at a
//! vertex where no edge decreases the objective. Throws DegenerateDesign if
//! the positively weighted rows do not span R^q.
LinearQuantileFit fit_linear_quantile(const Eigen::MatrixXd& design,
                                      const Eigen::VectorXd& response,
                                      const Eigen::VectorXd& weights,
                                      double alpha);

//! sum_i w_i tau_alpha(r_i - z_i' b).
double linear_quantile_objective(const Eigen::MatrixXd& design,
                                 const Eigen::VectorXd& response,
                                 const Eigen::VectorXd& weights,
                                 double alpha,
                                 const Eigen::VectorXd& coef);

} // namespace qspec
