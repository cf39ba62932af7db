#pragma once

#include "qspec/dataset.hpp"
#include "qspec/kernels.hpp"
#include "qspec/rng.hpp"
#include "qspec/teststat.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace qspec {

//! Precomputed linear maps from the uniform indicators to the resampled
//! field r~*_alpha on the evaluated grid points:
//!   r~*_alpha(x_k) = -sum_i a_{k,i} (I(U_i <= alpha) - alpha).
struct BootstrapPlan
{
  std::vector<double> levels;
  std::vector<Eigen::MatrixXd> maps;     //!< [level]: points x n
  std::vector<Eigen::VectorXd> cells;    //!< [level]: w * dx * d-alpha per point
  std::size_t n = 0;
};

BootstrapPlan make_bootstrap_plan(const Dataset& data,
                                  const FieldTable& table,
                                  const QuantileSet& A,
                                  const XGrid& grid,
                                  double h,
                                  const ProductKernel& kernel,
                                  const std::vector<std::vector<double>>& density_at_rows,
                                  int degree = 0,
                                  const MultiIndex& target = {},
                                  std::size_t threads = 1);

//! Adds the first-order effect of refitting theta on the resampled
//! indicators: with J = sum_i f_i g_i g_i' and g_i the model gradient at
//! X_i, each map M becomes M (I - diag(f) G J^{-1} G'). Throws
//! DegenerateDesign when J is singular.
void correct_for_parameter_estimation(BootstrapPlan& plan,
                                      const Eigen::MatrixXd& gradient,
                                      const std::vector<std::vector<double>>& density_at_rows);

//! One bootstrap statistic T* from the stream: draws U_1..U_n and
//! integrates r~*^2 w over the plan's grid.
double bootstrap_statistic(const BootstrapPlan& plan, RngStream& rng);

//! B replicates; replicate b uses stream (seed, b).
std::vector<double> bootstrap_replicates(const BootstrapPlan& plan,
                                         std::size_t replicates,
                                         std::uint64_t seed,
                                         std::size_t threads = 1);

//! (1 + #{T*_b >= T_obs}) / (B + 1).
double bootstrap_pvalue(double t_obs, std::span<const double> replicates);

} // namespace qspec
