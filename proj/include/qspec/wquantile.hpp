#pragma once

#include <span>

namespace qspec {

//! Values with nonnegative weights; both spans must have equal length.
struct WeightedSample
{
  std::span<const double> values;
  std::span<const double> weights;
};

//! tau_alpha(u) = alpha u_+ - (1 - alpha) u_-.
double check_loss(double alpha, double u);

//! Unchecked check loss for inner loops.
inline double check_loss_unchecked(double alpha, double u) noexcept
{
  return u > 0.0 ? alpha * u : (alpha - 1.0) * u;
}

//! Smallest sample value v with W(values <= v) >= alpha * W, i.e. the left
//! end of the set of minimizers of sum_i w_i tau_alpha(v_i - r).
double weighted_quantile(const WeightedSample& sample, double alpha);

//! sum_i w_i tau_alpha(v_i - r).
double weighted_objective(const WeightedSample& sample, double alpha, double r);

} // namespace qspec
