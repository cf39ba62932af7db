#include "qspec/wquantile.hpp"

#include "qspec/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace qspec {

namespace {

void require_level(double alpha)
{
  require(alpha > 0.0 && alpha < 1.0, "quantile level must lie in (0, 1)");
}

} // namespace

double check_loss(double alpha, double u)
{
  require_level(alpha);
  return check_loss_unchecked(alpha, u);
}

double weighted_quantile(const WeightedSample& sample, double alpha)
{
  require_level(alpha);
  require(sample.values.size() == sample.weights.size(),
          "values and weights differ in length");
  const std::size_t n = sample.values.size();
  std::vector<std::size_t> order;
  order.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = sample.weights[i];
    require(std::isfinite(w) && w >= 0.0, "weights must be finite and nonnegative");
    if (w > 0.0)
      order.push_back(i);
  }
  require(!order.empty(), "weighted quantile needs a positive total weight");

  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return sample.values[a] < sample.values[b];
  });
  // total in scan order so that cum reaches it exactly
  double total = 0.0;
  for (std::size_t i : order)
    total += sample.weights[i];
  // The subgradient of the objective at r is W(v <= r) - alpha W on the
  // right; the first value where it turns nonnegative is the left minimizer.
  const double target = alpha * total;
  double cum = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    cum += sample.weights[order[k]];
    // fold ties so that the comparison sees the full atom
    while (k + 1 < order.size() &&
           sample.values[order[k + 1]] == sample.values[order[k]]) {
      ++k;
      cum += sample.weights[order[k]];
    }
    if (cum >= target)
      return sample.values[order[k]];
  }
  return sample.values[order.back()];
}

double weighted_objective(const WeightedSample& sample, double alpha, double r)
{
  double s = 0.0;
  for (std::size_t i = 0; i < sample.values.size(); ++i)
    s += sample.weights[i] * check_loss_unchecked(alpha, sample.values[i] - r);
  return s;
}

} // namespace qspec
