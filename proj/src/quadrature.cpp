#include "qspec/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

namespace qspec::quad {

namespace {

Rule compute_rule(std::size_t n)
{
  Rule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const std::size_t half = (n + 1) / 2;
  for (std::size_t i = 0; i < half; ++i) {
    // Newton on P_n starting from the Chebyshev-like guess.
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                        (static_cast<double>(n) + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = x;
      for (std::size_t k = 2; k <= n; ++k) {
        const double kk = static_cast<double>(k);
        const double p2 = ((2.0 * kk - 1.0) * x * p1 - (kk - 1.0) * p0) / kk;
        p0 = p1;
        p1 = p2;
      }
      dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16)
        break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1)
    rule.nodes[n / 2] = 0.0;
  return rule;
}

} // namespace

const Rule& gauss_legendre(std::size_t n)
{
  static std::mutex mutex;
  static std::map<std::size_t, Rule> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end())
    it = cache.emplace(n, compute_rule(n)).first;
  return it->second;
}

double integrate(const std::function<double(double)>& f,
                 double a,
                 double b,
                 std::size_t n)
{
  const Rule& rule = gauss_legendre(n);
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    s += rule.weights[i] * f(mid + half * rule.nodes[i]);
  return s * half;
}

double integrate_box(const std::function<double(std::span<const double>)>& f,
                     std::span<const double> lo,
                     std::span<const double> hi,
                     std::size_t n)
{
  const std::size_t d = lo.size();
  const Rule& rule = gauss_legendre(n);
  if (d == 0) {
    return f({});
  }
  std::vector<std::size_t> idx(d, 0);
  std::vector<double> x(d);
  double jac = 1.0;
  for (std::size_t j = 0; j < d; ++j)
    jac *= 0.5 * (hi[j] - lo[j]);
  double total = 0.0;
  while (true) {
    double w = 1.0;
    for (std::size_t j = 0; j < d; ++j) {
      x[j] = 0.5 * (lo[j] + hi[j]) + 0.5 * (hi[j] - lo[j]) * rule.nodes[idx[j]];
      w *= rule.weights[idx[j]];
    }
    total += w * f(x);
    std::size_t j = 0;
    while (j < d && ++idx[j] == n)
      idx[j++] = 0;
    if (j == d)
      break;
  }
  return total * jac;
}

double pairwise_sum(std::span<const double> v)
{
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v)
      s += x;
    return s;
  }
  const std::size_t mid = v.size() / 2;
  return pairwise_sum(v.subspan(0, mid)) + pairwise_sum(v.subspan(mid));
}

} // namespace qspec::quad
