#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace qspec::quad {

//! Gauss-Legendre rule on [-1, 1].
struct Rule
{
  std::vector<double> nodes;
  std::vector<double> weights;
};

//! n-point Gauss-Legendre rule, exact for polynomials of degree 2n-1.
const Rule& gauss_legendre(std::size_t n);

//! Default order used for kernel integrals.
inline constexpr std::size_t default_order = 64;

//! Integrate f over [a, b] with the n-point rule.
double integrate(const std::function<double(double)>& f,
                 double a,
                 double b,
                 std::size_t n = default_order);

//! Integrate f over the box [lo, hi] with the tensor-product rule.
double integrate_box(const std::function<double(std::span<const double>)>& f,
                     std::span<const double> lo,
                     std::span<const double> hi,
                     std::size_t n = default_order);

//! Sum of values in index order by recursive halving.
double pairwise_sum(std::span<const double> v);

} // namespace qspec::quad
