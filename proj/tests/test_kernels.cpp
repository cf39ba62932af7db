#include "qspec/error.hpp"
#include "qspec/kernels.hpp"

#include <doctest.h>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <array>
#include <cmath>
#include <functional>

using namespace qspec;

namespace {

const std::array<KernelFamily, 3> families = {KernelFamily::Epanechnikov, KernelFamily::Biweight,
                                              KernelFamily::Triweight};

// Adaptive Gauss-Kronrod on [a, b], independent of the library's fixed rule.
double gk(const std::function<double(double)>& f, double a, double b)
{
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 15, 1e-14);
}

// (k * k)(s) by direct quadrature over the overlap of the two supports.
double self_conv(const Kernel1D& k, double s)
{
  const double lo = std::max(-1.0, s - 1.0);
  const double hi = std::min(1.0, s + 1.0);
  if (lo >= hi)
    return 0.0;
  return gk([&](double u) { return k(u) * k(s - u); }, lo, hi);
}

double brute_conv4(const Kernel1D& k)
{
  auto sq = [&](double s) {
    const double c = self_conv(k, s);
    return c * c;
  };
  return gk(sq, -2.0, 0.0) + gk(sq, 0.0, 2.0);
}

} // namespace

TEST_CASE("epanechnikov closed form")
{
  const Kernel1D k;
  CHECK(eval_k(k, 0.0) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(eval_k(k, 1.5) == 0.0);
  CHECK(eval_k(k, 0.5) == doctest::Approx(0.5625).epsilon(1e-15));
  CHECK(eval_k(k, -1.0) == 0.0);
}

TEST_CASE("kernel families integrate to one, are symmetric and monotone on [-1,0]")
{
  for (auto fam : families) {
    const Kernel1D k(fam);
    CAPTURE(k.name());
    CHECK(std::abs(gk(k, -1.0, 1.0) - 1.0) < 1e-10);
    CHECK(std::abs(gk([&](double u) { return u * k(u); }, -1.0, 1.0)) < 1e-10);
    double prev = 0.0;
    for (int i = 0; i <= 1000; ++i) {
      const double u = -1.0 + i / 1000.0;
      CHECK(k(u) >= prev);
      CHECK(k(u) == k(-u));
      prev = k(u);
    }
    CHECK(Kernel1D::from_name(k.name()).family() == fam);
  }
  CHECK_THROWS_AS(Kernel1D::from_name("gaussian"), Error);
}

TEST_CASE("convolution constants match symbolic values")
{
  // exact rationals from symbolic integration of the polynomial kernels
  const Kernel1D epa(KernelFamily::Epanechnikov);
  const Kernel1D bi(KernelFamily::Biweight);
  const Kernel1D tri(KernelFamily::Triweight);
  CHECK(std::abs(conv_at_zero(epa, 2) - 0.6) < 1e-12);
  CHECK(std::abs(conv_at_zero(bi, 2) - 5.0 / 7.0) < 1e-12);
  CHECK(std::abs(conv_at_zero(tri, 2) - 350.0 / 429.0) < 1e-12);
  CHECK(std::abs(conv_at_zero(epa, 4) - 167.0 / 385.0) < 1e-12);
  CHECK(std::abs(conv_at_zero(bi, 4) - 1168780.0 / 2263261.0) < 1e-12);
  CHECK(std::abs(conv_at_zero(tri, 4) - 151766930.0 / 258150321.0) < 1e-12);
  CHECK_THROWS_AS(conv_at_zero(epa, 3), Error);
}

TEST_CASE("fourth convolution matches brute-force nested quadrature")
{
  for (auto fam : families) {
    const Kernel1D k(fam);
    CAPTURE(k.name());
    CHECK(std::abs(conv_at_zero(k, 4) - brute_conv4(k)) < 1e-6);
  }
}

TEST_CASE("product kernel factorizes")
{
  const Kernel1D epa;
  CHECK(product_conv_at_zero(ProductKernel(epa, 1), 2) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(product_conv_at_zero(ProductKernel(epa, 2), 2) == doctest::Approx(0.36).epsilon(1e-12));
  CHECK(product_conv_at_zero(ProductKernel(Kernel1D(KernelFamily::Triweight), 0), 4) == 1.0);

  const ProductKernel pk(epa, 2);
  CHECK(pk(std::array{0.0, 0.0}) == doctest::Approx(0.5625));
  CHECK(pk(std::array{0.2, 1.2}) == 0.0);

  // direct 2-d quadrature of the defining integral of K^(2)(0)
  const double direct = gk(
    [&](double a) {
      return gk(
        [&](double b) {
          const double v = pk(std::array{a, b});
          return v * v;
        },
        -1.0,
        1.0);
    },
    -1.0,
    1.0);
  CHECK(std::abs(product_conv_at_zero(pk, 2) - direct) < 1e-6);
}

TEST_CASE("product kernel fourth convolution against 2-d quadrature")
{
  const ProductKernel pk(Kernel1D(KernelFamily::Biweight), 2);
  using G = boost::math::quadrature::gauss<double, 20>;
  // (K * K)(s) as a 2-d integral over the overlap box; every piece is a polynomial
  auto conv = [&](double s1, double s2) {
    const double a0 = std::max(-1.0, s1 - 1.0), a1 = std::min(1.0, s1 + 1.0);
    const double b0 = std::max(-1.0, s2 - 1.0), b1 = std::min(1.0, s2 + 1.0);
    return G::integrate(
      [&](double u1) {
        return G::integrate(
          [&](double u2) { return pk(std::array{u1, u2}) * pk(std::array{s1 - u1, s2 - u2}); },
          b0,
          b1);
      },
      a0,
      a1);
  };
  double total = 0.0;
  for (double lo1 : {-2.0, 0.0})
    for (double lo2 : {-2.0, 0.0})
      total += G::integrate(
        [&](double s1) {
          return G::integrate(
            [&](double s2) {
              const double c = conv(s1, s2);
              return c * c;
            },
            lo2,
            lo2 + 2.0);
        },
        lo1,
        lo1 + 2.0);
  CHECK(std::abs(product_conv_at_zero(pk, 4) - total) < 1e-6);
}

TEST_CASE("multi-indices are ordered by degree")
{
  const auto idx = multi_indices(2, 2);
  REQUIRE(idx.size() == 6);
  CHECK(idx[0] == MultiIndex{0, 0});
  CHECK(idx[1] == MultiIndex{1, 0});
  CHECK(idx[2] == MultiIndex{0, 1});
  CHECK(idx[3] == MultiIndex{2, 0});
  CHECK(idx[4] == MultiIndex{1, 1});
  CHECK(idx[5] == MultiIndex{0, 2});

  const auto pi = poly_basis(std::array{2.0, 3.0}, idx);
  CHECK(pi(3) == doctest::Approx(2.0));  // 2^2 / 2!
  CHECK(pi(4) == doctest::Approx(6.0));
  CHECK(pi(5) == doctest::Approx(4.5));
}

TEST_CASE("equivalent kernel reduces to K for degree 0 and symmetric degree 1")
{
  for (auto fam : families) {
    const Kernel1D k(fam);
    for (std::size_t d : {1u, 2u}) {
      const ProductKernel pk(k, d);
      const auto l0 = build_equivalent_kernel(k, d, 0, MultiIndex(d, 0));
      const auto l1 = build_equivalent_kernel(k, d, 1, MultiIndex(d, 0));
      double sup0 = 0.0, sup1 = 0.0;
      for (int i = 0; i <= 60; ++i)
        for (int j = 0; j <= (d == 1 ? 0 : 60); ++j) {
          std::vector<double> u{-1.2 + 2.4 * i / 60.0};
          if (d == 2)
            u.push_back(-1.2 + 2.4 * j / 60.0);
          sup0 = std::max(sup0, std::abs(l0(u) - pk(u)));
          sup1 = std::max(sup1, std::abs(l1(u) - pk(u)));
        }
      CHECK(sup0 <= 1e-10);
      CHECK(sup1 <= 1e-10);
      CHECK(l0.conv2() == doctest::Approx(product_conv_at_zero(pk, 2)).epsilon(1e-10));
      CHECK(l0.conv4() == doctest::Approx(product_conv_at_zero(pk, 4)).epsilon(1e-10));
    }
  }
}

TEST_CASE("equivalent kernel moment conditions")
{
  const Kernel1D k;
  using G = boost::math::quadrature::gauss<double, 30>;

  const auto slope = build_equivalent_kernel(k, 1, 1, {1});
  auto L = [&](double u) { return slope(std::array{u}); };
  CHECK(std::abs(G::integrate(L, -1.0, 1.0)) < 1e-8);
  CHECK(std::abs(G::integrate([&](double u) { return u * L(u); }, -1.0, 1.0) - 1.0) < 1e-8);
  CHECK(slope(std::array{1.3}) == 0.0);

  // slope kernel is u K(u) / mu_2, so its constants follow from nested quadrature
  const double mu2 = 0.2;
  const double c2 = G::integrate([&](double u) { return std::pow(u * k(u) / mu2, 2); }, -1.0, 1.0);
  CHECK(slope.conv2() == doctest::Approx(c2).epsilon(1e-10));

  for (int p : {1, 2, 3}) {
    for (const auto& nu : multi_indices(2, p)) {
      const auto eq = build_equivalent_kernel(k, 2, p, nu);
      CHECK(eq.moment_matrix().ldlt().isPositive());
      for (const auto& mu : eq.indices()) {
        const double m = G::integrate(
          [&](double a) {
            return G::integrate(
              [&](double b) {
                const std::array z{a, b};
                double mono = 1.0;
                for (std::size_t j = 0; j < 2; ++j)
                  mono *= std::pow(z[j], mu[j]) / std::tgamma(mu[j] + 1.0);
                return mono * eq(z);
              },
              -1.0,
              1.0);
          },
          -1.0,
          1.0);
        CHECK(std::abs(m - (mu == nu ? 1.0 : 0.0)) < 1e-8);
      }
    }
  }
}

TEST_CASE("equivalent kernel rejects targets above the degree")
{
  CHECK_THROWS_AS(build_equivalent_kernel(Kernel1D(), 1, 1, {2}), Error);
  CHECK_THROWS_AS(build_equivalent_kernel(Kernel1D(), 2, 0, {1, 0}), Error);
}
