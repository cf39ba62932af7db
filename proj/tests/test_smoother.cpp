#include "qspec/error.hpp"
#include "qspec/rng.hpp"
#include "qspec/simulate.hpp"
#include "qspec/smoother.hpp"
#include "qspec/wquantile.hpp"

#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <vector>

using namespace qspec;

namespace {

Dataset line_data(const std::vector<double>& xs)
{
  Eigen::MatrixXd x(static_cast<Eigen::Index>(xs.size()), 1);
  for (std::size_t i = 0; i < xs.size(); ++i)
    x(static_cast<Eigen::Index>(i), 0) = xs[i];
  return Dataset(x, Eigen::VectorXd::Zero(x.rows()), Box{{0.0}, {1.0}});
}

Dataset uniform_data(std::size_t n, RngStream& rng)
{
  std::vector<double> xs(n);
  for (auto& v : xs)
    v = rng.uniform();
  return line_data(xs);
}

// Exhaustive search over the fits through pairs of positively weighted rows.
double vertex_optimum(const Dataset& data,
                      const std::vector<double>& e,
                      double x0,
                      double alpha,
                      double h,
                      const ProductKernel& K)
{
  const std::size_t n = data.size();
  std::vector<double> w(n), z(n);
  for (std::size_t i = 0; i < n; ++i) {
    z[i] = (data.x()(static_cast<Eigen::Index>(i), 0) - x0) / h;
    w[i] = K(std::array{-z[i]});
  }
  auto objective = [&](double b0, double b1) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      s += w[i] * check_loss(alpha, e[i] - b0 - b1 * z[i]);
    return s;
  };
  double best = 1e300;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      if (w[i] <= 0.0 || w[j] <= 0.0 || z[i] == z[j])
        continue;
      const double b1 = (e[j] - e[i]) / (z[j] - z[i]);
      best = std::min(best, objective(e[i] - b1 * z[i], b1));
    }
  return best;
}

} // namespace

TEST_CASE("nw quantile basic cases")
{
  const ProductKernel K(Kernel1D(), 1);
  RngStream rng(3);
  const Dataset data = uniform_data(50, rng);
  const std::vector<double> c(50, 1.75);
  CHECK(nw_quantile(data, c, std::array{0.4}, 0.3, 0.2, K) == 1.75);

  const Dataset three = line_data({0.1, 0.5, 0.9});
  const std::vector<double> r{-3.0, 7.0, 11.0};
  for (double a : {0.1, 0.5, 0.9})
    CHECK(nw_quantile(three, r, std::array{0.5}, a, 0.2, K) == 7.0);

  try {
    nw_quantile(three, r, std::array{0.3}, 0.5, 0.1, K);
    FAIL("expected an empty window");
  } catch (const EmptyWindowError& e) {
    CHECK(e.kind() == ErrorKind::EmptyWindow);
    CHECK(e.point() == std::vector<double>{0.3});
  }
}

TEST_CASE("nw quantile minimizes the local check objective")
{
  const ProductKernel K(Kernel1D(KernelFamily::Biweight), 1);
  RngStream rng(11);
  for (int inst = 0; inst < 100; ++inst) {
    const Dataset data = uniform_data(40, rng);
    std::vector<double> e(40);
    for (auto& v : e)
      v = 4.0 * rng.uniform() - 2.0;
    const double x = 0.2 + 0.6 * rng.uniform();
    const double h = 0.15;
    std::vector<double> w;
    kernel_weights(data, std::array{x}, h, K, w);
    double prev = -1e300;
    for (double alpha : {0.1, 0.3, 0.5, 0.7, 0.9}) {
      const double r = nw_quantile(data, e, std::array{x}, alpha, h, K);
      double lo = 1e300, hi = -1e300;
      for (std::size_t i = 0; i < e.size(); ++i)
        if (w[i] > 0) {
          lo = std::min(lo, e[i]);
          hi = std::max(hi, e[i]);
        }
      CHECK(r >= lo);
      CHECK(r <= hi);
      CHECK(r >= prev);
      prev = r;
      double grid_min = 1e300;
      for (int g = 0; g <= 4000; ++g)
        grid_min = std::min(grid_min, weighted_objective({e, w}, alpha, -2.0 + g * 1e-3));
      CHECK(weighted_objective({e, w}, alpha, r) <= grid_min + 1e-12);

      std::vector<double> shifted(e);
      for (auto& v : shifted)
        v += 0.625;
      CHECK(nw_quantile(data, shifted, std::array{x}, alpha, h, K) == r + 0.625);
    }
  }
}

TEST_CASE("local polynomial quantile")
{
  const ProductKernel K(Kernel1D(), 1);
  RngStream rng(5);
  const Dataset data = uniform_data(80, rng);
  std::vector<double> e(80);
  for (auto& v : e)
    v = rng.uniform() - 0.5;

  for (double x : {0.3, 0.5, 0.77})
    for (double a : {0.25, 0.5})
      CHECK(local_poly_quantile(data, e, std::array{x}, a, 0.2, K, 0, {0}) ==
            nw_quantile(data, e, std::array{x}, a, 0.2, K));

  std::vector<double> affine(80);
  for (std::size_t i = 0; i < 80; ++i)
    affine[i] = 1.5 - 2.0 * data.x()(static_cast<Eigen::Index>(i), 0);
  const double x0 = 0.4, h = 0.25;
  for (double a : {0.2, 0.5, 0.8}) {
    const auto fit = local_poly_fit(data, affine, std::array{x0}, a, h, K, 1);
    CHECK(fit.coef(0) == doctest::Approx(1.5 - 2.0 * x0).epsilon(1e-12));
    CHECK(fit.coef(1) == doctest::Approx(-2.0 * h).epsilon(1e-12));
    CHECK(fit.objective == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(local_poly_quantile(data, affine, std::array{x0}, a, h, K, 1, {1}) ==
          doctest::Approx(-2.0 * h).epsilon(1e-12));
  }

  const Dataset tied = line_data({0.5, 0.5, 0.5, 0.9});
  bool degenerate = false;
  try {
    local_poly_quantile(tied, std::vector<double>{1, 2, 3, 4}, std::array{0.5}, 0.5, 0.2, K, 1, {0});
  } catch (const Error& err) {
    degenerate = err.kind() == ErrorKind::DegenerateDesign;
  }
  CHECK(degenerate);
  CHECK_THROWS_AS(local_poly_quantile(tied, std::vector<double>{1, 2, 3, 4}, std::array{0.1}, 0.5, 0.05, K, 1, {0}),
                  EmptyWindowError);
}

TEST_CASE("local linear solver matches vertex enumeration")
{
  const ProductKernel K(Kernel1D(), 1);
  RngStream rng(99);
  for (int inst = 0; inst < 60; ++inst) {
    const std::size_t n = 5 + rng.next() % 16;
    const Dataset data = uniform_data(n, rng);
    std::vector<double> e(n);
    for (auto& v : e)
      v = 2.0 * rng.uniform() - 1.0;
    const double x0 = rng.uniform();
    const double h = 0.5 + 0.5 * rng.uniform();
    const double alpha = 0.1 + 0.8 * rng.uniform();
    double fit_obj = 0.0;
    try {
      fit_obj = local_poly_fit(data, e, std::array{x0}, alpha, h, K, 1).objective;
    } catch (const Error&) {
      continue;
    }
    const double oracle = vertex_optimum(data, e, x0, alpha, h, K);
    CHECK(fit_obj <= oracle + 1e-9 * std::max(1.0, oracle));
    CHECK(fit_obj >= oracle - 1e-9 * std::max(1.0, oracle));
  }
}

TEST_CASE("bahadur linearization")
{
  const ProductKernel K(Kernel1D(), 1);
  const Dataset four = line_data({0.4, 0.45, 0.55, 0.6});
  const std::vector<double> f(4, 1.0);
  CHECK(bahadur_linearization(four, std::vector<double>{1, 0, 1, 0}, std::array{0.5}, 0.5, 10.0, K, f) ==
        doctest::Approx(0.0).scale(1.0));

  const Dataset one = line_data({0.5});
  const std::vector<double> f1{1.0};
  for (double a : {0.2, 0.5, 0.7})
    CHECK(bahadur_linearization(one, std::vector<double>{1.0}, std::array{0.5}, a, 0.3, K, f1) ==
          doctest::Approx(a - 1.0));
  CHECK_THROWS_AS(bahadur_linearization(one, std::vector<double>{1.0}, std::array{0.1}, 0.5, 0.2, K, f1),
                  EmptyWindowError);

  // local constant coefficients a_i = K_i / sum_j K_j f_j
  const std::vector<double> fr{0.5, 1.0, 2.0, 4.0};
  const auto a = linearization_weights(four, std::array{0.5}, 0.2, K, fr);
  std::vector<double> w;
  kernel_weights(four, std::array{0.5}, 0.2, K, w);
  double denom = 0.0;
  for (std::size_t i = 0; i < 4; ++i)
    denom += w[i] * fr[i];
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(a[i] == doctest::Approx(w[i] / denom).epsilon(1e-14));
}

TEST_CASE("linearization beats its own size at n = 400, h = 0.3")
{
  ScenarioSpec s = scenario("S1");
  s.n = 400;
  s.bandwidth_constant = 0.3 * std::pow(400.0, 0.2);
  int smaller = 0;
  for (std::uint64_t r = 0; r < 100; ++r) {
    RngStream rng(derive_seed(1234, r));
    const auto sim = generate(s, s.n, rng);
    CHECK(sim.bandwidth == doctest::Approx(0.3));
    smaller += bahadur_ratio(s, sim) < 1.0;
  }
  CHECK(smaller >= 90);
}

TEST_CASE("conditional density at zero")
{
  const ProductKernel K(Kernel1D(), 1);
  RngStream rng(8);
  const Dataset data = uniform_data(300, rng);
  const std::vector<double> zero(300, 0.0);
  CHECK(estimate_cond_density_zero(data, zero, 0.5, std::array{0.5}, 0.2, 0.4, K) ==
        doctest::Approx(0.75 / 0.4).epsilon(1e-12));

  CondDensityEstimator::Options opt;
  opt.h_e = 0.2;
  const auto far = CondDensityEstimator::from_centered(data, std::vector<double>(300, 10.0), 0.2, K, opt);
  const auto v = far(std::array{0.5});
  CHECK(v.value == default_density_floor);
  CHECK(v.clamped);
  CHECK_THROWS_AS(far(std::array{3.0}), EmptyWindowError);
}

TEST_CASE("conditional density recovers the normal density at zero")
{
  const ProductKernel K(Kernel1D(), 1);
  RngStream rng(2000);
  const Dataset data = uniform_data(2000, rng);
  std::mt19937_64 eng(17);
  std::normal_distribution<double> z;
  std::vector<double> e(2000);
  for (auto& v : e)
    v = z(eng);
  const double f = estimate_cond_density_zero(data, e, 0.5, std::array{0.5}, 0.3, 0.4, K);
  CHECK(std::abs(f - 0.3989422804) < 0.1);
}

TEST_CASE("covariate density")
{
  const ProductKernel K1(Kernel1D(), 1);
  const Dataset one = line_data({0.3});
  CHECK(estimate_fx(one, std::array{0.3}, 0.2, K1).value == doctest::Approx(0.75 / 0.2));

  Eigen::MatrixXd x2(1, 2);
  x2 << 0.3, 0.6;
  const Dataset one2(x2, Eigen::VectorXd::Zero(1), Box{{0, 0}, {1, 1}});
  const ProductKernel K2(Kernel1D(), 2);
  CHECK(estimate_fx(one2, std::array{0.3, 0.6}, 0.5, K2).value ==
        doctest::Approx(0.5625 / 0.25));

  RngStream rng(77);
  const Dataset u = uniform_data(2000, rng);
  CHECK(std::abs(estimate_fx(u, std::array{0.5}, 0.2, K1).value - 1.0) < 0.1);
  const auto far = estimate_fx(u, std::array{5.0}, 0.2, K1);
  CHECK(far.value == default_density_floor);
  CHECK(far.clamped);
}

TEST_CASE("robust scale")
{
  const std::vector<double> v{1, 2, 3, 4, 100};
  const std::vector<double> w{1, 1, 1, 1, 0};
  const double sd = std::sqrt(5.0 / 3.0);
  const double s = robust_scale(v, w);
  CHECK(s <= sd + 1e-12);
  CHECK(s > 0.5);
}
