#include "qspec/error.hpp"
#include "qspec/simulate.hpp"

#include <doctest.h>

#include <cmath>

using namespace qspec;

namespace {

double coverage(const ScenarioSpec& s, const SimulatedData& sim)
{
  const auto m = s.model();
  double below = 0.0;
  for (std::size_t i = 0; i < sim.data.size(); ++i) {
    const auto x = sim.data.row(i);
    double fit = 0.0;
    const auto b = m.basis(x);
    for (Eigen::Index j = 0; j < b.size(); ++j)
      fit += s.theta0[static_cast<std::size_t>(j)] * b(j);
    below += sim.data.y()(static_cast<Eigen::Index>(i)) <= fit;
  }
  return below / static_cast<double>(sim.data.size());
}

} // namespace

TEST_CASE("registry")
{
  CHECK(scenario_names() == std::vector<std::string>{"S1", "S2", "S3", "S4", "S5"});
  for (const auto& name : scenario_names())
    CHECK_NOTHROW(scenario(name).validate());
  CHECK_THROWS_AS(scenario("S9"), Error);
  CHECK(scenario("S3").d == 2);
  CHECK(scenario("S4").amplitude > 0.0);
  CHECK(scenario("S5").degree == 1);
}

TEST_CASE("null data put the reference quantile on the model")
{
  const std::size_t n = 10000;
  for (auto law : {ErrorLaw::Normal, ErrorLaw::StudentT5, ErrorLaw::ChiSquare3}) {
    for (double a : {0.25, 0.5}) {
      ScenarioSpec s = scenario("S2");
      s.errors = law;
      s.alpha_ref = a;
      s.quantiles = QuantileSet::singleton(a);
      s.covariates = CovariateLaw::TruncatedNormal;
      RngStream rng(42);
      const auto sim = generate(s, n, rng);
      CHECK(std::abs(coverage(s, sim) - a) < 3.0 / std::sqrt(double(n)));
      for (std::size_t i = 0; i < n; ++i) {
        CHECK(s.scale_at(sim.data.row(i)) > 0.0);
        CHECK(sim.data.support().contains(sim.data.row(i)));
      }
    }
  }
}

TEST_CASE("constant deviation shifts every response")
{
  ScenarioSpec s = scenario("S1");
  s.delta = [](std::span<const double>) { return 1.0; };
  s.delta_name = "1";
  RngStream r0(5), r1(5);
  const auto null = generate(s, 250, r0);
  s.amplitude = 2.0;
  const auto alt = generate(s, 250, r1);
  const double shift = 2.0 / std::sqrt(250.0) * std::pow(alt.bandwidth, -0.25);
  CHECK(s.alternative_scale(250, alt.bandwidth) * 2.0 == doctest::Approx(shift));
  for (Eigen::Index i = 0; i < 250; ++i) {
    CHECK(alt.data.x()(i, 0) == null.data.x()(i, 0));
    CHECK(alt.data.y()(i) - null.data.y()(i) == doctest::Approx(shift).epsilon(1e-12));
  }
}

TEST_CASE("indicator bookkeeping")
{
  ScenarioSpec s = scenario("S4");
  s.quantiles = QuantileSet::interval(0.3, 0.7, 4);
  RngStream rng(8);
  const auto sim = generate(s, 300, rng);
  REQUIRE(sim.levels.size() == 4);
  const auto m = s.model();
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t i = 0; i < 300; ++i) {
      const double e = sim.true_errors[a][i];
      CHECK(sim.indicators[a][i] == (e <= 0.0 ? 1.0 : 0.0));
      const auto x = sim.data.row(i);
      CHECK(e == doctest::Approx(sim.data.y()(static_cast<Eigen::Index>(i)) -
                                 s.null_quantile(x, sim.levels[a])));
    }
}

TEST_CASE("atomic error laws are rejected")
{
  ScenarioSpec s = scenario("S1");
  s.error_scale = 0.0;
  CHECK_THROWS_AS(s.validate(), Error);
  RngStream rng(1);
  CHECK_THROWS_AS(generate(s, 10, rng), Error);
}

TEST_CASE("single replication")
{
  const auto res = mc_size_power(scenario("S1"), 1, 3, 1);
  for (double r : res.rejection_bootstrap)
    CHECK((r == 0.0 || r == 1.0));
  ScenarioSpec s = scenario("S1");
  s.n = 100;
  RngStream rng(3);
  const double ratio = bahadur_ratio(s, generate(s, 100, rng));
  CHECK(std::isfinite(ratio));
  CHECK(ratio > 0.0);
}

TEST_CASE("monte carlo runs are reproducible from the master seed")
{
  ScenarioSpec s = scenario("S2");
  s.bootstrap_replicates = 50;
  const auto a = mc_size_power(s, 8, 2024, 1);
  const auto b = mc_size_power(s, 8, 2024, 3);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t r = 0; r < a.records.size(); ++r) {
    CHECK(a.records[r].seed == b.records[r].seed);
    CHECK(a.records[r].t_hat == b.records[r].t_hat);
    CHECK(a.records[r].p_bootstrap == b.records[r].p_bootstrap);
  }
  CHECK(a.rejection_bootstrap == b.rejection_bootstrap);
  const auto c = mc_size_power(s, 8, 2025, 1);
  CHECK(c.records[0].t_hat != a.records[0].t_hat);
}

TEST_CASE("calibrated amplitude hits the requested signal ratio")
{
  const ScenarioSpec s = scenario("S4");
  const auto th = exact_constants(s, s.n);
  CHECK(th.D / std::sqrt(th.variance) == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(th.bias > 0.0);
  ScenarioSpec t = s;
  t.amplitude = calibrate_amplitude(s, 3.0);
  const auto t3 = exact_constants(t, t.n);
  CHECK(t3.D / std::sqrt(t3.variance) == doctest::Approx(3.0).epsilon(1e-8));
}

TEST_CASE("power does not decrease with the amplitude")
{
  ScenarioSpec s = scenario("S4");
  s.bootstrap_replicates = 100;
  double prev = 0.0, prev_se = 0.0;
  for (double c : {0.0, 1.0, 2.0, 4.0}) {
    s.amplitude = c;
    const auto res = mc_size_power(s, 80, 7, 1);
    const double r = res.rejection_bootstrap[1];
    CAPTURE(c);
    CHECK(r >= prev - 2.0 * std::hypot(res.standard_error[1], prev_se));
    prev = r;
    prev_se = res.standard_error[1];
  }
}

TEST_CASE("bahadur gap table")
{
  const std::vector<std::size_t> ladder{100, 400};
  const auto rows = bahadur_gap(scenario("S1"), ladder, 10, 5, 1);
  REQUIRE(rows.size() == 2);
  for (const auto& r : rows) {
    CHECK(r.ratios.size() == 10);
    CHECK(r.q10 <= r.median);
    CHECK(r.median <= r.q90);
  }
  CHECK(rows[1].bandwidth < rows[0].bandwidth);
}

TEST_CASE("kolmogorov distances")
{
  CHECK(ks_uniform({0.5}) == doctest::Approx(0.5));
  CHECK(ks_uniform({0.25, 0.75}) == doctest::Approx(0.25));
  CHECK(ks_two_sample({1, 2, 3}, {1, 2, 3}) == 0.0);
  CHECK(ks_two_sample({1, 2}, {3, 4}) == 1.0);
  CHECK(ks_two_sample({1, 3}, {2, 4}) == doctest::Approx(0.5));
}
