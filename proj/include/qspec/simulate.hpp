#pragma once

#include "qspec/dataset.hpp"
#include "qspec/parametric.hpp"
#include "qspec/rng.hpp"
#include "qspec/teststat.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qspec {

enum class CovariateLaw { Uniform, TruncatedNormal };
enum class ErrorLaw { Normal, StudentT5, ChiSquare3 };

//! A data-generating process together with the test run on it.
//!
//! Y = theta0' basis(X) + c n^{-1/2} h^{-d/4 - rate_order} Delta(X) + e, where
//! e = scale(X) (Q(U) - Q(alpha_ref)) has conditional alpha_ref-quantile 0.
struct ScenarioSpec
{
  std::string name;
  std::size_t d = 1;
  std::size_t n = 200;
  CovariateLaw covariates = CovariateLaw::Uniform;
  ErrorLaw errors = ErrorLaw::Normal;
  double error_scale = 1.0;       //!< must be positive; zero would be an atom at 0
  bool heteroscedastic = false;   //!< scale(x) = error_scale (0.5 + mean(x))
  std::string formula = "1 + x1";
  std::vector<double> theta0 = {1.0, 2.0};
  std::function<double(std::span<const double>)> delta; //!< empty: Delta = 0
  std::string delta_name = "0";
  double amplitude = 0.0;         //!< c; 0 gives the null
  int rate_order = 0;             //!< |nu| in the alternative's rate
  double alpha_ref = 0.5;
  QuantileSet quantiles = QuantileSet::singleton(0.5);
  double bandwidth_constant = 0.7; //!< h = const * n^{-1/(4+d)}
  int degree = 0;
  MultiIndex target;
  std::size_t bootstrap_replicates = 250;
  bool parameter_correction = true;
  std::vector<std::size_t> grid_points;  //!< empty: defaults

  void validate() const;
  double bandwidth(std::size_t n_obs) const;
  //! n^{-1/2} h^{-d/4 - rate_order}
  double alternative_scale(std::size_t n_obs, double h) const;

  double error_quantile(double p) const;  //!< Q of the standardized law
  double error_density(double e) const;   //!< density of the standardized law
  double scale_at(std::span<const double> x) const;
  //! True conditional alpha-quantile function under the null part.
  double null_quantile(std::span<const double> x, double alpha) const;
  //! f_{eps_alpha | X}(0 | x).
  double true_cond_density(std::span<const double> x, double alpha) const;
  double true_fx(std::span<const double> x) const;
  double delta_at(std::span<const double> x) const;

  ParametricQuantileModel model() const;
  TestConfig test_config(std::size_t n_obs, std::uint64_t bootstrap_seed) const;
};

//! Named reference scenarios S1..S5.
ScenarioSpec scenario(const std::string& name);
std::vector<std::string> scenario_names();

struct SimulatedData
{
  Dataset data;
  double bandwidth = 0.0;
  std::vector<double> levels;
  //! I(eps^Delta_{i,alpha} <= 0) per level
  std::vector<std::vector<double>> indicators;
  //! eps^Delta_{i,alpha} = Y_i - m_{alpha,theta0}(X_i) per level
  std::vector<std::vector<double>> true_errors;
};

SimulatedData generate(const ScenarioSpec& spec, std::size_t n, RngStream& rng);

//! Plug-in D, b, V with the true densities on the test grid.
struct Theory
{
  double D = 0.0;
  double bias = 0.0;
  double variance = 0.0;
};

Theory exact_constants(const ScenarioSpec& spec, std::size_t n);

//! Amplitude c such that D / sqrt(V) equals `ratio` (Delta must be set).
double calibrate_amplitude(const ScenarioSpec& spec, double ratio);

struct RepRecord
{
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  double t_hat = 0.0;
  double scaled_t = 0.0;
  double z = 0.0;
  double p_normal = 0.0;
  double p_bootstrap = 0.0;
};

struct MCResult
{
  std::string scenario;
  std::size_t n = 0;
  std::size_t reps = 0;
  std::size_t failures = 0;
  std::uint64_t seed = 0;
  std::vector<double> levels = {0.01, 0.05, 0.10};
  std::vector<double> rejection_bootstrap;
  std::vector<double> rejection_normal;
  std::vector<double> standard_error;
  double z_mean = 0.0;
  double z_variance = 0.0;
  double pvalue_ks = 0.0; //!< KS distance of bootstrap p-values from U[0,1]
  Theory theory;
  std::vector<RepRecord> records;
};

//! Generate, fit, test and bootstrap `reps` times; rep r uses the streams
//! derived from (seed, r). Aborts when more than 2% of reps fail.
MCResult mc_size_power(const ScenarioSpec& spec,
                       std::size_t reps,
                       std::uint64_t seed,
                       std::size_t threads = 0);

//! sup |r-hat^0 - r~| / sup |r~| over the weighted grid for one data set.
double bahadur_ratio(const ScenarioSpec& spec, const SimulatedData& sim);

struct GapRow
{
  std::size_t n = 0;
  double bandwidth = 0.0;
  double median = 0.0;
  double q10 = 0.0;
  double q90 = 0.0;
  std::vector<double> ratios;
};

std::vector<GapRow> bahadur_gap(const ScenarioSpec& spec,
                                std::span<const std::size_t> ladder,
                                std::size_t reps,
                                std::uint64_t seed,
                                std::size_t threads = 0);

//! sup_t |F_n(t) - t| of a sample on [0, 1].
double ks_uniform(std::vector<double> sample);
//! Two-sample Kolmogorov distance.
double ks_two_sample(std::vector<double> a, std::vector<double> b);

} // namespace qspec
