#include "qspec/simulate.hpp"

#include "qspec/error.hpp"
#include "qspec/parallel.hpp"
#include "qspec/smoother.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qspec {

namespace {

const boost::math::normal standard_normal{};
const boost::math::students_t student5{5.0};
const boost::math::chi_squared chisq3{3.0};

// covariates N(0.5, 0.25^2) truncated to [0, 1]
constexpr double tn_mean = 0.5;
constexpr double tn_sd = 0.25;

double tn_mass()
{
  using boost::math::cdf;
  return cdf(standard_normal, (1.0 - tn_mean) / tn_sd) - cdf(standard_normal, (0.0 - tn_mean) / tn_sd);
}

Box unit_box(std::size_t d)
{
  return {std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
}

} // namespace

void ScenarioSpec::validate() const
{
  require(d >= 1, "scenario dimension must be positive");
  require(n >= 1, "scenario sample size must be positive");
  if (!(error_scale > 0.0))
    fail(ErrorKind::InvalidArgument,
         "error law has an atom at zero (scale " + std::to_string(error_scale) + ")");
  require(alpha_ref > 0.0 && alpha_ref < 1.0, "reference level must lie in (0, 1)");
  require(bandwidth_constant > 0.0, "bandwidth constant must be positive");
  quantiles.validate();
  const auto m = model();
  require(m.min_dim() <= d, "scenario formula uses more covariates than d");
  require(theta0.size() == m.size(), "theta0 length does not match the formula");
}

double ScenarioSpec::bandwidth(std::size_t n_obs) const
{
  return bandwidth_constant *
         std::pow(static_cast<double>(n_obs), -1.0 / (4.0 + static_cast<double>(d)));
}

double ScenarioSpec::alternative_scale(std::size_t n_obs, double h) const
{
  return std::pow(static_cast<double>(n_obs), -0.5) *
         std::pow(h, -static_cast<double>(d) / 4.0 - static_cast<double>(rate_order));
}

double ScenarioSpec::error_quantile(double p) const
{
  switch (errors) {
    case ErrorLaw::Normal: return boost::math::quantile(standard_normal, p);
    case ErrorLaw::StudentT5: return boost::math::quantile(student5, p);
    case ErrorLaw::ChiSquare3: return boost::math::quantile(chisq3, p);
  }
  return 0.0;
}

double ScenarioSpec::error_density(double e) const
{
  switch (errors) {
    case ErrorLaw::Normal: return boost::math::pdf(standard_normal, e);
    case ErrorLaw::StudentT5: return boost::math::pdf(student5, e);
    case ErrorLaw::ChiSquare3: return e > 0.0 ? boost::math::pdf(chisq3, e) : 0.0;
  }
  return 0.0;
}

double ScenarioSpec::scale_at(std::span<const double> x) const
{
  if (!heteroscedastic)
    return error_scale;
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  return error_scale * (0.5 + mean);
}

double ScenarioSpec::null_quantile(std::span<const double> x, double alpha) const
{
  const auto m = model();
  double v = 0.0;
  const auto b = m.basis(x);
  for (std::size_t k = 0; k < theta0.size(); ++k)
    v += theta0[k] * b(static_cast<Eigen::Index>(k));
  if (alpha != alpha_ref)
    v += scale_at(x) * (error_quantile(alpha) - error_quantile(alpha_ref));
  return v;
}

double ScenarioSpec::true_cond_density(std::span<const double> x, double alpha) const
{
  const double s = scale_at(x);
  return error_density(error_quantile(alpha)) / s;
}

double ScenarioSpec::true_fx(std::span<const double> x) const
{
  double f = 1.0;
  for (double v : x) {
    if (v < 0.0 || v > 1.0)
      return 0.0;
    if (covariates == CovariateLaw::TruncatedNormal)
      f *= boost::math::pdf(standard_normal, (v - tn_mean) / tn_sd) / (tn_sd * tn_mass());
  }
  return f;
}

double ScenarioSpec::delta_at(std::span<const double> x) const
{
  return delta ? delta(x) : 0.0;
}

ParametricQuantileModel ScenarioSpec::model() const
{
  return ParametricQuantileModel::from_formula(formula);
}

TestConfig ScenarioSpec::test_config(std::size_t n_obs, std::uint64_t bootstrap_seed) const
{
  TestConfig c;
  c.quantiles = quantiles;
  c.kernel = Kernel1D(KernelFamily::Epanechnikov);
  c.bandwidth = bandwidth(n_obs);
  c.weight = WeightFunction::indicator(unit_box(d).shrunk(c.bandwidth));
  c.grid_points = grid_points;
  c.degree = degree;
  c.target = target.empty() ? MultiIndex(d, 0) : target;
  c.bootstrap.replicates = bootstrap_replicates;
  c.bootstrap.seed = bootstrap_seed;
  c.bootstrap.parameter_correction = parameter_correction;
  c.threads = 1;
  return c;
}

namespace {

double quadratic_delta(std::span<const double> x)
{
  // orthogonal to 1 and x under U[0, 1]; unit L2 norm
  const double u = x[0] - 0.5;
  return std::sqrt(180.0) * (u * u - 1.0 / 12.0);
}

} // namespace

ScenarioSpec scenario(const std::string& name)
{
  ScenarioSpec s;
  s.name = name;
  if (name == "S1") {
    // d = 1, linear median model, normal errors
  } else if (name == "S2") {
    s.errors = ErrorLaw::StudentT5;
    s.heteroscedastic = true;
  } else if (name == "S3") {
    s.d = 2;
    s.n = 500;
    s.formula = "1 + x1 + x2";
    s.theta0 = {1.0, 1.0, 1.0};
    s.bandwidth_constant = 0.4;
  } else if (name == "S4") {
    s.n = 400;
    s.delta = quadratic_delta;
    s.delta_name = "sqrt(180) ((x1 - 1/2)^2 - 1/12)";
    s.amplitude = calibrate_amplitude(s, 2.0);
  } else if (name == "S5") {
    s.n = 400;
    s.degree = 1;
    s.target = {0};
    s.bandwidth_constant = 0.7;
    s.delta = quadratic_delta;
    s.delta_name = "sqrt(180) ((x1 - 1/2)^2 - 1/12)";
  } else {
    fail(ErrorKind::Usage, "unknown scenario '" + name + "'");
  }
  s.validate();
  return s;
}

std::vector<std::string> scenario_names()
{
  return {"S1", "S2", "S3", "S4", "S5"};
}

SimulatedData generate(const ScenarioSpec& spec, std::size_t n, RngStream& rng)
{
  spec.validate();
  const std::size_t d = spec.d;
  const auto model = spec.model();
  const double h = spec.bandwidth(n);
  const double alt = spec.amplitude * spec.alternative_scale(n, h);
  const double q_ref = spec.error_quantile(spec.alpha_ref);

  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  std::vector<double> row(d);
  const double lo_cdf = boost::math::cdf(standard_normal, (0.0 - tn_mean) / tn_sd);
  const double mass = tn_mass();
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < d; ++j) {
      const double u = rng.open_uniform();
      row[j] = spec.covariates == CovariateLaw::Uniform
                 ? u
                 : tn_mean + tn_sd * boost::math::quantile(standard_normal, lo_cdf + u * mass);
      row[j] = std::clamp(row[j], 0.0, 1.0);
      x(ii, static_cast<Eigen::Index>(j)) = row[j];
    }
    const double e = spec.scale_at(row) * (spec.error_quantile(rng.open_uniform()) - q_ref);
    y(ii) = spec.null_quantile(row, spec.alpha_ref) + alt * spec.delta_at(row) + e;
  }

  SimulatedData sim{Dataset(std::move(x), std::move(y), unit_box(d)), h, spec.quantiles.levels(), {}, {}};
  for (double alpha : sim.levels) {
    std::vector<double> ind(n);
    std::vector<double> err(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = sim.data.row(i);
      err[i] = sim.data.y()(static_cast<Eigen::Index>(i)) - spec.null_quantile(r, alpha);
      ind[i] = err[i] <= 0.0 ? 1.0 : 0.0;
    }
    sim.indicators.push_back(std::move(ind));
    sim.true_errors.push_back(std::move(err));
  }
  return sim;
}

Theory exact_constants(const ScenarioSpec& spec, std::size_t n)
{
  const double h = spec.bandwidth(n);
  const TestConfig cfg = spec.test_config(n, 0);
  const XGrid grid(unit_box(spec.d),
                   cfg.grid_points.empty() ? XGrid::default_points(spec.d) : cfg.grid_points);
  const WeightFunction& w = *cfg.weight;
  const auto levels = spec.quantiles.levels();
  double conv2 = 0.0;
  double conv4 = 0.0;
  if (spec.degree == 0) {
    const ProductKernel k(cfg.kernel, spec.d);
    conv2 = product_conv_at_zero(k, 2);
    conv4 = product_conv_at_zero(k, 4);
  } else {
    const EquivalentKernel lk(cfg.kernel, spec.d, spec.degree, cfg.target);
    conv2 = lk.conv2();
    conv4 = lk.conv4();
  }
  auto fx = [&](std::span<const double> x) { return spec.true_fx(x); };
  auto fc = [&](std::span<const double> x, std::size_t a) {
    return spec.true_cond_density(x, levels[a]);
  };
  Theory t;
  t.bias = plugin_bias(spec.quantiles, w, grid, fx, fc, conv2, h);
  t.variance = plugin_variance(spec.quantiles, w, grid, fx, fc, conv4);
  t.D = shift_D(spec.quantiles, w, grid, [&](std::span<const double> x, double) {
    return spec.amplitude * spec.delta_at(x);
  });
  return t;
}

double calibrate_amplitude(const ScenarioSpec& spec, double ratio)
{
  require(static_cast<bool>(spec.delta), "calibration needs a deviation function");
  ScenarioSpec unit = spec;
  unit.amplitude = 1.0;
  const Theory t = exact_constants(unit, spec.n);
  require(t.D > 0.0, "deviation vanishes on the weighted region");
  return std::sqrt(ratio * std::sqrt(t.variance) / t.D);
}

double ks_uniform(std::vector<double> sample)
{
  std::sort(sample.begin(), sample.end());
  const double m = static_cast<double>(sample.size());
  double dist = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double u = std::clamp(sample[i], 0.0, 1.0);
    dist = std::max({dist, (static_cast<double>(i) + 1.0) / m - u, u - static_cast<double>(i) / m});
  }
  return dist;
}

double ks_two_sample(std::vector<double> a, std::vector<double> b)
{
  require(!a.empty() && !b.empty(), "KS distance needs two nonempty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double dist = 0.0;
  while (i < a.size() && j < b.size()) {
    const double t = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= t)
      ++i;
    while (j < b.size() && b[j] <= t)
      ++j;
    dist = std::max(dist, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return dist;
}

MCResult mc_size_power(const ScenarioSpec& spec,
                       std::size_t reps,
                       std::uint64_t seed,
                       std::size_t threads)
{
  spec.validate();
  require(reps >= 1, "need at least one replication");
  MCResult res;
  res.scenario = spec.name;
  res.n = spec.n;
  res.reps = reps;
  res.seed = seed;
  res.records.resize(reps);
  res.theory = exact_constants(spec, spec.n);

  parallel_for(reps, threads, [&](std::size_t r) {
    RepRecord& rec = res.records[r];
    rec.seed = derive_seed(seed, r);
    try {
      RngStream rng(rec.seed, 0);
      const SimulatedData sim = generate(spec, spec.n, rng);
      const auto model = spec.model();
      std::vector<std::vector<double>> residuals;
      ParametricQuantileModel fitted = model;
      for (double alpha : sim.levels) {
        fitted.set_fit(alpha, fit_parametric(sim.data, alpha, fitted));
        residuals.push_back(model_residuals(sim.data, fitted, alpha));
      }
      const TestConfig cfg = spec.test_config(spec.n, derive_seed(rec.seed, 1));
      const Eigen::MatrixXd gradient = model.design(sim.data);
      const TestOutcome out = run_test(sim.data, residuals, cfg, &gradient);
      rec.t_hat = out.report.t_hat;
      rec.scaled_t = out.report.scaled_t;
      rec.z = out.report.z;
      rec.p_normal = out.report.p_normal;
      rec.p_bootstrap = out.report.p_bootstrap.value_or(out.report.p_normal);
    } catch (const Error& e) {
      rec.failed = true;
      rec.error = e.what();
    }
  });

  std::vector<double> z;
  std::vector<double> p;
  for (const auto& rec : res.records) {
    if (rec.failed) {
      ++res.failures;
      continue;
    }
    z.push_back(rec.z);
    p.push_back(rec.p_bootstrap);
  }
  if (static_cast<double>(res.failures) > 0.02 * static_cast<double>(reps))
    fail(ErrorKind::SparseDesign, std::to_string(res.failures) + " of " + std::to_string(reps) +
                                    " replications failed: " +
                                    std::find_if(res.records.begin(), res.records.end(),
                                                 [](const RepRecord& r) { return r.failed; })
                                      ->error);
  const double m = static_cast<double>(z.size());
  for (double level : res.levels) {
    double rb = 0.0;
    double rn = 0.0;
    for (const auto& rec : res.records) {
      if (rec.failed)
        continue;
      rb += rec.p_bootstrap <= level;
      rn += rec.p_normal <= level;
    }
    rb /= m;
    rn /= m;
    res.rejection_bootstrap.push_back(rb);
    res.rejection_normal.push_back(rn);
    res.standard_error.push_back(std::sqrt(rb * (1.0 - rb) / m));
  }
  res.z_mean = std::accumulate(z.begin(), z.end(), 0.0) / m;
  double ss = 0.0;
  for (double v : z)
    ss += (v - res.z_mean) * (v - res.z_mean);
  res.z_variance = z.size() > 1 ? ss / (m - 1.0) : 0.0;
  res.pvalue_ks = ks_uniform(p);
  return res;
}

double bahadur_ratio(const ScenarioSpec& spec, const SimulatedData& sim)
{
  const Dataset& data = sim.data;
  const double h = sim.bandwidth;
  const double alpha = sim.levels.front();
  const ProductKernel kernel(Kernel1D(KernelFamily::Epanechnikov), spec.d);
  std::vector<double> f0(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    f0[i] = spec.true_cond_density(data.row(i), alpha);
  const XGrid grid(unit_box(spec.d),
                   spec.grid_points.empty() ? XGrid::default_points(spec.d) : spec.grid_points);
  const Box inner = unit_box(spec.d).shrunk(h);
  double gap = 0.0;
  double size = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto x = grid.point(k);
    if (!inner.contains(x))
      continue;
    try {
      const double rhat = nw_quantile(data, sim.true_errors.front(), x, alpha, h, kernel);
      const double rlin =
        bahadur_linearization(data, sim.indicators.front(), x, alpha, h, kernel, f0);
      gap = std::max(gap, std::abs(rhat - rlin));
      size = std::max(size, std::abs(rlin));
    } catch (const EmptyWindowError&) {
    }
  }
  return size > 0.0 ? gap / size : 0.0;
}

std::vector<GapRow> bahadur_gap(const ScenarioSpec& spec,
                                std::span<const std::size_t> ladder,
                                std::size_t reps,
                                std::uint64_t seed,
                                std::size_t threads)
{
  spec.validate();
  require(reps >= 1, "need at least one replication");
  std::vector<GapRow> rows;
  for (std::size_t step = 0; step < ladder.size(); ++step) {
    const std::size_t n = ladder[step];
    GapRow row;
    row.n = n;
    row.bandwidth = spec.bandwidth(n);
    row.ratios.resize(reps);
    parallel_for(reps, threads, [&](std::size_t r) {
      RngStream rng(derive_seed(derive_seed(seed, n), r), 0);
      const SimulatedData sim = generate(spec, n, rng);
      row.ratios[r] = bahadur_ratio(spec, sim);
    });
    row.median = sample_quantile(row.ratios, 0.5);
    row.q10 = sample_quantile(row.ratios, 0.1);
    row.q90 = sample_quantile(row.ratios, 0.9);
    rows.push_back(std::move(row));
  }
  return rows;
}

} // namespace qspec
