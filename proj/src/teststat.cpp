#include "qspec/teststat.hpp"

#include "qspec/bootstrap.hpp"
#include "qspec/error.hpp"
#include "qspec/parallel.hpp"
#include "qspec/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace qspec {

// ---------------------------------------------------------------- QuantileSet

QuantileSet QuantileSet::singleton(double alpha)
{
  QuantileSet a;
  a.kind = Kind::Singleton;
  a.lo = a.hi = alpha;
  a.validate();
  return a;
}

QuantileSet QuantileSet::interval(double lo, double hi, std::size_t grid)
{
  QuantileSet a;
  a.kind = Kind::Interval;
  a.lo = lo;
  a.hi = hi;
  a.grid = grid;
  a.validate();
  return a;
}

void QuantileSet::validate() const
{
  if (kind == Kind::Singleton) {
    require(lo > 0.0 && lo < 1.0, "quantile level must lie in (0, 1)");
    return;
  }
  require(lo > 0.0 && lo <= hi && hi < 1.0, "quantile interval must satisfy 0 < lo <= hi < 1");
  require(grid >= 2, "quantile interval needs at least 2 grid levels");
}

std::vector<double> QuantileSet::levels() const
{
  if (kind == Kind::Singleton)
    return {lo};
  std::vector<double> out(grid);
  const double step = (hi - lo) / static_cast<double>(grid);
  for (std::size_t k = 0; k < grid; ++k)
    out[k] = lo + (static_cast<double>(k) + 0.5) * step;
  return out;
}

double QuantileSet::level_weight() const
{
  return kind == Kind::Singleton ? 1.0 : (hi - lo) / static_cast<double>(grid);
}

// ---------------------------------------------------------------------- XGrid

XGrid::XGrid(Box box, std::vector<std::size_t> points_per_axis)
  : box_(std::move(box))
  , points_(std::move(points_per_axis))
{
  require(points_.size() == box_.dim(), "grid resolution has wrong dimension");
  size_ = 1;
  for (std::size_t j = 0; j < points_.size(); ++j) {
    require(points_[j] >= 1, "grid needs at least one point per axis");
    size_ *= points_[j];
    volume_ *= (box_.hi[j] - box_.lo[j]) / static_cast<double>(points_[j]);
  }
}

std::vector<std::size_t> XGrid::default_points(std::size_t d)
{
  return std::vector<std::size_t>(d, d == 1 ? 200 : 50);
}

std::vector<double> XGrid::point(std::size_t k) const
{
  const std::size_t d = dim();
  std::vector<double> x(d);
  for (std::size_t jj = d; jj-- > 0;) {
    const std::size_t idx = k % points_[jj];
    k /= points_[jj];
    const double step = (box_.hi[jj] - box_.lo[jj]) / static_cast<double>(points_[jj]);
    x[jj] = box_.lo[jj] + (static_cast<double>(idx) + 0.5) * step;
  }
  return x;
}

// ------------------------------------------------------------- WeightFunction

WeightFunction WeightFunction::indicator(Box inner)
{
  WeightFunction w;
  w.kind_ = Kind::IndicatorBox;
  w.box_ = std::move(inner);
  return w;
}

WeightFunction WeightFunction::user_grid(std::vector<double> values)
{
  for (double v : values)
    require(std::isfinite(v) && v >= 0.0, "weights must be finite and nonnegative");
  WeightFunction w;
  w.kind_ = Kind::UserGrid;
  w.values_ = std::move(values);
  return w;
}

double WeightFunction::operator()(std::size_t grid_index, std::span<const double> x) const
{
  if (kind_ == Kind::UserGrid)
    return scale_ * values_.at(grid_index);
  return box_.contains(x) ? scale_ : 0.0;
}

WeightFunction WeightFunction::scaled(double c) const
{
  require(c > 0.0, "weight scale must be positive");
  WeightFunction w = *this;
  w.scale_ *= c;
  return w;
}

// -------------------------------------------------------------- ResidualField

ResidualField::ResidualField(const Dataset& data,
                             std::vector<double> levels,
                             std::vector<std::vector<double>> residuals,
                             double h,
                             ProductKernel kernel,
                             int degree,
                             MultiIndex target)
  : data_(&data)
  , levels_(std::move(levels))
  , residuals_(std::move(residuals))
  , h_(h)
  , kernel_(kernel)
  , degree_(degree)
  , target_(std::move(target))
{
  require(levels_.size() == residuals_.size(), "one residual vector per level required");
  for (const auto& r : residuals_)
    require(r.size() == data.size(), "one residual per row required");
  require(h > 0.0, "bandwidth must be positive");
  if (target_.empty())
    target_.assign(data.dim(), 0);
}

double ResidualField::operator()(std::span<const double> x, std::size_t level) const
{
  if (degree_ == 0)
    return nw_quantile(*data_, residuals_[level], x, levels_[level], h_, kernel_);
  return local_poly_quantile(*data_, residuals_[level], x, levels_[level], h_, kernel_,
                             degree_, target_);
}

// ---------------------------------------------------------------- integration

FieldTable evaluate_field(const ResidualField& field,
                          const WeightFunction& w,
                          const XGrid& grid,
                          std::size_t threads)
{
  FieldTable t;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto x = grid.point(k);
    const double wk = w(k, x);
    if (wk > 0.0) {
      t.points.push_back(k);
      t.weights.push_back(wk);
    }
  }
  const std::size_t levels = field.levels().size();
  const std::size_t m = t.points.size();
  t.values.assign(levels, std::vector<double>(m, 0.0));
  t.valid.assign(levels, std::vector<char>(m, 0));
  parallel_for(m, threads, [&](std::size_t k) {
    const auto x = grid.point(t.points[k]);
    for (std::size_t a = 0; a < levels; ++a) {
      try {
        t.values[a][k] = field(x, a);
        t.valid[a][k] = 1;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::EmptyWindow && e.kind() != ErrorKind::DegenerateDesign)
          throw;
      }
    }
  });
  for (std::size_t a = 0; a < levels; ++a)
    for (char v : t.valid[a])
      (v ? t.evaluated : t.skipped) += 1;
  return t;
}

Integral integrate_table(const FieldTable& table,
                         const QuantileSet& A,
                         const XGrid& grid,
                         double max_skip_fraction)
{
  Integral out;
  out.evaluated = table.evaluated;
  out.skipped = table.skipped;
  const std::size_t attempts = table.evaluated + table.skipped;
  if (attempts > 0 &&
      static_cast<double>(table.skipped) > max_skip_fraction * static_cast<double>(attempts)) {
    std::ostringstream os;
    os << table.skipped << " of " << attempts
       << " grid evaluations had an empty kernel window; enlarge the bandwidth";
    fail(ErrorKind::SparseDesign, os.str());
  }
  std::vector<double> per_level(table.values.size());
  std::vector<double> terms;
  for (std::size_t a = 0; a < table.values.size(); ++a) {
    terms.assign(table.points.size(), 0.0);
    for (std::size_t k = 0; k < table.points.size(); ++k)
      if (table.valid[a][k])
        terms[k] = table.values[a][k] * table.values[a][k] * table.weights[k];
    per_level[a] = quad::pairwise_sum(terms);
  }
  out.value = quad::pairwise_sum(per_level) * grid.cell_volume() * A.level_weight();
  return out;
}

Integral integrate_T(const ResidualField& field,
                     const QuantileSet& A,
                     const WeightFunction& w,
                     const XGrid& grid,
                     double max_skip_fraction)
{
  return integrate_table(evaluate_field(field, w, grid), A, grid, max_skip_fraction);
}

// ------------------------------------------------------------------- plug-ins

namespace {

// Plug-in inputs at the weighted grid points.
struct PluginTable
{
  std::vector<double> w;
  std::vector<double> fx;
  std::vector<std::vector<double>> fc;   // [level][k]
  std::vector<std::vector<char>> valid;  // [level][k]
};

PluginTable tabulate(const QuantileSet& A,
                     const WeightFunction& w,
                     const XGrid& grid,
                     const DensityFn& fx,
                     const CondDensityFn& fcond)
{
  PluginTable t;
  const std::size_t levels = A.levels().size();
  t.fc.resize(levels);
  t.valid.resize(levels);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto x = grid.point(k);
    const double wk = w(k, x);
    if (!(wk > 0.0))
      continue;
    t.w.push_back(wk);
    t.fx.push_back(fx(x));
    for (std::size_t a = 0; a < levels; ++a) {
      t.fc[a].push_back(fcond(x, a));
      t.valid[a].push_back(1);
    }
  }
  return t;
}

double bias_from_table(const QuantileSet& A,
                       const PluginTable& t,
                       double cell_volume,
                       std::size_t d,
                       double conv2,
                       double h)
{
  const auto levels = A.levels();
  std::vector<double> per_level(levels.size());
  std::vector<double> terms(t.w.size());
  for (std::size_t a = 0; a < levels.size(); ++a) {
    for (std::size_t k = 0; k < t.w.size(); ++k)
      terms[k] = t.valid[a][k] ? t.w[k] / (t.fx[k] * t.fc[a][k] * t.fc[a][k]) : 0.0;
    const double alpha = levels[a];
    per_level[a] = alpha * (1.0 - alpha) * quad::pairwise_sum(terms);
  }
  return std::pow(h, -0.5 * static_cast<double>(d)) * conv2 * quad::pairwise_sum(per_level) *
         cell_volume * A.level_weight();
}

double variance_from_table(const QuantileSet& A,
                           const PluginTable& t,
                           double cell_volume,
                           double conv4,
                           VarianceDensityIndex index,
                           double singleton_factor)
{
  const auto levels = A.levels();
  std::vector<double> terms(t.w.size());
  if (A.kind == QuantileSet::Kind::Singleton) {
    for (std::size_t k = 0; k < t.w.size(); ++k) {
      const double f2 = t.fc[0][k] * t.fc[0][k];
      terms[k] = t.valid[0][k] ? t.w[k] * t.w[k] / (t.fx[k] * t.fx[k] * f2 * f2) : 0.0;
    }
    const double alpha = levels[0];
    return singleton_factor * conv4 * alpha * alpha * (1.0 - alpha) * (1.0 - alpha) *
           quad::pairwise_sum(terms) * cell_volume;
  }
  std::vector<double> pairs;
  for (std::size_t a = 0; a < levels.size(); ++a) {
    for (std::size_t b = a; b < levels.size(); ++b) {
      for (std::size_t k = 0; k < t.w.size(); ++k) {
        if (!(t.valid[a][k] && t.valid[b][k])) {
          terms[k] = 0.0;
          continue;
        }
        const double f4 = index == VarianceDensityIndex::First
                            ? std::pow(t.fc[a][k], 4)
                            : t.fc[a][k] * t.fc[a][k] * t.fc[b][k] * t.fc[b][k];
        terms[k] = t.w[k] * t.w[k] / (t.fx[k] * t.fx[k] * f4);
      }
      const double la = levels[a];
      const double lb = levels[b];
      const double cell = a == b ? 0.5 : 1.0;
      pairs.push_back(cell * la * la * (1.0 - lb) * (1.0 - lb) * quad::pairwise_sum(terms));
    }
  }
  const double da = A.level_weight();
  return 4.0 * conv4 * quad::pairwise_sum(pairs) * da * da * cell_volume;
}

} // namespace

double plugin_bias(const QuantileSet& A,
                   const WeightFunction& w,
                   const XGrid& grid,
                   const DensityFn& fx,
                   const CondDensityFn& fcond,
                   double conv2,
                   double h)
{
  require(h > 0.0, "bandwidth must be positive");
  return bias_from_table(A, tabulate(A, w, grid, fx, fcond), grid.cell_volume(), grid.dim(),
                         conv2, h);
}

double plugin_variance(const QuantileSet& A,
                       const WeightFunction& w,
                       const XGrid& grid,
                       const DensityFn& fx,
                       const CondDensityFn& fcond,
                       double conv4,
                       VarianceDensityIndex index,
                       double singleton_factor)
{
  require(singleton_factor > 0.0, "singleton variance factor must be positive");
  return variance_from_table(A, tabulate(A, w, grid, fx, fcond), grid.cell_volume(), conv4,
                             index, singleton_factor);
}

double shift_D(const QuantileSet& A,
               const WeightFunction& w,
               const XGrid& grid,
               const std::function<double(std::span<const double>, double)>& delta)
{
  const auto levels = A.levels();
  std::vector<double> per_level(levels.size());
  std::vector<double> terms(grid.size());
  for (std::size_t a = 0; a < levels.size(); ++a) {
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const auto x = grid.point(k);
      const double wk = w(k, x);
      const double dv = wk > 0.0 ? delta(x, levels[a]) : 0.0;
      terms[k] = dv * dv * wk;
    }
    per_level[a] = quad::pairwise_sum(terms);
  }
  return quad::pairwise_sum(per_level) * grid.cell_volume() * A.level_weight();
}

double statistic_scale(std::size_t n, double h, std::size_t d, int target_order)
{
  return static_cast<double>(n) *
         std::pow(h, 0.5 * static_cast<double>(d) + 2.0 * static_cast<double>(target_order));
}

Standardized standardize(double t_hat,
                         double bias,
                         double variance,
                         std::size_t n,
                         double h,
                         std::size_t d,
                         int target_order)
{
  if (!(variance > 0.0) || !std::isfinite(variance))
    fail(ErrorKind::NonPositiveVariance, "plug-in variance is not positive");
  Standardized s;
  s.z = (statistic_scale(n, h, d, target_order) * t_hat - bias) / std::sqrt(variance);
  s.p_normal = 0.5 * std::erfc(s.z / std::sqrt(2.0));
  return s;
}

// ------------------------------------------------------------------- pipeline

TestConfig resolve(const TestConfig& config, const Dataset& data)
{
  TestConfig c = config;
  const std::size_t d = data.dim();
  c.quantiles.validate();
  require(std::isfinite(c.bandwidth) && c.bandwidth > 0.0, "bandwidth must be positive");
  if (c.grid_points.empty())
    c.grid_points = XGrid::default_points(d);
  require(c.grid_points.size() == d, "grid resolution has wrong dimension");
  if (!c.weight)
    c.weight = WeightFunction::indicator(data.support().shrunk(c.bandwidth));
  if (c.weight->kind() == WeightFunction::Kind::UserGrid) {
    std::size_t total = 1;
    for (auto m : c.grid_points)
      total *= m;
    require(c.weight->values().size() == total,
            "tabulated weight must have one value per grid point");
  } else {
    require(c.weight->box().dim() == d, "weight box has wrong dimension");
  }
  if (c.target.empty())
    c.target.assign(d, 0);
  require(c.target.size() == d, "target multi-index has wrong dimension");
  require(c.degree >= 0, "degree must be nonnegative");
  require(std::accumulate(c.target.begin(), c.target.end(), 0) <= c.degree,
          "target order exceeds the local polynomial degree");
  if (c.density_bandwidth <= 0.0)
    c.density_bandwidth = c.bandwidth;
  require(c.density_floor > 0.0, "density floor must be positive");
  require(c.singleton_variance_factor > 0.0, "singleton variance factor must be positive");
  return c;
}

TestOutcome run_test(const Dataset& data,
                     const std::vector<std::vector<double>>& residuals,
                     const TestConfig& config,
                     const Eigen::MatrixXd* model_gradient)
{
  const TestConfig cfg = resolve(config, data);
  const std::size_t n = data.size();
  const std::size_t d = data.dim();
  const double h = cfg.bandwidth;
  const auto levels = cfg.quantiles.levels();
  require(residuals.size() == levels.size(), "one residual vector per quantile level required");
  const ProductKernel kernel(cfg.kernel, d);
  const int order = std::accumulate(cfg.target.begin(), cfg.target.end(), 0);

  TestOutcome out;
  TestReport& rep = out.report;
  if (cfg.degree == 0) {
    rep.conv2 = product_conv_at_zero(kernel, 2);
    rep.conv4 = product_conv_at_zero(kernel, 4);
  } else {
    const EquivalentKernel lk(cfg.kernel, d, cfg.degree, cfg.target);
    rep.conv2 = lk.conv2();
    rep.conv4 = lk.conv4();
  }

  const XGrid grid(data.support(), cfg.grid_points);
  const WeightFunction& w = *cfg.weight;
  const ResidualField field(data, levels, residuals, h, kernel, cfg.degree, cfg.target);
  out.field = evaluate_field(field, w, grid, cfg.threads);
  const Integral integral = integrate_table(out.field, cfg.quantiles, grid, cfg.max_skip_fraction);
  rep.t_hat = integral.value;
  rep.scaled_t = statistic_scale(n, h, d, order) * rep.t_hat;

  auto& diag = rep.diagnostics;
  diag.grid_points = grid.size();
  diag.weighted_points = out.field.points.size();
  diag.evaluated = integral.evaluated;
  diag.skipped = integral.skipped;

  // plug-in densities on the evaluated points
  const std::size_t m = out.field.points.size();
  PluginTable pt;
  pt.w = out.field.weights;
  pt.fx.resize(m);
  pt.valid = out.field.valid;
  pt.fc.assign(levels.size(), std::vector<double>(m, 0.0));
  for (std::size_t k = 0; k < m; ++k) {
    const auto fx = estimate_fx(data, grid.point(out.field.points[k]), cfg.density_bandwidth,
                                kernel, cfg.density_floor);
    pt.fx[k] = fx.value;
    diag.fx_clamp_hits += fx.clamped;
  }
  CondDensityEstimator::Options opt;
  opt.h_x = cfg.density_bandwidth;
  opt.h_e = cfg.error_bandwidth;
  opt.floor = cfg.density_floor;
  const bool want_bootstrap = cfg.bootstrap.replicates > 0;
  if (want_bootstrap)
    out.density_at_rows.assign(levels.size(), std::vector<double>(n, 0.0));
  for (std::size_t a = 0; a < levels.size(); ++a) {
    const CondDensityEstimator fc(data, residuals[a], levels[a], h, kernel, opt);
    std::vector<char> clamped(m, 0);
    parallel_for(m, cfg.threads, [&](std::size_t k) {
      if (!pt.valid[a][k])
        return;
      const auto v = fc(grid.point(out.field.points[k]));
      pt.fc[a][k] = v.value;
      clamped[k] = v.clamped;
    });
    diag.fcond_clamp_hits += static_cast<std::size_t>(std::count(clamped.begin(), clamped.end(), 1));
    if (want_bootstrap) {
      for (std::size_t i = 0; i < n; ++i) {
        const auto v = fc(data.row(i));
        out.density_at_rows[a][i] = v.value;
        diag.fcond_clamp_hits += v.clamped;
      }
    }
  }

  rep.bias = bias_from_table(cfg.quantiles, pt, grid.cell_volume(), d, rep.conv2, h);
  rep.variance = variance_from_table(cfg.quantiles, pt, grid.cell_volume(), rep.conv4,
                                     cfg.variance_index, cfg.singleton_variance_factor);
  const auto st = standardize(rep.t_hat, rep.bias, rep.variance, n, h, d, order);
  rep.z = st.z;
  rep.p_normal = st.p_normal;

  const double dd = static_cast<double>(d);
  if (cfg.degree == 0) {
    diag.n_h_power = static_cast<double>(n) * std::pow(h, 1.5 * dd);
    if (diag.n_h_power < 10.0)
      diag.warnings.push_back("bandwidth regime: n h^{3d/2} < 10");
  } else {
    diag.n_h_power = static_cast<double>(n) * std::pow(h, 3.0 * dd);
    if (diag.n_h_power < 10.0)
      diag.warnings.push_back("bandwidth regime: n h^{3d} < 10 (local polynomial)");
  }
  if (diag.fcond_clamp_hits > 0)
    diag.warnings.push_back("conditional density estimate clamped at the floor");

  rep.calibration = cfg.degree == 0 ? "bootstrap" : "heuristic calibration";
  if (want_bootstrap) {
    auto plan = make_bootstrap_plan(data, out.field, cfg.quantiles, grid, h, kernel,
                                    out.density_at_rows, cfg.degree, cfg.target, cfg.threads);
    if (cfg.bootstrap.parameter_correction && model_gradient != nullptr)
      correct_for_parameter_estimation(plan, *model_gradient, out.density_at_rows);
    out.replicates = bootstrap_replicates(plan, cfg.bootstrap.replicates, cfg.bootstrap.seed,
                                          cfg.threads);
    rep.p_bootstrap = bootstrap_pvalue(rep.t_hat, out.replicates);
  }
  return out;
}

TestOutcome local_poly_test(const Dataset& data,
                            const std::vector<std::vector<double>>& residuals,
                            const TestConfig& config,
                            const Eigen::MatrixXd* model_gradient)
{
  return run_test(data, residuals, config, model_gradient);
}

} // namespace qspec
