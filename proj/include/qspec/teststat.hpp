#pragma once

#include "qspec/dataset.hpp"
#include "qspec/kernels.hpp"
#include "qspec/smoother.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qspec {

//! The quantile set A: a single level or a closed interval, the latter
//! discretized by the midpoint rule.
struct QuantileSet
{
  enum class Kind { Singleton, Interval };

  Kind kind = Kind::Singleton;
  double lo = 0.5;
  double hi = 0.5;
  std::size_t grid = 20;

  static QuantileSet singleton(double alpha);
  static QuantileSet interval(double lo, double hi, std::size_t grid = 20);

  void validate() const;
  std::vector<double> levels() const;
  //! d-alpha of each level (1 for a singleton).
  double level_weight() const;
};

//! Tensor midpoint grid over a box.
class XGrid
{
public:
  XGrid(Box box, std::vector<std::size_t> points_per_axis);
  //! 200 points for d = 1, 50 per axis otherwise.
  static std::vector<std::size_t> default_points(std::size_t d);

  std::size_t size() const noexcept { return size_; }
  std::size_t dim() const noexcept { return box_.dim(); }
  const Box& box() const noexcept { return box_; }
  const std::vector<std::size_t>& points_per_axis() const noexcept { return points_; }
  double cell_volume() const noexcept { return volume_; }
  //! Point k in row-major order (last axis fastest).
  std::vector<double> point(std::size_t k) const;

private:
  Box box_;
  std::vector<std::size_t> points_;
  std::size_t size_ = 0;
  double volume_ = 1.0;
};

//! Weight w(x), constant in alpha.
class WeightFunction
{
public:
  enum class Kind { IndicatorBox, UserGrid };

  static WeightFunction indicator(Box inner);
  //! Values tabulated on the integration grid, row-major.
  static WeightFunction user_grid(std::vector<double> values);

  Kind kind() const noexcept { return kind_; }
  const Box& box() const noexcept { return box_; }
  const std::vector<double>& values() const noexcept { return values_; }

  double operator()(std::size_t grid_index, std::span<const double> x) const;

  //! Same weight multiplied by c > 0.
  WeightFunction scaled(double c) const;

private:
  Kind kind_ = Kind::IndicatorBox;
  Box box_;
  std::vector<double> values_;
  double scale_ = 1.0;
};

//! Residual quantile field r-hat_alpha(x) over the quantile levels.
class ResidualField
{
public:
  //! residuals[a] holds Y_i - m_{alpha_a, theta-hat}(X_i).
  ResidualField(const Dataset& data,
                std::vector<double> levels,
                std::vector<std::vector<double>> residuals,
                double h,
                ProductKernel kernel,
                int degree = 0,
                MultiIndex target = {});

  double operator()(std::span<const double> x, std::size_t level) const;

  const Dataset& data() const noexcept { return *data_; }
  const std::vector<double>& levels() const noexcept { return levels_; }
  const std::vector<double>& residuals(std::size_t level) const { return residuals_[level]; }
  double bandwidth() const noexcept { return h_; }
  const ProductKernel& kernel() const noexcept { return kernel_; }
  int degree() const noexcept { return degree_; }
  const MultiIndex& target() const noexcept { return target_; }

private:
  const Dataset* data_;
  std::vector<double> levels_;
  std::vector<std::vector<double>> residuals_;
  double h_;
  ProductKernel kernel_;
  int degree_;
  MultiIndex target_;
};

//! Field values on the weighted grid points.
struct FieldTable
{
  std::vector<std::size_t> points;            //!< grid indices with w > 0
  std::vector<double> weights;                //!< w at those points
  std::vector<std::vector<double>> values;    //!< [level][k]
  std::vector<std::vector<char>> valid;       //!< [level][k]
  std::size_t skipped = 0;
  std::size_t evaluated = 0;
};

FieldTable evaluate_field(const ResidualField& field,
                          const WeightFunction& w,
                          const XGrid& grid,
                          std::size_t threads = 1);

struct Integral
{
  double value = 0.0;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;
};

//! Throws SparseDesign when more than `max_skip_fraction` of the weighted
//! evaluations failed.
Integral integrate_table(const FieldTable& table,
                         const QuantileSet& A,
                         const XGrid& grid,
                         double max_skip_fraction = 0.01);

//! Midpoint-rule T-hat = int_A int r-hat^2 w dx d-alpha.
Integral integrate_T(const ResidualField& field,
                     const QuantileSet& A,
                     const WeightFunction& w,
                     const XGrid& grid,
                     double max_skip_fraction = 0.01);

//! How f(0|x)^4 is formed for a pair of levels alpha < beta in V_A.
enum class VarianceDensityIndex { First, Symmetrized };

inline constexpr double default_singleton_factor = 2.0;

using DensityFn = std::function<double(std::span<const double> x)>;
using CondDensityFn = std::function<double(std::span<const double> x, std::size_t level)>;

//! b-hat_h = h^{-d/2} conv2 int_A alpha (1 - alpha) int w / (f_X f_c^2).
double plugin_bias(const QuantileSet& A,
                   const WeightFunction& w,
                   const XGrid& grid,
                   const DensityFn& fx,
                   const CondDensityFn& fcond,
                   double conv2,
                   double h);

//! Singleton: s conv4 alpha^2 (1 - alpha)^2 int w^2 / (f_X^2 f_c^4) with
//! s = singleton_factor.
//! Interval: 4 conv4 int_{alpha < beta} alpha^2 (1 - beta)^2
//!           int w w / (f_X^2 f_c^4) over the alpha grid, diagonal cells
//!           counted with weight one half.
//! The interval constant shrinks to the singleton one with s = 2 as the
//! interval collapses; s = 4 is kept as an option.
double plugin_variance(const QuantileSet& A,
                       const WeightFunction& w,
                       const XGrid& grid,
                       const DensityFn& fx,
                       const CondDensityFn& fcond,
                       double conv4,
                       VarianceDensityIndex index = VarianceDensityIndex::First,
                       double singleton_factor = default_singleton_factor);

//! D = int_A int Delta^2 w.
double shift_D(const QuantileSet& A,
               const WeightFunction& w,
               const XGrid& grid,
               const std::function<double(std::span<const double>, double)>& delta);

struct Standardized
{
  double z = 0.0;
  double p_normal = 0.0;
};

//! Z = (n h^e T - b) / sqrt(V) with e = d/2 + 2 |target|; one-sided p.
Standardized standardize(double t_hat,
                         double bias,
                         double variance,
                         std::size_t n,
                         double h,
                         std::size_t d,
                         int target_order = 0);

//! n h^{d/2 + 2 |target|}.
double statistic_scale(std::size_t n, double h, std::size_t d, int target_order = 0);

struct BootstrapSettings
{
  std::size_t replicates = 0; //!< 0 disables the bootstrap
  std::uint64_t seed = 0;
  //! Propagate the linearized parametric refit into r~* (needs the model
  //! gradient at the rows).
  bool parameter_correction = true;
};

struct TestConfig
{
  QuantileSet quantiles;
  Kernel1D kernel;
  double bandwidth = 0.0;
  std::optional<WeightFunction> weight;        //!< default: support shrunk by h
  std::vector<std::size_t> grid_points;        //!< empty: XGrid::default_points
  int degree = 0;
  MultiIndex target;                           //!< empty: zero multi-index
  BootstrapSettings bootstrap;
  VarianceDensityIndex variance_index = VarianceDensityIndex::First;
  double singleton_variance_factor = default_singleton_factor;
  double density_floor = default_density_floor;
  std::optional<double> error_bandwidth;       //!< h_e; unset: normal reference
  double density_bandwidth = 0.0;              //!< h_x and f_X bandwidth; <= 0: h
  double max_skip_fraction = 0.01;
  std::size_t threads = 1;
};

struct TestDiagnostics
{
  std::size_t grid_points = 0;
  std::size_t weighted_points = 0;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;
  std::size_t fx_clamp_hits = 0;
  std::size_t fcond_clamp_hits = 0;
  double n_h_power = 0.0; //!< n h^{3d/2} (local constant) or n h^{3d}
  std::vector<std::string> warnings;
};

struct TestReport
{
  double t_hat = 0.0;
  double scaled_t = 0.0;
  double bias = 0.0;
  double variance = 0.0;
  double z = 0.0;
  double p_normal = 0.0;
  std::optional<double> p_bootstrap;
  std::string calibration;          //!< "bootstrap" or "heuristic calibration"
  double conv2 = 0.0;
  double conv4 = 0.0;
  TestDiagnostics diagnostics;
};

struct TestOutcome
{
  TestReport report;
  FieldTable field;
  std::vector<double> replicates;
  //! f-hat(0 | X_i) per level, used by the bootstrap
  std::vector<std::vector<double>> density_at_rows;
};

//! Resolve defaults that depend on the data (weight box, grid, target).
TestConfig resolve(const TestConfig& config, const Dataset& data);

//! Full test on smoothing coordinates given residuals per level.
//! `model_gradient` (n x q, rows d m / d theta at X_i) enables the
//! parameter correction of the bootstrap when that option is on.
TestOutcome run_test(const Dataset& data,
                     const std::vector<std::vector<double>>& residuals,
                     const TestConfig& config,
                     const Eigen::MatrixXd* model_gradient = nullptr);

//! Same pipeline with the local polynomial smoother of degree p.
TestOutcome local_poly_test(const Dataset& data,
                            const std::vector<std::vector<double>>& residuals,
                            const TestConfig& config,
                            const Eigen::MatrixXd* model_gradient = nullptr);

} // namespace qspec
