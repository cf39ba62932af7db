#include "qspec/bootstrap.hpp"

#include "qspec/error.hpp"
#include "qspec/parallel.hpp"
#include "qspec/smoother.hpp"

namespace qspec {

BootstrapPlan make_bootstrap_plan(const Dataset& data,
                                  const FieldTable& table,
                                  const QuantileSet& A,
                                  const XGrid& grid,
                                  double h,
                                  const ProductKernel& kernel,
                                  const std::vector<std::vector<double>>& density_at_rows,
                                  int degree,
                                  const MultiIndex& target,
                                  std::size_t threads)
{
  BootstrapPlan plan;
  plan.levels = A.levels();
  plan.n = data.size();
  require(density_at_rows.size() == plan.levels.size(), "one density vector per level required");
  const MultiIndex tgt = target.empty() ? MultiIndex(data.dim(), 0) : target;
  const auto n = static_cast<Eigen::Index>(data.size());
  const double cell = grid.cell_volume() * A.level_weight();

  for (std::size_t a = 0; a < plan.levels.size(); ++a) {
    std::vector<std::size_t> rows;
    for (std::size_t k = 0; k < table.points.size(); ++k)
      if (table.valid[a][k])
        rows.push_back(k);
    Eigen::MatrixXd map(static_cast<Eigen::Index>(rows.size()), n);
    Eigen::VectorXd cells(static_cast<Eigen::Index>(rows.size()));
    parallel_for(rows.size(), threads, [&](std::size_t r) {
      const std::size_t k = rows[r];
      const auto x = grid.point(table.points[k]);
      const auto coef =
        linearization_weights(data, x, h, kernel, density_at_rows[a], degree, tgt);
      for (Eigen::Index i = 0; i < n; ++i)
        map(static_cast<Eigen::Index>(r), i) = coef[static_cast<std::size_t>(i)];
      cells(static_cast<Eigen::Index>(r)) = table.weights[k] * cell;
    });
    plan.maps.push_back(std::move(map));
    plan.cells.push_back(std::move(cells));
  }
  return plan;
}

void correct_for_parameter_estimation(BootstrapPlan& plan,
                                      const Eigen::MatrixXd& gradient,
                                      const std::vector<std::vector<double>>& density_at_rows)
{
  require(static_cast<std::size_t>(gradient.rows()) == plan.n,
          "model gradient must have one row per observation");
  require(density_at_rows.size() == plan.levels.size(), "one density vector per level required");
  for (std::size_t a = 0; a < plan.levels.size(); ++a) {
    const Eigen::Map<const Eigen::VectorXd> f(density_at_rows[a].data(),
                                              static_cast<Eigen::Index>(plan.n));
    const Eigen::MatrixXd fg = f.asDiagonal() * gradient;
    const Eigen::MatrixXd J = gradient.transpose() * fg;
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
    if (lu.rank() < J.rows())
      fail(ErrorKind::DegenerateDesign, "parametric information matrix is singular");
    const Eigen::MatrixXd mfg = plan.maps[a] * fg;
    plan.maps[a].noalias() -= lu.solve(mfg.transpose()).transpose() * gradient.transpose();
  }
}

double bootstrap_statistic(const BootstrapPlan& plan, RngStream& rng)
{
  const auto n = static_cast<Eigen::Index>(plan.n);
  Eigen::VectorXd u(n);
  for (Eigen::Index i = 0; i < n; ++i)
    u(i) = rng.uniform();
  Eigen::VectorXd xi(n);
  Eigen::VectorXd field;
  double total = 0.0;
  for (std::size_t a = 0; a < plan.levels.size(); ++a) {
    const double alpha = plan.levels[a];
    for (Eigen::Index i = 0; i < n; ++i)
      xi(i) = (u(i) <= alpha ? 1.0 : 0.0) - alpha;
    // the sign of r~* drops out of the square
    field.noalias() = plan.maps[a] * xi;
    total += plan.cells[a].dot(field.cwiseAbs2());
  }
  return total;
}

std::vector<double> bootstrap_replicates(const BootstrapPlan& plan,
                                         std::size_t replicates,
                                         std::uint64_t seed,
                                         std::size_t threads)
{
  std::vector<double> out(replicates);
  parallel_for(replicates, threads, [&](std::size_t b) {
    RngStream rng(seed, b);
    out[b] = bootstrap_statistic(plan, rng);
  });
  return out;
}

double bootstrap_pvalue(double t_obs, std::span<const double> replicates)
{
  std::size_t exceed = 0;
  for (double t : replicates)
    exceed += t >= t_obs;
  return (1.0 + static_cast<double>(exceed)) / (static_cast<double>(replicates.size()) + 1.0);
}

} // namespace qspec
