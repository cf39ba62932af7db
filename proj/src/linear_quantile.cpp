#include "qspec/linear_quantile.hpp"

#include "qspec/error.hpp"
#include "qspec/wquantile.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace qspec {

double linear_quantile_objective(const Eigen::MatrixXd& design,
                                 const Eigen::VectorXd& response,
                                 const Eigen::VectorXd& weights,
                                 double alpha,
                                 const Eigen::VectorXd& coef)
{
  const Eigen::VectorXd res = response - design * coef;
  double s = 0.0;
  for (Eigen::Index i = 0; i < res.size(); ++i)
    if (weights(i) > 0.0)
      s += weights(i) * check_loss_unchecked(alpha, res(i));
  return s;
}

namespace {

[[noreturn]] void degenerate(const std::string& why)
{
  fail(ErrorKind::DegenerateDesign, "rank-deficient design: " + why);
}

// Pick q rows in general position, preferring rows the least-squares fit
// nearly interpolates.
std::vector<Eigen::Index> initial_basis(const Eigen::MatrixXd& z,
                                        const Eigen::VectorXd& r,
                                        const Eigen::VectorXd& w)
{
  const Eigen::Index n = z.rows();
  const Eigen::Index q = z.cols();
  const Eigen::VectorXd sw = w.array().sqrt();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sw.asDiagonal() * z);
  qr.setThreshold(1e-10);
  if (qr.rank() < q)
    degenerate("weighted design has rank " + std::to_string(qr.rank()) + " < " +
               std::to_string(q));
  const Eigen::VectorXd b = qr.solve(sw.asDiagonal() * r);
  const Eigen::VectorXd res = r - z * b;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index c) {
    return std::abs(res(a)) < std::abs(res(c));
  });

  std::vector<Eigen::Index> basis;
  std::vector<Eigen::VectorXd> ortho;
  for (Eigen::Index i : order) {
    Eigen::VectorXd v = z.row(i).transpose();
    const double norm0 = v.norm();
    if (norm0 == 0.0)
      continue;
    for (const auto& u : ortho)
      v -= u.dot(v) * u;
    if (v.norm() > 1e-8 * norm0) {
      ortho.push_back(v.normalized());
      basis.push_back(i);
      if (static_cast<Eigen::Index>(basis.size()) == q)
        break;
    }
  }
  if (static_cast<Eigen::Index>(basis.size()) < q)
    degenerate("no " + std::to_string(q) + " rows in general position");
  return basis;
}

} // namespace

LinearQuantileFit fit_linear_quantile(const Eigen::MatrixXd& design,
                                      const Eigen::VectorXd& response,
                                      const Eigen::VectorXd& weights,
                                      double alpha)
{
  require(alpha > 0.0 && alpha < 1.0, "quantile level must lie in (0, 1)");
  require(design.rows() == response.size() && design.rows() == weights.size(),
          "design, response and weights differ in length");
  const Eigen::Index q = design.cols();
  require(q >= 1, "design needs at least one column");

  // compact to positively weighted rows
  std::vector<Eigen::Index> active;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    require(std::isfinite(weights(i)) && weights(i) >= 0.0,
            "weights must be finite and nonnegative");
    if (weights(i) > 0.0)
      active.push_back(i);
  }
  const auto n = static_cast<Eigen::Index>(active.size());
  if (n < q)
    degenerate(std::to_string(n) + " weighted rows for " + std::to_string(q) +
               " coefficients");
  Eigen::MatrixXd z(n, q);
  Eigen::VectorXd r(n);
  Eigen::VectorXd w(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    z.row(k) = design.row(active[static_cast<std::size_t>(k)]);
    r(k) = response(active[static_cast<std::size_t>(k)]);
    w(k) = weights(active[static_cast<std::size_t>(k)]);
  }

  std::vector<Eigen::Index> basis = initial_basis(z, r, w);
  std::vector<char> in_basis(static_cast<std::size_t>(n), 0);
  for (Eigen::Index i : basis)
    in_basis[static_cast<std::size_t>(i)] = 1;

  Eigen::MatrixXd bmat(q, q);
  Eigen::VectorXd rb(q);
  Eigen::VectorXd coef(q);
  Eigen::VectorXd res(n);
  Eigen::MatrixXd slopes(n, q); // z_i' B^{-1} e_j
  struct Breakpoint
  {
    double t;
    Eigen::Index row;
  };
  std::vector<Breakpoint> breaks;
  breaks.reserve(static_cast<std::size_t>(n));

  const int max_iter = 50 * static_cast<int>(n + q) + 100;
  int iter = 0;
  for (;; ++iter) {
    if (iter > max_iter)
      fail(ErrorKind::DegenerateDesign, "quantile regression did not terminate");
    for (Eigen::Index j = 0; j < q; ++j) {
      bmat.row(j) = z.row(basis[static_cast<std::size_t>(j)]);
      rb(j) = r(basis[static_cast<std::size_t>(j)]);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(bmat);
    if (!lu.isInvertible())
      degenerate("basis became singular");
    const Eigen::MatrixXd binv = lu.inverse();
    coef = binv * rb;
    res = r - z * coef;
    for (Eigen::Index i : basis)
      res(i) = 0.0;
    slopes.noalias() = z * binv;

    // gradient of the smooth part: sum over nonbasic rows with nonzero residual
    Eigen::VectorXd g = Eigen::VectorXd::Zero(q);
    std::vector<Eigen::Index> flat;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (in_basis[static_cast<std::size_t>(i)])
        continue;
      if (res(i) > 0.0)
        g += w(i) * alpha * slopes.row(i).transpose();
      else if (res(i) < 0.0)
        g += w(i) * (alpha - 1.0) * slopes.row(i).transpose();
      else
        flat.push_back(i);
    }
    // g(j) = sum_i w_i psi_i z_i' delta_j with delta_j = B^{-1} e_j

    double best = 0.0;
    Eigen::Index best_j = -1;
    double best_s = 0.0;
    double scale = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      scale += w(i) * slopes.row(i).cwiseAbs().maxCoeff();
    const double tol = 1e-12 * std::max(scale, 1e-300);
    for (Eigen::Index j = 0; j < q; ++j) {
      const double wj = w(basis[static_cast<std::size_t>(j)]);
      for (double s : {1.0, -1.0}) {
        double deriv = -s * g(j) + wj * (s > 0.0 ? 1.0 - alpha : alpha);
        for (Eigen::Index i : flat)
          deriv += w(i) * check_loss_unchecked(alpha, -s * slopes(i, j));
        if (deriv < best - tol) {
          best = deriv;
          best_j = j;
          best_s = s;
        }
      }
    }
    if (best_j < 0)
      break;

    // exact line search along delta = s B^{-1} e_j: the objective is convex
    // piecewise linear in t with kinks at res_i / a_i
    breaks.clear();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double a = best_s * slopes(i, best_j);
      if (a == 0.0 || res(i) == 0.0)
        continue;
      const double t = res(i) / a;
      if (t > 0.0)
        breaks.push_back({t, i});
    }
    std::sort(breaks.begin(), breaks.end(),
              [](const Breakpoint& a, const Breakpoint& b) { return a.t < b.t; });
    double slope = best;
    Eigen::Index entering = -1;
    for (const auto& bp : breaks) {
      slope += w(bp.row) * std::abs(best_s * slopes(bp.row, best_j));
      if (slope >= 0.0) {
        entering = bp.row;
        break;
      }
    }
    if (entering < 0)
      degenerate("objective unbounded along an edge");

    const Eigen::Index leaving = basis[static_cast<std::size_t>(best_j)];
    in_basis[static_cast<std::size_t>(leaving)] = 0;
    in_basis[static_cast<std::size_t>(entering)] = 1;
    basis[static_cast<std::size_t>(best_j)] = entering;
  }

  LinearQuantileFit fit;
  fit.coef = coef;
  fit.iterations = iter;
  double obj = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    obj += w(i) * check_loss_unchecked(alpha, res(i));
  fit.objective = obj;
  return fit;
}

} // namespace qspec
