#include "qspec/parametric.hpp"

#include "qspec/error.hpp"
#include "qspec/linear_quantile.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace qspec {

std::string Term::name() const
{
  if (a < 0)
    return "1";
  const std::string xa = "x" + std::to_string(a + 1);
  if (b < 0)
    return xa;
  if (a == b)
    return xa + "^2";
  return xa + "*x" + std::to_string(b + 1);
}

ParametricQuantileModel::ParametricQuantileModel(std::vector<Term> terms)
  : terms_(std::move(terms))
{
  require(!terms_.empty(), "model needs at least one term");
  require(terms_.front().a < 0, "the first basis function must be the constant");
  for (std::size_t i = 0; i < terms_.size(); ++i)
    for (std::size_t k = i + 1; k < terms_.size(); ++k)
      require(!(terms_[i] == terms_[k]), "duplicate term " + terms_[i].name());
}

namespace {

std::string strip(std::string_view s)
{
  std::string out;
  for (char c : s)
    if (!std::isspace(static_cast<unsigned char>(c)))
      out.push_back(c);
  return out;
}

int parse_var(const std::string& s, const std::string& whole)
{
  if (s.size() < 2 || s[0] != 'x' ||
      !std::all_of(s.begin() + 1, s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
    fail(ErrorKind::Usage, "bad term '" + whole + "' in formula (expected x<j>)");
  const int j = std::stoi(s.substr(1));
  if (j < 1)
    fail(ErrorKind::Usage, "covariate indices in formulas start at 1");
  return j - 1;
}

Term parse_term(const std::string& t)
{
  if (t == "1")
    return {};
  if (const auto star = t.find('*'); star != std::string::npos) {
    int a = parse_var(t.substr(0, star), t);
    int b = parse_var(t.substr(star + 1), t);
    if (a > b)
      std::swap(a, b);
    return {a, b};
  }
  if (const auto caret = t.find('^'); caret != std::string::npos) {
    if (t.substr(caret + 1) != "2")
      fail(ErrorKind::Usage, "only squares are supported in term '" + t + "'");
    const int a = parse_var(t.substr(0, caret), t);
    return {a, a};
  }
  return {parse_var(t, t), -1};
}

} // namespace

ParametricQuantileModel ParametricQuantileModel::from_formula(std::string_view formula)
{
  const std::string f = strip(formula);
  if (f.empty())
    fail(ErrorKind::Usage, "empty model formula");
  std::vector<Term> terms;
  std::stringstream ss(f);
  std::string t;
  while (std::getline(ss, t, '+')) {
    if (t.empty())
      fail(ErrorKind::Usage, "empty term in formula '" + f + "'");
    terms.push_back(parse_term(t));
  }
  auto one = std::find(terms.begin(), terms.end(), Term{});
  if (one == terms.end())
    fail(ErrorKind::Usage, "formula must contain the constant term 1");
  std::rotate(terms.begin(), one, one + 1);
  try {
    return ParametricQuantileModel(std::move(terms));
  } catch (const Error& e) {
    fail(ErrorKind::Usage, e.what());
  }
}

std::string ParametricQuantileModel::formula() const
{
  std::string s;
  for (std::size_t i = 0; i < terms_.size(); ++i)
    s += (i ? " + " : "") + terms_[i].name();
  return s;
}

std::size_t ParametricQuantileModel::min_dim() const noexcept
{
  int m = -1;
  for (const auto& t : terms_)
    m = std::max({m, t.a, t.b});
  return static_cast<std::size_t>(m + 1);
}

Eigen::VectorXd ParametricQuantileModel::basis(std::span<const double> x) const
{
  Eigen::VectorXd b(static_cast<Eigen::Index>(terms_.size()));
  for (std::size_t k = 0; k < terms_.size(); ++k)
    b(static_cast<Eigen::Index>(k)) = terms_[k](x);
  return b;
}

Eigen::MatrixXd ParametricQuantileModel::design(const Dataset& data) const
{
  require(data.dim() >= min_dim(), "formula refers to more covariates than the data has");
  Eigen::MatrixXd z(static_cast<Eigen::Index>(data.size()),
                    static_cast<Eigen::Index>(terms_.size()));
  for (std::size_t i = 0; i < data.size(); ++i)
    z.row(static_cast<Eigen::Index>(i)) = basis(data.row(i)).transpose();
  return z;
}

void ParametricQuantileModel::set_fit(double alpha, Eigen::VectorXd theta)
{
  require(theta.size() == static_cast<Eigen::Index>(terms_.size()),
          "parameter vector has wrong length");
  require(!has_fit(alpha), "quantile level already fitted");
  fits_.emplace(alpha, std::move(theta));
}

const Eigen::VectorXd& ParametricQuantileModel::theta(double alpha) const
{
  const auto it = fits_.find(alpha);
  if (it == fits_.end())
    fail(ErrorKind::NotFitted, "model not fitted at alpha = " + std::to_string(alpha));
  return it->second;
}

Eigen::VectorXd fit_parametric(const Dataset& data,
                               double alpha,
                               const ParametricQuantileModel& model)
{
  const Eigen::MatrixXd z = model.design(data);
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(z.rows());
  return fit_linear_quantile(z, data.y(), w, alpha).coef;
}

double eval_model(const ParametricQuantileModel& model,
                  double alpha,
                  std::span<const double> x)
{
  return model.theta(alpha).dot(model.basis(x));
}

Eigen::VectorXd gradient_gamma(const ParametricQuantileModel& model,
                               double,
                               std::span<const double> x)
{
  return model.basis(x);
}

std::vector<double> model_residuals(const Dataset& data,
                                    const ParametricQuantileModel& model,
                                    double alpha)
{
  const Eigen::VectorXd fitted = model.design(data) * model.theta(alpha);
  std::vector<double> r(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    r[i] = data.y()(static_cast<Eigen::Index>(i)) - fitted(static_cast<Eigen::Index>(i));
  return r;
}

} // namespace qspec
