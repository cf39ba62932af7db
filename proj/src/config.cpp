#include "qspec/config.hpp"

#include "qspec/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace qspec {

using nlohmann::json;

namespace {

[[noreturn]] void usage(const std::string& what)
{
  fail(ErrorKind::Usage, what);
}

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed)
{
  if (!j.is_object())
    usage(where + " must be a JSON object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items())
    if (!ok.count(key))
      usage("unknown key '" + key + "' in " + where);
}

template <class T>
T get(const json& j, const char* key, const std::string& where)
{
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    usage("bad value for '" + std::string(key) + "' in " + where);
  }
}

double get_number(const json& j, const char* key, const std::string& where)
{
  if (!j.at(key).is_number())
    usage("'" + std::string(key) + "' in " + where + " must be a number");
  return j.at(key).get<double>();
}

std::string rule_name(BandwidthRule r)
{
  switch (r) {
    case BandwidthRule::Fixed: return "fixed";
    case BandwidthRule::RateOptimal: return "rate_optimal";
    case BandwidthRule::MinimaxTesting: return "minimax_testing";
  }
  return "";
}

BandwidthRule parse_rule(const std::string& s)
{
  if (s == "fixed")
    return BandwidthRule::Fixed;
  if (s == "rate_optimal")
    return BandwidthRule::RateOptimal;
  if (s == "minimax_testing")
    return BandwidthRule::MinimaxTesting;
  usage("unknown bandwidth rule '" + s + "'");
}

std::vector<std::size_t> parse_points(const json& j)
{
  if (j.is_number_unsigned())
    return {j.get<std::size_t>()};
  if (!j.is_array())
    usage("grid.x_points must be a positive integer or an array of them");
  std::vector<std::size_t> v;
  for (const auto& e : j) {
    if (!e.is_number_unsigned() || e.get<std::size_t>() == 0)
      usage("grid.x_points must be positive integers");
    v.push_back(e.get<std::size_t>());
  }
  return v;
}

} // namespace

RunConfig parse_config(const json& j)
{
  check_keys(j,
             "config",
             {"data", "covariates", "response", "formula", "quantiles", "kernel", "bandwidth",
              "weight", "grid", "bootstrap", "local_poly", "variance", "standardize", "density",
              "max_skip_fraction", "threads"});
  RunConfig c;
  if (j.contains("data"))
    c.data = get<std::string>(j, "data", "config");
  if (j.contains("covariates"))
    c.covariates = get<std::vector<std::string>>(j, "covariates", "config");
  if (j.contains("response"))
    c.response = get<std::string>(j, "response", "config");
  if (j.contains("formula"))
    c.formula = get<std::string>(j, "formula", "config");
  if (j.contains("kernel"))
    c.kernel = get<std::string>(j, "kernel", "config");

  if (j.contains("quantiles")) {
    const auto& q = j["quantiles"];
    check_keys(q, "quantiles", {"alpha", "lo", "hi", "grid"});
    if (q.contains("alpha")) {
      if (q.contains("lo") || q.contains("hi"))
        usage("quantiles takes either alpha or lo/hi");
      c.quantiles = QuantileSet::singleton(get_number(q, "alpha", "quantiles"));
    } else if (q.contains("lo") && q.contains("hi")) {
      const std::size_t grid = q.contains("grid") ? get<std::size_t>(q, "grid", "quantiles") : 20;
      c.quantiles = QuantileSet::interval(get_number(q, "lo", "quantiles"),
                                          get_number(q, "hi", "quantiles"),
                                          grid);
    } else {
      usage("quantiles needs alpha, or lo and hi");
    }
  }

  if (j.contains("bandwidth")) {
    const auto& b = j["bandwidth"];
    check_keys(b, "bandwidth", {"value", "rule", "constant"});
    if (b.contains("rule"))
      c.bandwidth.rule = parse_rule(get<std::string>(b, "rule", "bandwidth"));
    else if (b.contains("value"))
      c.bandwidth.rule = BandwidthRule::Fixed;
    if (b.contains("value"))
      c.bandwidth.value = get_number(b, "value", "bandwidth");
    if (b.contains("constant"))
      c.bandwidth.constant = get_number(b, "constant", "bandwidth");
    if (c.bandwidth.rule == BandwidthRule::Fixed && !c.bandwidth.value)
      usage("a fixed bandwidth needs a value");
  }

  if (j.contains("weight")) {
    const auto& w = j["weight"];
    check_keys(w, "weight", {"type", "shrink", "lo", "hi", "values"});
    const std::string type = w.contains("type") ? get<std::string>(w, "type", "weight") : "shrunk_support";
    if (type == "shrunk_support") {
      c.weight.kind = WeightSpec::Kind::ShrunkSupport;
      if (w.contains("shrink"))
        c.weight.shrink = get_number(w, "shrink", "weight");
    } else if (type == "box") {
      c.weight.kind = WeightSpec::Kind::Box;
      c.weight.lo = get<std::vector<double>>(w, "lo", "weight");
      c.weight.hi = get<std::vector<double>>(w, "hi", "weight");
    } else if (type == "grid") {
      c.weight.kind = WeightSpec::Kind::Grid;
      c.weight.values = get<std::vector<double>>(w, "values", "weight");
    } else {
      usage("unknown weight type '" + type + "'");
    }
  }

  if (j.contains("grid")) {
    const auto& g = j["grid"];
    check_keys(g, "grid", {"x_points"});
    if (g.contains("x_points"))
      c.x_points = parse_points(g["x_points"]);
  }

  if (j.contains("bootstrap")) {
    const auto& b = j["bootstrap"];
    check_keys(b, "bootstrap", {"B", "seed", "parameter_correction"});
    if (b.contains("B"))
      c.bootstrap_replicates = get<std::size_t>(b, "B", "bootstrap");
    if (b.contains("seed"))
      c.bootstrap_seed = get<std::uint64_t>(b, "seed", "bootstrap");
    if (b.contains("parameter_correction"))
      c.parameter_correction = get<bool>(b, "parameter_correction", "bootstrap");
  }

  if (j.contains("local_poly")) {
    const auto& l = j["local_poly"];
    check_keys(l, "local_poly", {"degree", "nu"});
    if (l.contains("degree"))
      c.degree = get<int>(l, "degree", "local_poly");
    if (l.contains("nu"))
      c.nu = get<MultiIndex>(l, "nu", "local_poly");
  }

  if (j.contains("variance")) {
    const auto& v = j["variance"];
    check_keys(v, "variance", {"density_index", "singleton_factor"});
    if (v.contains("density_index")) {
      const auto s = get<std::string>(v, "density_index", "variance");
      if (s == "first")
        c.variance_index = VarianceDensityIndex::First;
      else if (s == "symmetrized")
        c.variance_index = VarianceDensityIndex::Symmetrized;
      else
        usage("variance.density_index must be 'first' or 'symmetrized'");
    }
    if (v.contains("singleton_factor"))
      c.singleton_variance_factor = get_number(v, "singleton_factor", "variance");
  }

  if (j.contains("standardize"))
    c.standardize = get<bool>(j, "standardize", "config");

  if (j.contains("density")) {
    const auto& d = j["density"];
    check_keys(d, "density", {"floor", "h_x", "h_e"});
    if (d.contains("floor"))
      c.density_floor = get_number(d, "floor", "density");
    if (d.contains("h_x") && !d["h_x"].is_null())
      c.density_bandwidth = get_number(d, "h_x", "density");
    if (d.contains("h_e") && !d["h_e"].is_null())
      c.error_bandwidth = get_number(d, "h_e", "density");
  }

  if (j.contains("max_skip_fraction"))
    c.max_skip_fraction = get_number(j, "max_skip_fraction", "config");
  if (j.contains("threads"))
    c.threads = get<std::size_t>(j, "threads", "config");
  return c;
}

json to_json(const RunConfig& c)
{
  json j;
  j["data"] = c.data;
  j["covariates"] = c.covariates;
  j["response"] = c.response;
  j["formula"] = c.formula;
  if (c.quantiles.kind == QuantileSet::Kind::Singleton)
    j["quantiles"] = {{"alpha", c.quantiles.lo}};
  else
    j["quantiles"] = {{"lo", c.quantiles.lo}, {"hi", c.quantiles.hi}, {"grid", c.quantiles.grid}};
  j["kernel"] = c.kernel;

  json b = {{"rule", rule_name(c.bandwidth.rule)}};
  if (c.bandwidth.value)
    b["value"] = *c.bandwidth.value;
  if (c.bandwidth.constant)
    b["constant"] = *c.bandwidth.constant;
  j["bandwidth"] = b;

  json w;
  switch (c.weight.kind) {
    case WeightSpec::Kind::ShrunkSupport:
      w["type"] = "shrunk_support";
      if (c.weight.shrink)
        w["shrink"] = *c.weight.shrink;
      break;
    case WeightSpec::Kind::Box:
      w["type"] = "box";
      w["lo"] = c.weight.lo;
      w["hi"] = c.weight.hi;
      break;
    case WeightSpec::Kind::Grid:
      w["type"] = "grid";
      w["values"] = c.weight.values;
      break;
  }
  j["weight"] = w;
  j["grid"] = {{"x_points", c.x_points}};
  j["bootstrap"] = {{"B", c.bootstrap_replicates},
                    {"seed", c.bootstrap_seed},
                    {"parameter_correction", c.parameter_correction}};
  j["local_poly"] = {{"degree", c.degree}, {"nu", c.nu}};
  j["variance"] = {{"density_index",
                    c.variance_index == VarianceDensityIndex::First ? "first" : "symmetrized"},
                   {"singleton_factor", c.singleton_variance_factor}};
  j["standardize"] = c.standardize;
  json d = {{"floor", c.density_floor}};
  d["h_x"] = c.density_bandwidth ? json(*c.density_bandwidth) : json(nullptr);
  d["h_e"] = c.error_bandwidth ? json(*c.error_bandwidth) : json(nullptr);
  j["density"] = d;
  j["max_skip_fraction"] = c.max_skip_fraction;
  j["threads"] = c.threads;
  return j;
}

RunConfig load_config_file(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    fail(ErrorKind::Data, "cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Usage, "config file '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

// --------------------------------------------------------------------- CSV

namespace {

std::string trim(std::string_view s)
{
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line)
{
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ','))
    out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',')
    out.emplace_back();
  return out;
}

} // namespace

Table read_csv(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    fail(ErrorKind::Data, "cannot open data file '" + path + "'");
  Table t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!trim(line).empty())
      break;
  }
  if (trim(line).empty())
    fail(ErrorKind::Data, "empty file '" + path + "': no header line");
  t.header = split(line);
  for (const auto& h : t.header)
    if (h.empty())
      fail(ErrorKind::Data, "blank column name in header of '" + path + "'");
  t.columns.resize(t.header.size());
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty())
      continue;
    const auto cells = split(line);
    if (cells.size() != t.header.size())
      fail(ErrorKind::Data,
           "line " + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
             " fields, found " + std::to_string(cells.size()));
    for (std::size_t k = 0; k < cells.size(); ++k) {
      const std::string& s = cells[k];
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
        fail(ErrorKind::Data,
             "row " + std::to_string(t.columns[k].size() + 1) + " (line " + std::to_string(lineno) + "), column '" + t.header[k] +
               "': missing or non-numeric value '" + s + "'");
      t.columns[k].push_back(v);
    }
  }
  if (t.columns.empty() || t.columns.front().empty())
    fail(ErrorKind::Data, "empty data: '" + path + "' has a header but no rows");
  return t;
}

Dataset load_csv(const std::string& path,
                 const std::vector<std::string>& covariates,
                 const std::string& response)
{
  const Table t = read_csv(path);
  auto column = [&](const std::string& name) -> const std::vector<double>& {
    const auto it = std::find(t.header.begin(), t.header.end(), name);
    if (it == t.header.end())
      fail(ErrorKind::Data, "column '" + name + "' not found in '" + path + "'");
    return t.columns[static_cast<std::size_t>(it - t.header.begin())];
  };
  std::vector<std::string> xs = covariates;
  if (xs.empty())
    for (const auto& h : t.header)
      if (h != response)
        xs.push_back(h);
  if (xs.empty())
    fail(ErrorKind::Data, "no covariate columns in '" + path + "'");
  const auto& ycol = column(response);
  const auto n = static_cast<Eigen::Index>(ycol.size());
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(xs.size()));
  for (std::size_t j = 0; j < xs.size(); ++j) {
    const auto& col = column(xs[j]);
    for (Eigen::Index i = 0; i < n; ++i)
      x(i, static_cast<Eigen::Index>(j)) = col[static_cast<std::size_t>(i)];
  }
  Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(ycol.data(), n);
  return Dataset(std::move(x), std::move(y));
}

void write_csv(const std::string& path, const Dataset& data)
{
  std::ofstream out(path);
  if (!out)
    fail(ErrorKind::Data, "cannot write '" + path + "'");
  out << std::setprecision(17);
  for (std::size_t j = 0; j < data.dim(); ++j)
    out << "x" << j + 1 << ",";
  out << "y\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = 0; j < data.dim(); ++j)
      out << data.x()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) << ",";
    out << data.y()(static_cast<Eigen::Index>(i)) << "\n";
  }
}

// --------------------------------------------------------------- resolution

double bandwidth_rate(BandwidthRule rule, std::size_t d)
{
  const double dd = static_cast<double>(d);
  return rule == BandwidthRule::MinimaxTesting ? 2.0 / (8.0 + dd) : 1.0 / (4.0 + dd);
}

double window_constant(const Dataset& smoothing_data, double rate)
{
  const Box& s = smoothing_data.support();
  std::vector<double> dist(smoothing_data.size());
  for (std::size_t i = 0; i < smoothing_data.size(); ++i) {
    double m = 0.0;
    for (std::size_t j = 0; j < smoothing_data.dim(); ++j) {
      const double c = 0.5 * (s.lo[j] + s.hi[j]);
      m = std::max(m, std::abs(smoothing_data.x()(static_cast<Eigen::Index>(i),
                                                  static_cast<Eigen::Index>(j)) - c));
    }
    dist[i] = m;
  }
  const std::size_t need = std::min<std::size_t>(20, dist.size());
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(need - 1), dist.end());
  // the kernel support is open, so step just past the need-th distance
  const double h = std::nextafter(dist[need - 1], INFINITY) * (1.0 + 1e-12);
  return h * std::pow(static_cast<double>(smoothing_data.size()), rate);
}

ResolvedRun resolve_run(const RunConfig& config, const Dataset& data)
{
  RunConfig c = config;
  const std::size_t d = data.dim();
  const std::size_t n = data.size();
  if (c.formula.empty()) {
    c.formula = "1";
    for (std::size_t j = 0; j < d; ++j)
      c.formula += " + x" + std::to_string(j + 1);
  }
  ParametricQuantileModel model = ParametricQuantileModel::from_formula(c.formula);
  c.formula = model.formula();
  if (model.min_dim() > d)
    fail(ErrorKind::Usage, "formula '" + c.formula + "' refers to x" +
                             std::to_string(model.min_dim()) + " but the data has " +
                             std::to_string(d) + " covariates");
  try {
    c.quantiles.validate();
  } catch (const Error& e) {
    fail(ErrorKind::Usage, e.what());
  }
  Kernel1D kernel;
  try {
    kernel = Kernel1D::from_name(c.kernel);
  } catch (const Error& e) {
    fail(ErrorKind::Usage, e.what());
  }
  c.kernel = kernel.name();

  Standardization st;
  if (c.standardize) {
    st = unit_iqr_standardization(data);
  } else {
    st.shift.assign(d, 0.0);
    st.scale.assign(d, 1.0);
  }
  Dataset sdata = c.standardize ? apply(st, data) : data;

  if (c.bandwidth.rule == BandwidthRule::Fixed) {
    if (!(c.bandwidth.value && *c.bandwidth.value > 0.0))
      fail(ErrorKind::Usage, "bandwidth must be positive");
  } else {
    const double rate = bandwidth_rate(c.bandwidth.rule, d);
    if (!c.bandwidth.constant)
      c.bandwidth.constant = std::max(1.0, window_constant(sdata, rate));
    if (!(*c.bandwidth.constant > 0.0))
      fail(ErrorKind::Usage, "bandwidth constant must be positive");
    c.bandwidth.value = *c.bandwidth.constant * std::pow(static_cast<double>(n), -rate);
  }
  const double h = *c.bandwidth.value;

  if (c.x_points.empty())
    c.x_points = XGrid::default_points(d);
  else if (c.x_points.size() == 1 && d > 1)
    c.x_points.assign(d, c.x_points.front());
  if (c.x_points.size() != d)
    fail(ErrorKind::Usage, "grid.x_points needs one entry per covariate");

  if (c.nu.empty())
    c.nu.assign(d, 0);
  if (c.nu.size() != d)
    fail(ErrorKind::Usage, "local_poly.nu needs one entry per covariate");
  if (c.degree < 0)
    fail(ErrorKind::Usage, "local_poly.degree must be nonnegative");

  TestConfig t;
  t.quantiles = c.quantiles;
  t.kernel = kernel;
  t.bandwidth = h;
  t.grid_points = c.x_points;
  t.degree = c.degree;
  t.target = c.nu;
  t.bootstrap.replicates = c.bootstrap_replicates;
  t.bootstrap.seed = c.bootstrap_seed;
  t.bootstrap.parameter_correction = c.parameter_correction;
  t.variance_index = c.variance_index;
  t.singleton_variance_factor = c.singleton_variance_factor;
  t.density_floor = c.density_floor;
  t.error_bandwidth = c.error_bandwidth;
  if (!c.density_bandwidth)
    c.density_bandwidth = h;
  t.density_bandwidth = *c.density_bandwidth;
  t.max_skip_fraction = c.max_skip_fraction;
  t.threads = std::max<std::size_t>(1, c.threads);

  switch (c.weight.kind) {
    case WeightSpec::Kind::ShrunkSupport:
      if (!c.weight.shrink)
        c.weight.shrink = h;
      if (*c.weight.shrink < 0.0)
        fail(ErrorKind::Usage, "weight.shrink must be nonnegative");
      t.weight = WeightFunction::indicator(sdata.support().shrunk(*c.weight.shrink));
      break;
    case WeightSpec::Kind::Box: {
      if (c.weight.lo.size() != d || c.weight.hi.size() != d)
        fail(ErrorKind::Usage, "weight box needs lo and hi for every covariate");
      Box b{c.weight.lo, c.weight.hi};
      for (std::size_t j = 0; j < d; ++j) {
        if (!(b.lo[j] <= b.hi[j]))
          fail(ErrorKind::Usage, "weight box has lo > hi");
        b.lo[j] = (b.lo[j] - st.shift[j]) / st.scale[j];
        b.hi[j] = (b.hi[j] - st.shift[j]) / st.scale[j];
      }
      t.weight = WeightFunction::indicator(b);
      break;
    }
    case WeightSpec::Kind::Grid: {
      for (double v : c.weight.values)
        if (!(v >= 0.0) || !std::isfinite(v))
          fail(ErrorKind::Usage, "weight values must be finite and nonnegative");
      t.weight = WeightFunction::user_grid(c.weight.values);
      break;
    }
  }
  try {
    t = resolve(t, sdata);
  } catch (const Error& e) {
    fail(ErrorKind::Usage, e.what());
  }
  return ResolvedRun{std::move(c), data, std::move(sdata), std::move(st), std::move(model),
                     std::move(t)};
}

} // namespace qspec
