#include "cli.hpp"

#include "qspec/config.hpp"
#include "qspec/error.hpp"
#include "qspec/report.hpp"
#include "qspec/simulate.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <optional>
#include <sstream>

namespace qspec::cli {

namespace {

struct TestArgs
{
  std::string config;
  std::string data;
  std::string output;
  std::string plot_data;
  std::string replicates_out;
  std::optional<double> alpha;
  std::optional<double> alpha_lo;
  std::optional<double> alpha_hi;
  std::optional<std::size_t> alpha_grid;
  std::optional<std::string> kernel;
  std::optional<double> bandwidth;
  std::optional<std::string> bandwidth_rule;
  std::optional<double> bandwidth_constant;
  std::optional<std::string> formula;
  std::optional<std::string> covariates;
  std::optional<std::string> response;
  std::optional<std::size_t> replicates;
  std::optional<std::uint64_t> seed;
  std::optional<int> degree;
  std::optional<std::string> nu;
  std::optional<std::string> x_points;
  std::optional<std::size_t> threads;
  std::optional<bool> standardize;
  std::optional<bool> parameter_correction;
  std::optional<std::string> variance_index;
  std::optional<double> singleton_factor;
};

struct SimulateArgs
{
  std::string scenario = "S1";
  std::size_t reps = 500;
  std::uint64_t seed = 42;
  std::optional<std::size_t> n;
  std::optional<double> amplitude;
  std::optional<double> power_ratio;
  std::optional<std::size_t> replicates;
  std::optional<double> bandwidth_constant;
  std::optional<bool> parameter_correction;
  std::size_t threads = 1;
  bool records = false;
  std::string write_data;
  std::string output;
};

struct DiagnoseArgs
{
  std::string scenario = "S1";
  std::string ladder = "100,400,1600";
  std::size_t reps = 100;
  std::uint64_t seed = 42;
  std::size_t threads = 1;
  std::string output;
};

template <class T>
std::vector<T> parse_list(const std::string& s, const char* what)
{
  std::vector<T> v;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::stringstream is(item);
    T x{};
    if (!(is >> x) || !(is >> std::ws).eof())
      fail(ErrorKind::Usage, std::string("bad entry '") + item + "' in " + what);
    v.push_back(x);
  }
  if (v.empty())
    fail(ErrorKind::Usage, std::string("empty list for ") + what);
  return v;
}

void emit(const nlohmann::json& j, const std::string& path, std::ostream& out)
{
  const std::string text = render(j);
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path);
  if (!f)
    fail(ErrorKind::Data, "cannot write '" + path + "'");
  f << text;
}

void apply_overrides(RunConfig& c, const TestArgs& a)
{
  if (!a.data.empty())
    c.data = a.data;
  if (a.alpha && (a.alpha_lo || a.alpha_hi))
    fail(ErrorKind::Usage, "--alpha cannot be combined with --alpha-lo/--alpha-hi");
  if (a.alpha)
    c.quantiles = QuantileSet::singleton(*a.alpha);
  if (a.alpha_lo || a.alpha_hi) {
    if (!(a.alpha_lo && a.alpha_hi))
      fail(ErrorKind::Usage, "--alpha-lo and --alpha-hi go together");
    c.quantiles = QuantileSet::interval(*a.alpha_lo, *a.alpha_hi, c.quantiles.grid);
  }
  if (a.alpha_grid)
    c.quantiles.grid = *a.alpha_grid;
  if (a.kernel)
    c.kernel = *a.kernel;
  if (a.bandwidth) {
    c.bandwidth.rule = BandwidthRule::Fixed;
    c.bandwidth.value = *a.bandwidth;
    c.bandwidth.constant.reset();
  }
  if (a.bandwidth_rule) {
    RunConfig tmp = parse_config({{"bandwidth", {{"rule", *a.bandwidth_rule}, {"value", 1.0}}}});
    c.bandwidth.rule = tmp.bandwidth.rule;
    if (c.bandwidth.rule != BandwidthRule::Fixed)
      c.bandwidth.value.reset();
  }
  if (a.bandwidth_constant) {
    c.bandwidth.constant = *a.bandwidth_constant;
    if (c.bandwidth.rule == BandwidthRule::Fixed)
      c.bandwidth.rule = BandwidthRule::RateOptimal;
    c.bandwidth.value.reset();
  }
  if (a.formula)
    c.formula = *a.formula;
  if (a.covariates)
    c.covariates = parse_list<std::string>(*a.covariates, "--covariates");
  if (a.response)
    c.response = *a.response;
  if (a.replicates)
    c.bootstrap_replicates = *a.replicates;
  if (a.seed)
    c.bootstrap_seed = *a.seed;
  if (a.degree)
    c.degree = *a.degree;
  if (a.nu)
    c.nu = parse_list<int>(*a.nu, "--nu");
  if (a.x_points)
    c.x_points = parse_list<std::size_t>(*a.x_points, "--x-points");
  if (a.threads)
    c.threads = *a.threads;
  if (a.standardize)
    c.standardize = *a.standardize;
  if (a.parameter_correction)
    c.parameter_correction = *a.parameter_correction;
  if (a.variance_index) {
    RunConfig tmp = parse_config({{"variance", {{"density_index", *a.variance_index}}}});
    c.variance_index = tmp.variance_index;
  }
  if (a.singleton_factor)
    c.singleton_variance_factor = *a.singleton_factor;
}

int run_test_verb(const TestArgs& a, std::ostream& out)
{
  RunConfig cfg = a.config.empty() ? RunConfig{} : load_config_file(a.config);
  apply_overrides(cfg, a);
  if (cfg.data.empty())
    fail(ErrorKind::Usage, "no data file: give --data or set \"data\" in the config");
  if (cfg.covariates.empty()) {
    for (const auto& h : read_csv(cfg.data).header)
      if (h != cfg.response)
        cfg.covariates.push_back(h);
  }
  const Dataset data = load_csv(cfg.data, cfg.covariates, cfg.response);
  ResolvedRun run = resolve_run(cfg, data);

  std::vector<std::vector<double>> residuals;
  for (double alpha : run.config.quantiles.levels()) {
    run.model.set_fit(alpha, fit_parametric(run.data, alpha, run.model));
    residuals.push_back(model_residuals(run.data, run.model, alpha));
  }
  const Eigen::MatrixXd gradient = run.model.design(run.data);
  const TestOutcome outcome = run_test(run.smoothing_data, residuals, run.test, &gradient);

  if (!a.plot_data.empty())
    write_plot_data(a.plot_data, run, outcome);
  if (!a.replicates_out.empty())
    write_replicates(a.replicates_out, outcome.replicates);
  emit(report_json(run, outcome), a.output, out);
  return 0;
}

ScenarioSpec build_scenario(const SimulateArgs& a)
{
  ScenarioSpec s = scenario(a.scenario);
  if (a.n)
    s.n = *a.n;
  if (a.bandwidth_constant)
    s.bandwidth_constant = *a.bandwidth_constant;
  if (a.replicates)
    s.bootstrap_replicates = *a.replicates;
  if (a.parameter_correction)
    s.parameter_correction = *a.parameter_correction;
  if (a.amplitude && a.power_ratio)
    fail(ErrorKind::Usage, "--amplitude and --power-ratio are exclusive");
  if (a.amplitude)
    s.amplitude = *a.amplitude;
  if (a.power_ratio) {
    if (!s.delta)
      fail(ErrorKind::Usage, "scenario " + s.name + " has no deviation to calibrate");
    s.amplitude = calibrate_amplitude(s, *a.power_ratio);
  }
  s.validate();
  return s;
}

int run_simulate_verb(const SimulateArgs& a, std::ostream& out)
{
  const ScenarioSpec s = build_scenario(a);
  if (!a.write_data.empty()) {
    RngStream rng(derive_seed(a.seed, 0), 0);
    write_csv(a.write_data, generate(s, s.n, rng).data);
    if (a.reps == 0)
      return 0;
  }
  if (a.reps == 0)
    fail(ErrorKind::Usage, "--reps must be positive unless --write-data is given");
  const MCResult res = mc_size_power(s, a.reps, a.seed, a.threads);
  emit(simulation_json(s, res, a.records), a.output, out);
  return 0;
}

int run_diagnose_verb(const DiagnoseArgs& a, std::ostream& out)
{
  const ScenarioSpec s = scenario(a.scenario);
  const auto ladder = parse_list<std::size_t>(a.ladder, "--ladder");
  const auto rows = bahadur_gap(s, ladder, a.reps, a.seed, a.threads);
  emit(diagnose_json(s, rows, a.reps, a.seed), a.output, out);
  return 0;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
  CLI::App app{"Specification test for parametric conditional quantile models", "qspec"};
  app.require_subcommand(1);

  TestArgs t;
  auto* test = app.add_subcommand("test", "Test a parametric quantile model on a data file");
  test->add_option("--config", t.config, "JSON config file");
  test->add_option("--data", t.data, "CSV data file (overrides the config)");
  test->add_option("-o,--output", t.output, "Report file (default: stdout)");
  test->add_option("--plot-data", t.plot_data, "Write the residual field as CSV");
  test->add_option("--replicates-out", t.replicates_out, "Write bootstrap replicates as CSV");
  test->add_option("--alpha", t.alpha, "Single quantile level");
  test->add_option("--alpha-lo", t.alpha_lo, "Lower end of a quantile interval");
  test->add_option("--alpha-hi", t.alpha_hi, "Upper end of a quantile interval");
  test->add_option("--alpha-grid", t.alpha_grid, "Levels on the quantile interval");
  test->add_option("--kernel", t.kernel, "epanechnikov, biweight or triweight");
  test->add_option("--bandwidth", t.bandwidth, "Fixed bandwidth (smoothing coordinates)");
  test->add_option("--bandwidth-rule", t.bandwidth_rule, "rate_optimal or minimax_testing");
  test->add_option("--bandwidth-constant", t.bandwidth_constant, "c in h = c n^{-rate}");
  test->add_option("--formula", t.formula, "Model formula, e.g. \"1 + x1 + x1^2\"");
  test->add_option("--covariates", t.covariates, "Comma-separated covariate columns");
  test->add_option("--response", t.response, "Response column");
  test->add_option("-B,--replicates", t.replicates, "Bootstrap replicates (0 disables)");
  test->add_option("--seed", t.seed, "Bootstrap seed");
  test->add_option("--degree", t.degree, "Local polynomial degree");
  test->add_option("--nu", t.nu, "Derivative multi-index, comma-separated");
  test->add_option("--x-points", t.x_points, "Grid points per axis, comma-separated");
  test->add_option("--threads", t.threads, "Worker threads");
  test->add_option("--standardize", t.standardize, "Standardize covariates (true/false)");
  test->add_option("--parameter-correction", t.parameter_correction,
                   "Include the parametric refit in the bootstrap (true/false)");
  test->add_option("--variance-index", t.variance_index, "first or symmetrized");
  test->add_option("--singleton-factor", t.singleton_factor, "Singleton variance constant");

  SimulateArgs s;
  auto* sim = app.add_subcommand("simulate", "Monte Carlo size and power on a reference scenario");
  sim->add_option("--scenario", s.scenario, "S1..S5");
  sim->add_option("--reps", s.reps, "Monte Carlo replications");
  sim->add_option("--seed", s.seed, "Master seed");
  sim->add_option("--n", s.n, "Sample size");
  sim->add_option("--amplitude", s.amplitude, "Amplitude c of the deviation");
  sim->add_option("--power-ratio", s.power_ratio, "Calibrate c so that D / sqrt(V) equals this");
  sim->add_option("-B,--replicates", s.replicates, "Bootstrap replicates per rep");
  sim->add_option("--bandwidth-constant", s.bandwidth_constant, "c in h = c n^{-1/(4+d)}");
  sim->add_option("--parameter-correction", s.parameter_correction, "true/false");
  sim->add_option("--threads", s.threads, "Worker threads");
  sim->add_flag("--records", s.records, "Include per-rep records");
  sim->add_option("--write-data", s.write_data, "Write the first generated data set as CSV");
  sim->add_option("-o,--output", s.output, "Result file (default: stdout)");

  DiagnoseArgs g;
  auto* diag = app.add_subcommand("diagnose", "Bahadur gap over a sample size ladder");
  diag->add_option("--scenario", g.scenario, "S1..S5");
  diag->add_option("--ladder", g.ladder, "Comma-separated sample sizes");
  diag->add_option("--reps", g.reps, "Replications per sample size");
  diag->add_option("--seed", g.seed, "Master seed");
  diag->add_option("--threads", g.threads, "Worker threads");
  diag->add_option("-o,--output", g.output, "Result file (default: stdout)");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (test->parsed())
      return run_test_verb(t, out);
    if (sim->parsed())
      return run_simulate_verb(s, out);
    return run_diagnose_verb(g, out);
  } catch (const std::exception& e) {
    const auto j = error_json(e);
    err << render(j);
    return j["exit_code"].get<int>();
  }
}

} // namespace qspec::cli
