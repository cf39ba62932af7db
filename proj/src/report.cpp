#include "qspec/report.hpp"

#include "qspec/error.hpp"

#include <fstream>
#include <iomanip>
#include <numeric>

namespace qspec {

using nlohmann::json;

namespace {

json nullable(const std::optional<double>& v)
{
  return v ? json(*v) : json(nullptr);
}

std::string scenario_law(CovariateLaw c)
{
  return c == CovariateLaw::Uniform ? "uniform" : "truncated_normal";
}

std::string scenario_law(ErrorLaw e)
{
  switch (e) {
    case ErrorLaw::Normal: return "normal";
    case ErrorLaw::StudentT5: return "student_t5";
    case ErrorLaw::ChiSquare3: return "chi_square3";
  }
  return "";
}

} // namespace

json report_json(const ResolvedRun& run, const TestOutcome& outcome)
{
  const TestReport& r = outcome.report;
  const auto levels = run.config.quantiles.levels();
  const int order = std::accumulate(run.test.target.begin(), run.test.target.end(), 0);

  json j;
  j["schema"] = report_schema;
  j["resolved_config"] = to_json(run.config);
  j["data"] = {{"n", run.data.size()},
               {"d", run.data.dim()},
               {"covariates", run.config.covariates},
               {"response", run.config.response}};
  j["standardization"] = {{"shift", run.standardization.shift},
                          {"scale", run.standardization.scale}};

  json fits = json::array();
  for (double a : levels) {
    const auto& th = run.model.theta(a);
    fits.push_back({{"alpha", a}, {"theta", std::vector<double>(th.begin(), th.end())}});
  }
  j["model"] = {{"formula", run.model.formula()}, {"fits", fits}};

  j["statistic"] = {{"T_hat", r.t_hat},
                    {"scaled_T", r.scaled_t},
                    {"scale_exponent", 0.5 * static_cast<double>(run.data.dim()) + 2.0 * order},
                    {"bias", r.bias},
                    {"variance", r.variance},
                    {"Z", r.z},
                    {"p_normal", r.p_normal},
                    {"p_bootstrap", nullable(r.p_bootstrap)},
                    {"bootstrap_replicates", outcome.replicates.size()},
                    {"calibration", r.calibration}};
  j["constants"] = {{"conv2", r.conv2},
                    {"conv4", r.conv4},
                    {"source", run.test.degree == 0 ? "kernel" : "equivalent_kernel"}};

  const auto& d = r.diagnostics;
  j["diagnostics"] = {{"grid_points", d.grid_points},
                      {"weighted_points", d.weighted_points},
                      {"evaluated", d.evaluated},
                      {"skipped", d.skipped},
                      {"fx_clamp_hits", d.fx_clamp_hits},
                      {"fcond_clamp_hits", d.fcond_clamp_hits},
                      {"n_h_power", d.n_h_power},
                      {"warnings", d.warnings}};

  json notes = json::array();
  if (run.config.quantiles.kind == QuantileSet::Kind::Interval)
    notes.push_back(std::string("variance density index: ") +
                    (run.config.variance_index == VarianceDensityIndex::First ? "first level"
                                                                              : "symmetrized"));
  notes.push_back("shift D is not reported: the deviation is unknown for observed data");
  if (run.test.degree > 0 && r.p_bootstrap)
    notes.push_back("bootstrap p-value of the local polynomial statistic is a heuristic calibration");
  j["notes"] = notes;
  return j;
}

json simulation_json(const ScenarioSpec& spec, const MCResult& res, bool include_records)
{
  json j;
  j["schema"] = simulation_schema;
  j["scenario"] = {{"name", spec.name},
                   {"d", spec.d},
                   {"n", spec.n},
                   {"covariates", scenario_law(spec.covariates)},
                   {"errors", scenario_law(spec.errors)},
                   {"error_scale", spec.error_scale},
                   {"heteroscedastic", spec.heteroscedastic},
                   {"formula", spec.model().formula()},
                   {"theta0", spec.theta0},
                   {"delta", spec.delta_name},
                   {"amplitude", spec.amplitude},
                   {"alpha_ref", spec.alpha_ref},
                   {"bandwidth_constant", spec.bandwidth_constant},
                   {"bandwidth", spec.bandwidth(spec.n)},
                   {"degree", spec.degree},
                   {"bootstrap_replicates", spec.bootstrap_replicates},
                   {"parameter_correction", spec.parameter_correction}};
  j["reps"] = res.reps;
  j["seed"] = res.seed;
  j["failures"] = res.failures;
  j["levels"] = res.levels;
  j["rejection_bootstrap"] = res.rejection_bootstrap;
  j["rejection_normal"] = res.rejection_normal;
  j["standard_error"] = res.standard_error;
  j["z_mean"] = res.z_mean;
  j["z_variance"] = res.z_variance;
  j["pvalue_ks"] = res.pvalue_ks;
  j["theory"] = {{"D", res.theory.D}, {"bias", res.theory.bias}, {"variance", res.theory.variance}};
  if (include_records) {
    json recs = json::array();
    for (const auto& r : res.records) {
      json e = {{"seed", r.seed}, {"failed", r.failed}};
      if (r.failed) {
        e["error"] = r.error;
      } else {
        e["T_hat"] = r.t_hat;
        e["scaled_T"] = r.scaled_t;
        e["Z"] = r.z;
        e["p_normal"] = r.p_normal;
        e["p_bootstrap"] = r.p_bootstrap;
      }
      recs.push_back(e);
    }
    j["records"] = recs;
  }
  return j;
}

json diagnose_json(const ScenarioSpec& spec,
                   std::span<const GapRow> rows,
                   std::size_t reps,
                   std::uint64_t seed)
{
  json j;
  j["schema"] = diagnose_schema;
  j["scenario"] = spec.name;
  j["reps"] = reps;
  j["seed"] = seed;
  json t = json::array();
  for (const auto& r : rows)
    t.push_back({{"n", r.n},
                 {"bandwidth", r.bandwidth},
                 {"median_ratio", r.median},
                 {"q10", r.q10},
                 {"q90", r.q90}});
  j["bahadur_gap"] = t;
  bool decreasing = true;
  for (std::size_t k = 1; k < rows.size(); ++k)
    decreasing = decreasing && rows[k].median < rows[k - 1].median;
  j["strictly_decreasing"] = decreasing;
  return j;
}

json error_json(const std::exception& e)
{
  json j;
  j["schema"] = error_schema;
  if (const auto* qe = dynamic_cast<const Error*>(&e)) {
    j["kind"] = std::string(to_string(qe->kind()));
    j["exit_code"] = exit_code(qe->kind());
    if (const auto* ew = dynamic_cast<const EmptyWindowError*>(&e))
      j["point"] = ew->point();
  } else {
    j["kind"] = "Internal";
    j["exit_code"] = 3;
  }
  j["message"] = e.what();
  return j;
}

void write_plot_data(const std::string& path, const ResolvedRun& run, const TestOutcome& outcome)
{
  std::ofstream out(path);
  if (!out)
    fail(ErrorKind::Data, "cannot write '" + path + "'");
  out << std::setprecision(17);
  const std::size_t d = run.data.dim();
  const XGrid grid(run.smoothing_data.support(), run.test.grid_points);
  const auto levels = run.config.quantiles.levels();
  const double cell = grid.cell_volume() * run.config.quantiles.level_weight();
  const FieldTable& t = outcome.field;
  for (std::size_t j = 0; j < d; ++j)
    out << "x" << j + 1 << ",";
  out << "alpha,r_hat,w,contribution\n";
  for (std::size_t a = 0; a < levels.size(); ++a) {
    for (std::size_t k = 0; k < t.points.size(); ++k) {
      if (!t.valid[a][k])
        continue;
      const auto x = grid.point(t.points[k]);
      for (std::size_t j = 0; j < d; ++j)
        out << run.standardization.shift[j] + run.standardization.scale[j] * x[j] << ",";
      const double r = t.values[a][k];
      out << levels[a] << "," << r << "," << t.weights[k] << "," << r * r * t.weights[k] * cell
          << "\n";
    }
  }
}

void write_replicates(const std::string& path, std::span<const double> replicates)
{
  std::ofstream out(path);
  if (!out)
    fail(ErrorKind::Data, "cannot write '" + path + "'");
  out << std::setprecision(17) << "T_star\n";
  for (double v : replicates)
    out << v << "\n";
}

std::string render(const json& j)
{
  return j.dump(2) + "\n";
}

} // namespace qspec
