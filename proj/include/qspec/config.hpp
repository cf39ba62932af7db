#pragma once

#include "qspec/dataset.hpp"
#include "qspec/parametric.hpp"
#include "qspec/teststat.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace qspec {

enum class BandwidthRule { Fixed, RateOptimal, MinimaxTesting };

struct BandwidthSpec
{
  BandwidthRule rule = BandwidthRule::RateOptimal;
  std::optional<double> value;     //!< the bandwidth itself (Fixed, or after resolution)
  std::optional<double> constant;  //!< c in c n^{-rate}; unset: data-driven
};

struct WeightSpec
{
  enum class Kind { ShrunkSupport, Box, Grid };

  Kind kind = Kind::ShrunkSupport;
  std::optional<double> shrink;    //!< margin in smoothing coordinates; unset: h
  std::vector<double> lo;          //!< Box, in original covariate units
  std::vector<double> hi;
  std::vector<double> values;      //!< Grid, row-major over the x grid
};

//! Everything the `test` verb reads. Optional fields are filled in by
//! resolve_run and echoed back in the report.
struct RunConfig
{
  std::string data;
  std::vector<std::string> covariates;  //!< empty: every column but the response
  std::string response = "y";
  std::string formula;                  //!< empty: 1 + x1 + ... + xd
  QuantileSet quantiles = QuantileSet::singleton(0.5);
  std::string kernel = "epanechnikov";
  BandwidthSpec bandwidth;
  WeightSpec weight;
  std::vector<std::size_t> x_points;    //!< empty: default grid
  std::size_t bootstrap_replicates = 250;
  std::uint64_t bootstrap_seed = 0;
  bool parameter_correction = true;
  int degree = 0;
  MultiIndex nu;                        //!< empty: zero
  VarianceDensityIndex variance_index = VarianceDensityIndex::First;
  double singleton_variance_factor = default_singleton_factor;
  bool standardize = true;
  double density_floor = default_density_floor;
  std::optional<double> density_bandwidth;  //!< h_x and the f_X bandwidth; unset: h
  std::optional<double> error_bandwidth;    //!< h_e; unset: normal reference
  double max_skip_fraction = 0.01;
  std::size_t threads = 1;
};

//! Throws Usage on unknown keys or malformed values.
RunConfig parse_config(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& c);
RunConfig load_config_file(const std::string& path);

struct Table
{
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;
};

//! Comma-separated file with a header line. Non-numeric cells (including
//! "NA" and blanks) are rejected with their line number.
Table read_csv(const std::string& path);

//! Dataset with the named covariate and response columns; support is the
//! per-axis data range.
Dataset load_csv(const std::string& path,
                 const std::vector<std::string>& covariates,
                 const std::string& response);

void write_csv(const std::string& path, const Dataset& data);

//! Smallest c such that the window of half-width c n^{-rate} around the
//! support center holds at least min(20, n) rows.
double window_constant(const Dataset& smoothing_data, double rate);
double bandwidth_rate(BandwidthRule rule, std::size_t d);

//! All defaults decided: the config to echo, the data in both coordinate
//! systems, the fitted model and the test settings.
struct ResolvedRun
{
  RunConfig config;
  Dataset data;            //!< original units; the model is fitted here
  Dataset smoothing_data;  //!< after standardization
  Standardization standardization;
  ParametricQuantileModel model;
  TestConfig test;
};

ResolvedRun resolve_run(const RunConfig& config, const Dataset& data);

} // namespace qspec
