#pragma once

#include "qspec/config.hpp"
#include "qspec/simulate.hpp"
#include "qspec/teststat.hpp"

#include <json.hpp>

#include <exception>
#include <span>
#include <string>

namespace qspec {

inline constexpr const char* report_schema = "qspec-report/1";
inline constexpr const char* simulation_schema = "qspec-simulation/1";
inline constexpr const char* diagnose_schema = "qspec-diagnose/1";
inline constexpr const char* error_schema = "qspec-error/1";

nlohmann::json report_json(const ResolvedRun& run, const TestOutcome& outcome);

nlohmann::json simulation_json(const ScenarioSpec& spec,
                               const MCResult& result,
                               bool include_records);

nlohmann::json diagnose_json(const ScenarioSpec& spec,
                             std::span<const GapRow> rows,
                             std::size_t reps,
                             std::uint64_t seed);

nlohmann::json error_json(const std::exception& e);

//! Columns x1..xd (original units), alpha, r_hat, w, contribution; one row
//! per evaluated grid point and level. contribution is the point's share of
//! T-hat.
void write_plot_data(const std::string& path, const ResolvedRun& run, const TestOutcome& outcome);

void write_replicates(const std::string& path, std::span<const double> replicates);

//! Two-space indented JSON with a trailing newline.
std::string render(const nlohmann::json& j);

} // namespace qspec
