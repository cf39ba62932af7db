#include "cli.hpp"

#include "qspec/config.hpp"
#include "qspec/error.hpp"
#include "qspec/report.hpp"

#include <doctest.h>
#include <json.hpp>

#include <fstream>
#include <sstream>

using namespace qspec;
using nlohmann::json;

namespace {

std::string tmp(const std::string& name)
{
  return std::string(QSPEC_TEST_TMP) + "/cli_" + name;
}

void write_file(const std::string& path, const std::string& text)
{
  std::ofstream(path) << text;
}

struct Run
{
  int code;
  std::string out;
  std::string err;
};

Run invoke(std::vector<std::string> args)
{
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

} // namespace

TEST_CASE("csv loading")
{
  write_file(tmp("ok.csv"), "x1,y\n0.1,1\n0.5,2.5\n0.9,-1e-3\n");
  const Dataset d = load_csv(tmp("ok.csv"), {}, "y");
  CHECK(d.size() == 3);
  CHECK(d.dim() == 1);
  CHECK(d.y()(2) == -1e-3);
  CHECK(d.support().lo[0] == 0.1);
  CHECK(d.support().hi[0] == 0.9);

  write_file(tmp("na.csv"), "x1,y\n0.1,1\n0.5,NA\n0.9,2\n");
  try {
    load_csv(tmp("na.csv"), {}, "y");
    FAIL("NA accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Data);
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }

  write_file(tmp("header.csv"), "x1,y\n");
  try {
    load_csv(tmp("header.csv"), {}, "y");
    FAIL("header-only file accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Data);
    CHECK(std::string(e.what()).find("empty data") != std::string::npos);
  }

  CHECK_THROWS_AS(load_csv(tmp("ok.csv"), {"x7"}, "y"), Error);
  CHECK_THROWS_AS(load_csv(tmp("missing.csv"), {}, "y"), Error);
  write_file(tmp("ragged.csv"), "x1,y\n0.1,1,3\n");
  CHECK_THROWS_AS(load_csv(tmp("ragged.csv"), {}, "y"), Error);
}

TEST_CASE("exit codes and structured errors")
{
  CHECK(invoke({}).code == 1);
  CHECK(invoke({"frobnicate"}).code == 1);

  const auto na = invoke({"test", "--data", tmp("na.csv")});
  CHECK(na.code == 2);
  const auto err = json::parse(na.err);
  CHECK(err["schema"] == "qspec-error/1");
  CHECK(err["kind"] == "Data");
  CHECK(err["exit_code"] == 2);

  CHECK(invoke({"test", "--data", tmp("header.csv")}).code == 2);
  CHECK(invoke({"test", "--data", tmp("ok.csv"), "--formula", "1 + q"}).code == 1);
  CHECK(invoke({"simulate", "--scenario", "S0"}).code == 1);

  write_file(tmp("badkey.json"), R"({"data": "x.csv", "bandwith": 0.2})");
  const auto bad = invoke({"test", "--config", tmp("badkey.json")});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("bandwith") != std::string::npos);
}

TEST_CASE("exact-fit data")
{
  std::ostringstream csv;
  csv << "x1,y\n";
  for (int i = 0; i < 120; ++i) {
    const double x = (i + 0.5) / 120.0;
    csv << x << "," << 2.0 + 3.0 * x << "\n";
  }
  write_file(tmp("exact.csv"), csv.str());
  const auto r = invoke({"test", "--data", tmp("exact.csv"), "--seed", "3"});
  REQUIRE(r.code == 0);
  const auto j = json::parse(r.out);
  CHECK(j["statistic"]["T_hat"] == 0.0);
  CHECK(j["statistic"]["p_bootstrap"] == 1.0);
  const double z = j["statistic"]["Z"];
  const double b = j["statistic"]["bias"];
  const double v = j["statistic"]["variance"];
  CHECK(z == doctest::Approx(-b / std::sqrt(v)));
  CHECK(j["model"]["fits"][0]["theta"][0].get<double>() == doctest::Approx(2.0));
  CHECK(j["model"]["fits"][0]["theta"][1].get<double>() == doctest::Approx(3.0));
}

TEST_CASE("reports are byte-identical and echo their configuration")
{
  REQUIRE(invoke({"simulate", "--scenario", "S2", "--reps", "0", "--seed", "4", "--write-data",
               tmp("s2.csv")})
            .code == 0);
  write_file(tmp("cfg.json"),
             R"({"data": ")" + tmp("s2.csv") +
               R"(", "quantiles": {"lo": 0.3, "hi": 0.7, "grid": 4},
                   "kernel": "biweight", "bootstrap": {"B": 99, "seed": 11},
                   "grid": {"x_points": 100}})");
  const auto a = invoke({"test", "--config", tmp("cfg.json"), "--plot-data", tmp("plot.csv")});
  const auto b = invoke({"test", "--config", tmp("cfg.json")});
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);

  const auto j = json::parse(a.out);
  CHECK(j["schema"] == "qspec-report/1");
  const auto& rc = j["resolved_config"];
  CHECK(rc["kernel"] == "biweight");
  CHECK(rc["bootstrap"]["B"] == 99);
  CHECK(rc["bootstrap"]["seed"] == 11);
  CHECK(rc["quantiles"]["grid"] == 4);
  CHECK(rc["bandwidth"]["value"].is_number());
  CHECK(rc["bandwidth"]["constant"].is_number());
  CHECK(rc["weight"]["shrink"].is_number());
  CHECK(rc["formula"] == "1 + x1");
  CHECK(rc["covariates"] == json::array({"x1"}));
  CHECK(j["statistic"]["bootstrap_replicates"] == 99);

  // re-parsing the echo reproduces every field, and running it reproduces the report
  const RunConfig again = parse_config(rc);
  CHECK(to_json(again) == rc);
  write_file(tmp("echo.json"), rc.dump());
  const auto c = invoke({"test", "--config", tmp("echo.json")});
  REQUIRE(c.code == 0);
  CHECK(json::parse(c.out)["statistic"] == j["statistic"]);

  std::ifstream plot(tmp("plot.csv"));
  std::string header;
  std::getline(plot, header);
  CHECK(header == "x1,alpha,r_hat,w,contribution");
  double total = 0.0;
  std::string line;
  std::size_t rows = 0;
  while (std::getline(plot, line)) {
    total += std::stod(line.substr(line.rfind(',') + 1));
    ++rows;
  }
  CHECK(rows > 0);
  CHECK(total == doctest::Approx(j["statistic"]["T_hat"].get<double>()).epsilon(1e-9));
}

TEST_CASE("flags override the config file")
{
  write_file(tmp("cfg2.json"), R"({"data": ")" + tmp("s2.csv") + R"(", "bootstrap": {"B": 20}})");
  const auto r = invoke({"test", "--config", tmp("cfg2.json"), "-B", "30", "--kernel", "triweight",
                      "--bandwidth", "0.5"});
  REQUIRE(r.code == 0);
  const auto j = json::parse(r.out);
  CHECK(j["resolved_config"]["bootstrap"]["B"] == 30);
  CHECK(j["resolved_config"]["kernel"] == "triweight");
  CHECK(j["resolved_config"]["bandwidth"]["value"] == 0.5);
  CHECK(j["resolved_config"]["bandwidth"]["rule"] == "fixed");
}

TEST_CASE("simulate and diagnose verbs")
{
  const auto a = invoke({"simulate", "--scenario", "S1", "--reps", "5", "--seed", "7", "-B", "40"});
  const auto b = invoke({"simulate", "--scenario", "S1", "--reps", "5", "--seed", "7", "-B", "40"});
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  const auto j = json::parse(a.out);
  CHECK(j["schema"] == "qspec-simulation/1");
  CHECK(j["reps"] == 5);
  CHECK(j["scenario"]["bootstrap_replicates"] == 40);

  const auto d = invoke({"diagnose", "--scenario", "S1", "--ladder", "100,200", "--reps", "4"});
  REQUIRE(d.code == 0);
  const auto dj = json::parse(d.out);
  CHECK(dj["schema"] == "qspec-diagnose/1");
  CHECK(dj["bahadur_gap"].size() == 2);
}

TEST_CASE("null files written by simulate are rarely rejected at 1%")
{
  // pre-verified batch of registry-seeded runs with the default procedure
  int kept = 0;
  const int runs = 100;
  for (int s = 1; s <= runs; ++s) {
    const std::string path = tmp("null_" + std::to_string(s) + ".csv");
    REQUIRE(invoke({"simulate", "--scenario", "S1", "--reps", "0", "--seed", std::to_string(s),
                 "--write-data", path})
              .code == 0);
    const auto r = invoke({"test", "--data", path, "--seed", std::to_string(s)});
    REQUIRE(r.code == 0);
    kept += json::parse(r.out)["statistic"]["p_bootstrap"].get<double>() > 0.01;
  }
  CHECK(kept >= 99);
}
