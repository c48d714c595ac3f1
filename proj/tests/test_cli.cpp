#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "helpers.hpp"

namespace fs = std::filesystem;

namespace {

#ifndef MSLONG_CLI
#define MSLONG_CLI "mslong"
#endif

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("mslong_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(reinterpret_cast<uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MSLONG_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

size_t count_lines(const std::string& s) {
  size_t n = 0;
  for (const char c : s)
    if (c == '\n') ++n;
  return n;
}

}  // namespace

TEST_CASE("generate is byte-reproducible for a fixed seed") {
  TempDir tmp;
  const auto a = tmp.path / "a.csv";
  const auto b = tmp.path / "b.csv";
  REQUIRE(run_cli("--seed 7 generate --patients 15 --visits-min 4 --visits-max 6 -o " +
                  a.string()) == 0);
  // global flags also parse after the subcommand
  REQUIRE(run_cli("generate --patients 15 --visits-min 4 --visits-max 6 --seed 7 -o " +
                  b.string()) == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK(slurp(a).find(",,") != std::string::npos);  // degraded by default
}

TEST_CASE("impute writes a complete csv and an ok manifest") {
  TempDir tmp;
  const auto cohort = (tmp.path / "cohort.csv").string();
  const auto done = (tmp.path / "done.csv").string();
  REQUIRE(run_cli("--seed 3 generate --patients 12 --visits-min 4 --visits-max 6 -o " + cohort) ==
          0);
  REQUIRE(run_cli("--seed 3 impute --method locf -i " + cohort + " -o " + done) == 0);
  const std::string out = slurp(done);
  CHECK(out.find(",,") == std::string::npos);
  CHECK(out.find(",NA") == std::string::npos);

  const auto manifest = nlohmann::json::parse(slurp(tmp.path / "run_manifest.json"));
  CHECK(manifest["status"] == "ok");
  CHECK(manifest["command"] == "impute");
}

TEST_CASE("round-to-domain snaps imputed values onto the grid") {
  TempDir tmp;
  const auto cohort = (tmp.path / "cohort.csv").string();
  const auto done = (tmp.path / "done.csv").string();
  REQUIRE(run_cli("--seed 5 generate --patients 12 --visits-min 4 --visits-max 6 -o " + cohort) ==
          0);
  REQUIRE(run_cli("--seed 5 impute --method linear --round-to-domain -i " + cohort + " -o " +
                  done) == 0);
  const auto d = mslong::load_csv_file(done, mslong::FeatureSchema::default_schema());
  for (const auto& r : d.records)
    for (const int f : d.schema.time_varying_indices())
      CHECK(r.values[f] == d.schema.at(f).domain.snap(r.values[f]));
}

TEST_CASE("exit codes: usage, data, and method errors") {
  TempDir tmp;
  CHECK(run_cli("no-such-command") == 1);
  CHECK(run_cli("generate") == 1);  // missing required -o
  CHECK(run_cli("--seed 1 impute --method locf -i /nonexistent.csv -o " +
                (tmp.path / "x.csv").string()) == 2);

  // a crashed run leaves status=failed behind
  const auto manifest = nlohmann::json::parse(slurp(tmp.path / "run_manifest.json"));
  CHECK(manifest["status"] == "failed");

  CHECK(run_cli("--seed 1 impute --method bogus -i /nonexistent.csv -o " +
                (tmp.path / "x.csv").string()) == 2);
}

TEST_CASE("jm impute exports chain diagnostics on request") {
  TempDir tmp;
  const auto cohort = (tmp.path / "cohort.csv").string();
  const auto done = (tmp.path / "done.csv").string();
  const auto diag = (tmp.path / "trace.csv").string();
  REQUIRE(run_cli("--seed 9 generate --patients 10 --visits-min 4 --visits-max 5 -o " + cohort) ==
          0);
  REQUIRE(run_cli("--seed 9 impute --method jm_clustered --jm-burn 20 --jm-between 5 --m 2 "
                  "--jm-diagnostics " +
                  diag + " -i " + cohort + " -o " + done) == 0);
  const std::string trace = slurp(diag);
  CHECK(trace.rfind("iteration,accepted,sigma_e_0", 0) == 0);
  CHECK(count_lines(trace) == 31);  // header + 20 + 2*5 iterations
}

TEST_CASE("bench-impute writes the report and honors --methods") {
  TempDir tmp;
  const auto cohort = (tmp.path / "cohort.csv").string();
  REQUIRE(run_cli("--seed 11 generate --patients 25 --visits-min 5 --visits-max 8 -o " + cohort) ==
          0);
  REQUIRE(run_cli("--seed 11 bench-impute -i " + cohort + " -o " + tmp.path.string() +
                  " --methods locf,linear,ewma") == 0);
  const std::string report = slurp(tmp.path / "imputation_report.csv");
  CHECK(report.rfind("method,rmse,n_masked,runtime_ms\n", 0) == 0);
  CHECK(count_lines(report) == 4);
}

TEST_CASE("bench-predict honors a grid-file override") {
  TempDir tmp;
  const auto cohort = (tmp.path / "cohort.csv").string();
  const auto grid = tmp.path / "grid.json";
  {
    std::ofstream out(grid);
    out << R"({"knn": [{"k": 3}]})";
  }
  REQUIRE(run_cli("--seed 13 generate --patients 16 --visits-min 4 --visits-max 6 -o " + cohort) ==
          0);
  REQUIRE(run_cli("--seed 13 bench-predict -i " + cohort + " -o " + tmp.path.string() +
                  " --imputers locf,linear --predictors knn --grid-file " + grid.string() +
                  " --k 3") == 0);
  const std::string report = slurp(tmp.path / "prediction_report.csv");
  CHECK(count_lines(report) == 3);  // 2 imputers x 1 predictor
  CHECK(report.find("\"\"k\"\":3.0") != std::string::npos);
}

TEST_CASE("config file mirrors flags and flags win") {
  TempDir tmp;
  const auto cfg = tmp.path / "run.conf";
  {
    std::ofstream out(cfg);
    out << "seed=21\n";
  }
  const auto a = (tmp.path / "a.csv").string();
  const auto b = (tmp.path / "b.csv").string();
  const auto c = (tmp.path / "c.csv").string();
  REQUIRE(run_cli("--config " + cfg.string() +
                  " generate --patients 10 --visits-min 3 --visits-max 4 -o " + a) == 0);
  REQUIRE(run_cli("--seed 21 generate --patients 10 --visits-min 3 --visits-max 4 -o " + b) == 0);
  CHECK(slurp(a) == slurp(b));
  REQUIRE(run_cli("--config " + cfg.string() +
                  " --seed 22 generate --patients 10 --visits-min 3 --visits-max 4 -o " + c) ==
          0);
  CHECK(slurp(a) != slurp(c));
}
