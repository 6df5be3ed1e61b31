#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "doctest.h"

namespace {

struct CliResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

CliResult run_cli(const std::string& args) {
  const std::string cmd = std::string(SKETCHEQ_BIN) + " " + args + " 2>&1";
  std::array<char, 4096> buf{};
  CliResult result;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  while (std::size_t got = std::fread(buf.data(), 1, buf.size(), pipe))
    result.output.append(buf.data(), got);
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

std::string write_three_point_spectrum() {
  const std::string path = "/tmp/skeq_three_point.json";
  std::ofstream out(path);
  out << "{\"eigenvalues\": [0, 1, 2]}\n";
  return path;
}

}  // namespace

TEST_CASE("cli solve on a preset") {
  CliResult res =
      run_cli("solve --preset iso:r=0.5 --alpha 0.8 --lambda 0");
  REQUIRE(res.exit_code == 0);
  nlohmann::json j = nlohmann::json::parse(res.output);
  CHECK(j["mu"].get<double>() == doctest::Approx(0.0));
  CHECK(j["lambda0"].get<double>() == doctest::Approx(-0.043861169915810315));
}

TEST_CASE("cli solve with mu_prime and gamma") {
  const std::string path = write_three_point_spectrum();
  CliResult res = run_cli("solve --spectrum " + path +
                          " --alpha 0.8 --lambda 1 --psi identity --gamma");
  REQUIRE(res.exit_code == 0);
  nlohmann::json j = nlohmann::json::parse(res.output);
  CHECK(j["mu"].get<double>() == doctest::Approx(1.63).epsilon(0.01));
  CHECK(j["mu_prime"].get<double>() == doctest::Approx(0.813).epsilon(0.01));
  CHECK(j["gamma"].get<double>() == doctest::Approx(1.17).epsilon(0.01));
}

TEST_CASE("cli exit codes") {
  // domain error names lambda0 and exits 2
  CliResult dom = run_cli("solve --preset iso:r=0.5 --alpha 0.8 --lambda -1");
  CHECK(dom.exit_code == 2);
  CHECK(dom.output.find("lambda0") != std::string::npos);
  // usage: missing required flag
  CHECK(run_cli("solve --preset iso:r=0.5 --lambda 1").exit_code == 1);
  // usage: no spectrum source
  CHECK(run_cli("solve --alpha 0.8 --lambda 1").exit_code == 1);
  // usage: two spectrum sources
  const std::string path = write_three_point_spectrum();
  CHECK(run_cli("solve --preset iso:r=0.5 --spectrum " + path +
                " --alpha 0.8 --lambda 1")
            .exit_code == 1);
  // unknown subcommand
  CHECK(run_cli("frobnicate").exit_code == 1);
  // convergence failure: alpha -> 0 cap
  CHECK(run_cli("solve --preset iso:r=0.5 --alpha 1e-30 --lambda 1").exit_code ==
        3);
  // help is exit 0
  CHECK(run_cli("--help").exit_code == 0);
}

TEST_CASE("cli sweep single point agrees with solve") {
  CliResult solved =
      run_cli("solve --preset iso:r=0.5 --alpha 0.8 --lambda 1");
  REQUIRE(solved.exit_code == 0);
  const double mu = nlohmann::json::parse(solved.output)["mu"].get<double>();

  CliResult swept = run_cli(
      "sweep --preset iso:r=0.5 --alphas 0.8:0.8:1 --lambdas 1:1:1");
  REQUIRE(swept.exit_code == 0);
  // header + one row
  const auto nl = swept.output.find('\n');
  REQUIRE(nl != std::string::npos);
  std::string row = swept.output.substr(nl + 1);
  double alpha = 0, lambda = 0, mu_row = 0;
  REQUIRE(std::sscanf(row.c_str(), "%lf,%lf,%lf", &alpha, &lambda, &mu_row) == 3);
  CHECK(mu_row == doctest::Approx(mu).epsilon(1e-14));
  CHECK(row.find("ok") != std::string::npos);
}

TEST_CASE("cli sweep flags inadmissible points and fails on an empty grid") {
  CliResult mixed = run_cli(
      "sweep --preset iso:r=0.5 --alphas 0.8:0.8:1 --lambdas -0.1:1:4");
  REQUIRE(mixed.exit_code == 0);
  CHECK(mixed.output.find("inadmissible") != std::string::npos);
  CHECK(mixed.output.find("ok") != std::string::npos);

  CliResult empty = run_cli(
      "sweep --preset iso:r=0.5 --alphas 0.8:0.8:1 --lambdas -10:-5:3");
  CHECK(empty.exit_code == 2);
}

TEST_CASE("cli alpha sweep at lambda zero matches the piecewise closed form") {
  CliResult res = run_cli(
      "sweep --preset iso:r=0.5 --alphas 0.25:1.25:5 --lambdas 0:0:1");
  REQUIRE(res.exit_code == 0);
  std::istringstream lines(res.output);
  std::string line;
  std::getline(lines, line);  // header
  while (std::getline(lines, line)) {
    double alpha = 0, lambda = 0, mu = 0;
    REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf", &alpha, &lambda, &mu) == 3);
    const double expect = std::max(0.5 / alpha - 1.0, 0.0);
    CHECK(mu == doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("cli outputs are byte stable under a fixed seed") {
  const std::string args =
      "--seed 7 verify --preset iso:r=0.5 --p-grid 24 --trials 2 "
      "--alpha 0.8 --lambda 0.5";
  CliResult a = run_cli(args);
  CliResult b = run_cli(args);
  REQUIRE(a.exit_code == 0);
  CHECK(a.output == b.output);
  CliResult c = run_cli(
      "--seed 8 verify --preset iso:r=0.5 --p-grid 24 --trials 2 "
      "--alpha 0.8 --lambda 0.5");
  CHECK(a.output != c.output);
}

TEST_CASE("cli solve from a matrix csv") {
  const std::string path = "/tmp/skeq_cli_matrix.csv";
  {
    std::ofstream out(path);
    out << "p=3\n1,0,0\n0,2,0\n0,0,3\n";
  }
  CliResult res = run_cli("solve --matrix " + path + " --alpha 0.8 --lambda 1");
  REQUIRE(res.exit_code == 0);
  nlohmann::json j = nlohmann::json::parse(res.output);
  CHECK(j["mu"].get<double>() > 1.0);
}

TEST_CASE("cli edge with an explicit sigma spectrum file") {
  const std::string path = write_three_point_spectrum();
  CliResult res = run_cli("--seed 2 edge --sigma-file " + path +
                          " --p 60 --pn-grid 0.25:0.25:1 --trials 2");
  CHECK(res.exit_code == 0);
}

TEST_CASE("cli edge smoke") {
  CliResult res = run_cli(
      "--seed 3 edge --sigma iso:r=1 --p 64 --pn-grid 0.25:0.5:2 --trials 2");
  REQUIRE(res.exit_code == 0);
  CHECK(res.output.rfind("trial,p,entry_index,empirical,theoretical", 0) == 0);
}

TEST_CASE("cli verify vtilde statistic") {
  CliResult res = run_cli(
      "--seed 3 verify --preset iso:r=0.5 --p-grid 48 --trials 2 --alpha 0.8 "
      "--lambda 1 --stat vtilde");
  CHECK(res.exit_code == 0);
}

TEST_CASE("cli zoo smoke") {
  CliResult res = run_cli(
      "--seed 3 zoo --preset iso:r=0.5 --kinds iid-gaussian,count-sketch "
      "--p 48 --alpha 0.5 --lambda 1 --trials 2");
  REQUIRE(res.exit_code == 0);
  CHECK(res.output.find("count-sketch") != std::string::npos);
}

TEST_CASE("cli project smoke") {
  CliResult res = run_cli(
      "--seed 3 project --n 120 --p 24 --m-grid 12:24:2 --eps 1e-3 --trials 2");
  REQUIRE(res.exit_code == 0);
  CHECK(res.output.rfind("m,alpha,trial,iterations", 0) == 0);
  // m = 24 = rank: exactly one iteration rows present
  CHECK(res.output.find("24,0.20000000000000001,0,1,1,") != std::string::npos);
}

TEST_CASE("cli ridge smoke") {
  CliResult res = run_cli(
      "--seed 3 ridge --n 120 --p 24 --m 12 --K 3 --sigma-noise 0.5 "
      "--lambdas 0.05:0.2:3");
  REQUIRE(res.exit_code == 0);
  CHECK(res.output.rfind(
            "lambda,member,empirical_error,theory_error_single,"
            "theory_error_ensemble",
            0) == 0);
  CHECK(res.output.find("ensemble-average") != std::string::npos);
}

TEST_CASE("cli solve csv format") {
  CliResult res = run_cli(
      "--format csv solve --preset iso:r=0.5 --alpha 0.8 --lambda 1 --gamma");
  REQUIRE(res.exit_code == 0);
  CHECK(res.output.rfind("mu,mu0,lambda0,gamma", 0) == 0);
}

TEST_CASE("cli verify json format emits the summary document") {
  CliResult res = run_cli(
      "--seed 3 --format json verify --preset iso:r=0.5 --p-grid 24 "
      "--trials 2 --alpha 0.8 --lambda 0.5");
  REQUIRE(res.exit_code == 0);
  nlohmann::json j = nlohmann::json::parse(res.output);
  CHECK(j["points"].size() == 1);
  CHECK(j["points"][0].contains("groups"));
}

TEST_CASE("cli ridge accepts a json run config") {
  const std::string cfg = "/tmp/skeq_ridge_cfg.json";
  {
    std::ofstream out(cfg);
    out << "{\"n\": 100, \"p\": 20, \"m\": 10, \"K\": 2, \"sigma_noise\": 0.5,"
           " \"lambdas\": [0.1, 0.3], \"seed\": 4}\n";
  }
  CliResult res = run_cli("ridge --config " + cfg);
  REQUIRE(res.exit_code == 0);
  // two lambda blocks, K=2 members each plus the average rows
  int lines = 0;
  for (char c : res.output)
    if (c == '\n') ++lines;
  CHECK(lines == 1 + 2 * 3);
}

TEST_CASE("cli project accepts a json run config") {
  const std::string cfg = "/tmp/skeq_project_cfg.json";
  {
    std::ofstream out(cfg);
    out << "{\"n\": 100, \"p\": 20, \"m_grid\": [20], \"eps\": 1e-3,"
           " \"trials\": 1, \"seed\": 4}\n";
  }
  CliResult res = run_cli("project --config " + cfg);
  REQUIRE(res.exit_code == 0);
  CHECK(res.output.find("20,0.20000000000000001,0,1,1,") != std::string::npos);
}

TEST_CASE("cli writes output files") {
  const std::string out = "/tmp/skeq_cli_out.csv";
  CliResult res = run_cli(
      "--seed 3 -o " + out +
      " sweep --preset iso:r=0.5 --alphas 0.5:1:2 --lambdas 0.5:1:2");
  REQUIRE(res.exit_code == 0);
  std::ifstream in(out);
  REQUIRE(in.good());
  std::string header;
  std::getline(in, header);
  CHECK(header.rfind("alpha,lambda,mu", 0) == 0);
}
