#include <cmath>
#include <map>
#include <sstream>
#include <utility>

#include "doctest.h"
#include "skeq/equiv.hpp"
#include "skeq/errors.hpp"
#include "skeq/montecarlo.hpp"
#include "skeq/rng.hpp"

using namespace skeq;

namespace {

ExperimentConfig base_config() {
  ExperimentConfig cfg;
  cfg.spectrum = Spectrum({0.0, 1.0, 2.0});
  cfg.alpha = 0.8;
  cfg.lambda = 1.0;
  cfg.seed = 123;
  return cfg;
}

std::string render(const TrialReport& report) {
  std::ostringstream out;
  report.write_csv(out);
  out << report.summary_json();
  return out.str();
}

}  // namespace

TEST_CASE("single-trial harness equals a direct evaluation") {
  ExperimentConfig cfg = base_config();
  cfg.p_grid = {6};
  cfg.trials = 1;
  TrialReport report = run_concentration(cfg);
  REQUIRE(report.points.size() == 1);

  // replicate the harness' draw by hand (same seed stream)
  const int p = 6, q = 4;
  SketchSpec spec = cfg.sketch.with_dims(p, q).with_seed(
      mix_seed(cfg.seed, static_cast<std::uint64_t>(p), 1));
  Eigen::VectorXd diag(6);
  diag << 0, 0, 1, 1, 2, 2;
  PsdMatrix a = PsdMatrix::diagonal(diag);
  Eigen::MatrixXd r =
      sketched_pseudoinverse(a, generate_sketch(spec), cfg.lambda).matrix;
  const PointSummary& pt = report.points[0];
  REQUIRE(pt.groups.size() == 3);
  CHECK(pt.groups[0].mean == doctest::Approx((r(0, 0) + r(1, 1)) / 2).epsilon(1e-12));
  CHECK(pt.groups[2].mean == doctest::Approx((r(4, 4) + r(5, 5)) / 2).epsilon(1e-12));
  CHECK(pt.failed == 0);
}

TEST_CASE("reports are reproducible and thread-count independent") {
  ExperimentConfig cfg = base_config();
  cfg.p_grid = {30, 60};
  cfg.trials = 4;
  cfg.threads = 1;
  const std::string a = render(run_concentration(cfg));
  cfg.threads = 2;
  const std::string b = render(run_concentration(cfg));
  CHECK(a == b);
  cfg.seed += 1;
  CHECK(render(run_concentration(cfg)) != a);
}

TEST_CASE("deviation shrinks along the p grid") {
  ExperimentConfig cfg = base_config();
  cfg.p_grid = {42, 120, 360};
  cfg.trials = 8;
  TrialReport report = run_concentration(cfg);
  REQUIRE(report.points.size() == 3);
  CHECK(report.points[2].mean_abs_dev < report.points[1].mean_abs_dev);
  CHECK(report.points[1].mean_abs_dev < report.points[0].mean_abs_dev);
  // off-diagonals concentrate around zero at roughly 1/sqrt(p)
  CHECK(std::abs(report.points[2].off_mean) < 0.01);
  CHECK(report.points[2].off_sd < report.points[0].off_sd);
}

TEST_CASE("second-order harness tracks the inflation") {
  ExperimentConfig cfg = base_config();
  cfg.p_grid = {240};
  cfg.trials = 6;
  cfg.psi = ExperimentConfig::Psi::MatrixA;
  TrialReport report = run_second_order(cfg);
  const PointSummary& pt = report.points[0];
  REQUIRE(pt.groups.size() == 3);
  CHECK(pt.theory.at("mu_prime") ==
        doctest::Approx(0.40392164645796885).epsilon(2e-2));
  for (const GroupStat& g : pt.groups)
    CHECK(g.mean == doctest::Approx(g.theory).epsilon(0.1));
}

TEST_CASE("edge harness on both gram sides") {
  ExperimentConfig cfg;
  cfg.spectrum = realize_preset(SpectrumPreset::parse("iso:r=1"));
  cfg.seed = 5;
  cfg.p_grid = {200};
  cfg.pn_grid = {0.1, 0.3, 2.0};
  cfg.trials = 8;
  TrialReport report = run_edge(cfg);
  REQUIRE(report.points.size() == 3);
  for (const PointSummary& pt : report.points) {
    const double z0 = pt.theory.at("z0");
    // white Wishart edge at the realized aspect ratio p/round(p/pn)
    const double gamma_eff = 200.0 / pt.theory.at("n");
    const double target = std::pow(1.0 - std::sqrt(gamma_eff), 2);
    CHECK(z0 == doctest::Approx(target).epsilon(1e-10));
    CHECK(pt.groups[0].mean == doctest::Approx(z0).epsilon(0.15));
    CHECK(pt.groups[0].mean >= 0.0);
  }
}

TEST_CASE("edge harness with a sampled marchenko-pastur sigma") {
  ExperimentConfig cfg;
  cfg.seed = 5;
  cfg.p_grid = {150};
  cfg.pn_grid = {0.2};
  cfg.sigma_sample_ratio = 0.5;
  cfg.trials = 10;
  TrialReport report = run_edge(cfg);
  const PointSummary& pt = report.points[0];
  CHECK(pt.theory.at("naive_bound") > 0.0);
  CHECK(pt.theory.at("z0") >= pt.theory.at("naive_bound"));
  CHECK(pt.groups[0].mean == doctest::Approx(pt.theory.at("z0")).epsilon(0.15));
}

TEST_CASE("zoo separates orthogonal and iid references") {
  ExperimentConfig cfg = base_config();
  cfg.p_grid = {240};
  cfg.trials = 5;
  SketchSpec iid;
  iid.kind = SketchSpec::Kind::IidGaussian;
  SketchSpec haar;
  haar.kind = SketchSpec::Kind::HaarOrthogonal;
  cfg.zoo = {iid, haar};
  cfg.zoo_labels = {"iid", "haar"};
  TrialReport report = run_sketch_zoo(cfg);
  REQUIRE(report.points.size() == 2);
  for (const PointSummary& pt : report.points) {
    REQUIRE(pt.groups.size() == 3);
    for (const GroupStat& g : pt.groups) {
      const double ref = pt.label == "haar" ? g.theory_alt : g.theory;
      CHECK(g.mean == doctest::Approx(ref).epsilon(0.05));
    }
  }
  // gamma < mu implies the haar diagonals sit above the iid ones
  CHECK(report.points[1].groups[0].mean > report.points[0].groups[0].mean);
}

TEST_CASE("srht below a power of two behaves like an orthogonal sketch") {
  ExperimentConfig cfg = base_config();
  cfg.trials = 3;
  SketchSpec srht;
  srht.kind = SketchSpec::Kind::Srht;
  srht.p = 1020;  // just below 1024
  cfg.zoo = {srht};
  cfg.zoo_labels = {"srht-below"};
  TrialReport report = run_sketch_zoo(cfg);
  const PointSummary& pt = report.points[0];
  for (const GroupStat& g : pt.groups)
    CHECK(g.mean == doctest::Approx(g.theory_alt).epsilon(0.05));
}

TEST_CASE("off-diagonal spread matches the rank-one second-order prediction") {
  // Var(R_ij) for i != j follows from the second-order equivalence with
  // Psi = e_j e_j^T: mu^3/(q D) / ((a_i+mu)^2 (a_j+mu)^2), where
  // D = lambda + (mu^2/q) tr[A (A+mu I)^-2].
  const int p = 600, q = 480;
  Eigen::VectorXd diag(p);
  for (int i = 0; i < p; ++i) diag[i] = static_cast<double>(i % 3);
  PsdMatrix a = PsdMatrix::diagonal(diag);
  Spectrum spec = a.spectrum();
  const double lambda = 1.0;
  const double mu = solve_mu(spec, 0.8, lambda).mu;
  double tr = 0.0;
  for (int i = 0; i < p; ++i) tr += diag[i] / std::pow(diag[i] + mu, 2);
  const double d_factor = lambda + mu * mu * tr / q;
  const double scale = std::sqrt(mu * mu * mu / (q * d_factor));

  // pool a few trials per cluster pair
  std::map<std::pair<int, int>, std::pair<double, long>> acc;
  for (int t = 0; t < 4; ++t) {
    SketchSpec s;
    s.p = p;
    s.q = q;
    s.seed = 100 + t;
    Eigen::MatrixXd r = sketched_pseudoinverse(a, generate_sketch(s), lambda).matrix;
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < p; ++j) {
        if (i == j) continue;
        auto& slot = acc[{i % 3, j % 3}];
        slot.first += r(i, j) * r(i, j);
        slot.second += 1;
      }
  }
  for (const auto& [key, slot] : acc) {
    const double sd = std::sqrt(slot.first / slot.second);
    const double pred =
        scale / ((key.first + mu) * (key.second + mu));
    CHECK(sd == doctest::Approx(pred).epsilon(0.04));
  }
}

TEST_CASE("failure budget aborts the run") {
  ExperimentConfig cfg = base_config();
  cfg.p_grid = {24};
  cfg.trials = 5;
  cfg.sketch.kind = SketchSpec::Kind::NonIsotropic;  // missing R: every trial fails
  CHECK_THROWS_AS(run_concentration(cfg), FailureBudgetError);
}

TEST_CASE("config validation") {
  ExperimentConfig cfg = base_config();
  cfg.p_grid = {100, 50};
  CHECK_THROWS_AS(run_concentration(cfg), ParameterError);
  cfg.p_grid = {50};
  cfg.trials = 0;
  CHECK_THROWS_AS(run_concentration(cfg), ParameterError);
}

TEST_CASE("csv rows carry the long format") {
  ExperimentConfig cfg = base_config();
  cfg.p_grid = {12};
  cfg.trials = 2;
  TrialReport report = run_concentration(cfg);
  std::ostringstream out;
  report.write_csv(out);
  const std::string text = out.str();
  CHECK(text.rfind("trial,p,entry_index,empirical,theoretical", 0) == 0);
  // 2 trials x 12 diagonal entries + header
  int lines = 0;
  for (char c : text)
    if (c == '\n') ++lines;
  CHECK(lines == 1 + 2 * 12);
}
