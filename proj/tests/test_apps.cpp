#include <cmath>

#include <Eigen/Dense>

#include "doctest.h"
#include "skeq/apps.hpp"
#include "skeq/errors.hpp"
#include "skeq/rng.hpp"

using namespace skeq;

namespace {

Eigen::MatrixXd gaussian_matrix(int n, int p, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) m(i, j) = rng.normal();
  return m;
}

Eigen::VectorXd gaussian_vector(int n, double scale, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = scale * rng.normal();
  return v;
}

}  // namespace

TEST_CASE("t_epsilon and the relative computation factor") {
  // alpha >= r: rho = 0, one step, factor alpha^2
  CHECK(t_epsilon(0.0, 1e-3, 10.0, 1.0) == 1);
  CHECK(relative_computation_factor(0.0, 1e-3, {0.5, 10.0, 1.0}) ==
        doctest::Approx(0.25));
  // already converged
  CHECK(t_epsilon(0.5, 1e-3, 10.0, 0.0) == 0);
  CHECK(t_epsilon(0.5, 20.0, 10.0, 1.0) == 0);

  CHECK_THROWS_AS(relative_computation_factor(1.0, 1e-3, {0.5, 10.0, 1.0}),
                  DomainError);
  CHECK_THROWS_AS(relative_computation_factor(-0.1, 1e-3, {0.5, 10.0, 1.0}),
                  DomainError);

  // epsilon -> 0 at fixed alpha < r diverges
  const double f3 = relative_computation_factor(0.6, 1e-3, {0.1, 10.0, 1.0});
  const double f6 = relative_computation_factor(0.6, 1e-6, {0.1, 10.0, 1.0});
  const double f9 = relative_computation_factor(0.6, 1e-9, {0.1, 10.0, 1.0});
  CHECK(f6 > f3);
  CHECK(f9 > f6);

  // fixed small epsilon, alpha -> 0 sweep decreases toward zero
  // (isotropic rank-r spectrum: mu = r/alpha - 1, lambda_min_plus = 1)
  const double r = 0.5, eps = 1e-6;
  double prev = 0.0;
  for (double alpha : {0.04, 0.02, 0.01, 0.005}) {
    const double mu = r / alpha - 1.0;
    const double rho = mu / (1.0 + mu);
    const double f = relative_computation_factor(rho, eps, {alpha, 1.0, 1.0});
    if (prev > 0.0) CHECK(f < prev);
    prev = f;
  }
}

TEST_CASE("sketch-and-project: zero iterations when starting at the solution") {
  const int n = 40, p = 10;
  Eigen::MatrixXd l = gaussian_matrix(n, p, 1);
  Eigen::VectorXd xstar = gaussian_vector(p, 1.0, 2);
  ProjectRun run;
  run.l = l;
  run.b = l * xstar;
  run.x0 = xstar;
  run.m = 4;
  run.eps = 1e-12;
  run.seed = 3;
  run = sketch_and_project(std::move(run));
  CHECK(run.iterations == 0);
  CHECK(run.converged);
  CHECK(run.t_eps == 0);
}

TEST_CASE("sketch-and-project: one exact projection when m >= rank") {
  const int n = 60, p = 12;
  Eigen::MatrixXd l = gaussian_matrix(n, p, 4);
  Eigen::VectorXd xstar = gaussian_vector(p, 0.3, 5);
  for (int m : {12, 20}) {
    ProjectRun run;
    run.l = l;
    run.b = l * xstar;
    run.x0 = Eigen::VectorXd::Zero(p);
    run.m = m;
    run.eps = 1e-16;  // exact projection beats any target
    run.seed = 6;
    run = sketch_and_project(std::move(run));
    CHECK(run.iterations == 1);
    CHECK(run.t_eps == 1);
    CHECK(run.rho == 0.0);
    CHECK(run.mu == 0.0);
    CHECK(run.residual_history.back() < 1e-18);
    CHECK((run.x - xstar).norm() < 1e-8);
  }
}

TEST_CASE("sketch-and-project: contraction matches the predicted rate") {
  const int n = 400, p = 80;  // r = 0.2
  Eigen::MatrixXd l = gaussian_matrix(n, p, 7);
  Eigen::VectorXd xstar = gaussian_vector(p, 0.1, 8);
  double ratio_sum = 0.0;
  long ratio_n = 0;
  double rho = 0.0;
  for (int trial = 0; trial < 3; ++trial) {
    ProjectRun run;
    run.l = l;
    run.b = l * xstar;
    run.x0 = Eigen::VectorXd::Zero(p);
    run.sketch.kind = SketchSpec::Kind::SparseIid;
    run.m = 40;  // alpha = 0.1 < r
    run.eps = 1e-5;
    run.seed = 100 + trial;
    run = sketch_and_project(std::move(run));
    rho = run.rho;
    CHECK(run.converged);
    CHECK(run.iterations <= 3 * run.t_eps + 2);
    for (std::size_t t = 1; t < run.dist_history.size(); ++t) {
      if (run.dist_history[t - 1] <= 0.0) break;
      ratio_sum += run.dist_history[t] / run.dist_history[t - 1];
      ratio_n += 1;
    }
  }
  CHECK(ratio_sum / ratio_n <= rho + 0.05);
}

TEST_CASE("sketch-and-project: unsatisfiable targets raise") {
  const int n = 30, p = 5;
  Eigen::MatrixXd l = gaussian_matrix(n, p, 9);
  Eigen::VectorXd b = gaussian_vector(n, 1.0, 10);  // not in range(L)
  ProjectRun run;
  run.l = l;
  run.b = b;
  run.x0 = Eigen::VectorXd::Zero(p);
  run.m = 2;
  run.eps = 1e-14;
  run.seed = 11;
  run.max_iter_factor = 2;
  CHECK_THROWS_AS(sketch_and_project(std::move(run)), NotSatisfiableError);
}

TEST_CASE("sketched ridge: square orthogonal sketch at lambda 0 is least-norm") {
  const int n = 50, p = 10;
  Eigen::MatrixXd l = gaussian_matrix(n, p, 12);
  Eigen::VectorXd xstar = gaussian_vector(p, 0.5, 13);
  Eigen::VectorXd b = l * xstar + gaussian_vector(n, 0.3, 14);
  RidgeRun run;
  run.l = l;
  run.b = b;
  run.lambda = 0.0;
  run.m = n;
  run.k_ensemble = 1;
  run.x_ref = xstar;
  run.sketch.kind = SketchSpec::Kind::HaarOrthogonal;
  run.seed = 15;
  run = sketched_ridge(std::move(run));
  Eigen::VectorXd least_norm =
      l.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(b);
  CHECK((run.members[0] - least_norm).norm() < 1e-8 * least_norm.norm());
}

TEST_CASE("sketched ridge: theory pieces behave") {
  const int n = 300, p = 60;
  Eigen::MatrixXd l = gaussian_matrix(n, p, 16);
  Eigen::VectorXd xstar = gaussian_vector(p, 1.0 / std::sqrt(p), 17);
  Eigen::VectorXd b = l * xstar + gaussian_vector(n, 1.0, 18);

  RidgeRun run;
  run.l = l;
  run.b = b;
  run.lambda = 0.1;
  run.m = 30;
  run.k_ensemble = 4;
  run.x_ref = xstar;
  run.seed = 19;
  run = sketched_ridge(std::move(run));
  CHECK(run.theory_error_single ==
        doctest::Approx(run.theory_error_equiv + run.theory_inflation)
            .epsilon(1e-12));
  const double th_inf = run.theory_error_equiv + run.theory_inflation / 1e9;
  CHECK(th_inf == doctest::Approx(run.theory_error_equiv).epsilon(1e-6));
  CHECK(run.mu_prime >= 0.0);
  CHECK(run.lambda0 < 0.0);

  // admissible negative lambda in the oversampled regime: mu goes negative,
  // the inflation term stays finite and nonnegative
  RidgeRun neg;
  neg.l = l;
  neg.b = b;
  neg.m = 75;  // alpha = 0.25 > r = 0.2
  neg.k_ensemble = 2;
  neg.x_ref = xstar;
  neg.seed = 19;
  neg.lambda = 0.0;
  neg = sketched_ridge(std::move(neg));
  const double lam_neg = 0.5 * neg.lambda0;  // halfway to the boundary
  RidgeRun neg2;
  neg2.l = l;
  neg2.b = b;
  neg2.m = 75;
  neg2.k_ensemble = 2;
  neg2.x_ref = xstar;
  neg2.seed = 19;
  neg2.lambda = lam_neg;
  neg2 = sketched_ridge(std::move(neg2));
  CHECK(neg2.mu < 0.0);
  CHECK(std::isfinite(neg2.theory_error_single));
  CHECK(neg2.theory_inflation >= 0.0);
}

TEST_CASE("sketched ridge sweep: ensemble averaging is monotone in K") {
  const int n = 400, p = 80, m = 40;
  Eigen::MatrixXd l = gaussian_matrix(n, p, 20);
  Eigen::VectorXd xstar = gaussian_vector(p, 1.0 / std::sqrt(p), 21);
  Eigen::VectorXd b = l * xstar + gaussian_vector(n, 1.0, 22);
  std::vector<double> lambdas{0.05, 0.2, 0.6};

  double prev_mean = 1e300;
  for (int k : {1, 5, 30}) {
    RidgeSweep sweep = sketched_ridge_sweep(l, b, xstar, m, k, 4, lambdas, 23);
    double mean = 0.0;
    for (const RidgeSweepRow& row : sweep.rows) {
      REQUIRE(row.admissible);
      mean += row.empirical_ensemble;
    }
    mean /= sweep.rows.size();
    CHECK(mean <= prev_mean * 1.10);  // within noise, decreasing in K
    prev_mean = mean;
  }
}

TEST_CASE("sketched ridge sweep: theory curve finite and continuous") {
  const int n = 200, p = 40, m = 20;
  Eigen::MatrixXd l = gaussian_matrix(n, p, 24);
  Eigen::VectorXd xstar = gaussian_vector(p, 1.0 / std::sqrt(p), 25);
  Eigen::VectorXd b = l * xstar + gaussian_vector(n, 0.5, 26);
  std::vector<double> lambdas;
  for (int i = 0; i < 20; ++i) lambdas.push_back(0.02 + 0.05 * i);
  RidgeSweep sweep = sketched_ridge_sweep(l, b, xstar, m, 2, 1, lambdas, 27);
  double prev = -1.0;
  for (const RidgeSweepRow& row : sweep.rows) {
    REQUIRE(row.admissible);
    CHECK(std::isfinite(row.theory_single));
    CHECK(std::isfinite(row.theory_ensemble));
    if (prev >= 0.0)
      CHECK(std::abs(row.theory_single - prev) < 0.5 * (1.0 + prev));
    prev = row.theory_single;
  }
}

TEST_CASE("sketched ridge tracks the error decomposition at moderate scale") {
  const int n = 800, p = 160, m = 40;
  Eigen::MatrixXd l = gaussian_matrix(n, p, 28);
  Eigen::VectorXd xstar = gaussian_vector(p, 1.0 / std::sqrt(p), 29);
  Eigen::VectorXd b = l * xstar + gaussian_vector(n, 1.5, 30);
  std::vector<double> lambdas{0.05, 0.3};
  RidgeSweep sweep = sketched_ridge_sweep(l, b, xstar, m, 10, 3, lambdas, 31);
  for (const RidgeSweepRow& row : sweep.rows) {
    REQUIRE(row.admissible);
    CHECK(row.empirical_single ==
          doctest::Approx(row.theory_single).epsilon(0.10));
    CHECK(row.empirical_ensemble ==
          doctest::Approx(row.theory_ensemble).epsilon(0.15));
  }
}
