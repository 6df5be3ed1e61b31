#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "skeq/sketch.hpp"

namespace skeq {

// Sketch-and-project run: inputs plus, after completion, the iterate history
// and the predicted rate/iteration bound.
struct ProjectRun {
  // inputs
  Eigen::MatrixXd l;       // n x p
  Eigen::VectorXd b;       // n
  Eigen::VectorXd x0;      // p
  // family template; dims n x m set per iteration. Sparse by default: the
  // apply cost story is O(m^2) per step.
  SketchSpec sketch = sparse_default();
  static SketchSpec sparse_default() {
    SketchSpec spec;
    spec.kind = SketchSpec::Kind::SparseIid;
    return spec;
  }
  int m = 0;               // sketch dimension
  double eps = 1e-3;       // target on (1/n)||L x - b||^2
  std::uint64_t seed = 0;
  int max_iter_factor = 50;  // iteration cap = max_iter_factor * t_eps

  // outputs
  std::vector<double> residual_history;  // (1/n)||L x_t - b||^2, t = 0..T
  std::vector<double> dist_history;      // ||x_t - x*||^2
  Eigen::VectorXd x;
  int iterations = 0;
  bool converged = false;
  double mu = 0.0;          // induced ridge at lambda = 0, alpha = m/n
  double rho = 0.0;         // mu/(lambda_min_plus + mu)
  int t_eps = 0;            // predicted iteration bound
  double lambda_min_plus = 0.0, lambda_max = 0.0;
  double rel_computation_factor = 0.0;  // alpha^2 t_eps
  double wall_seconds = 0.0;            // iteration loop only; informational
};

// Runs the iteration until the residual target or the cap; fresh independent
// sketch every step. Throws NotSatisfiableError when the cap is reached.
ProjectRun sketch_and_project(ProjectRun run);

struct ProjectConstants {
  double alpha = 0.0;
  double lambda_max = 0.0;
  double dist0_sq = 0.0;
};

// ceil(log(eps/(lambda_max d0^2))/log rho); 1 when rho = 0 (alpha >= r).
int t_epsilon(double rho, double eps, double lambda_max, double dist0_sq);
// alpha^2 t_eps. Accepts rho in [0, 1); DomainError otherwise.
double relative_computation_factor(double rho, double eps,
                                   const ProjectConstants& constants);

// One sketched ridge problem at a single lambda: K members, their average,
// and the predicted errors.
struct RidgeRun {
  // inputs
  Eigen::MatrixXd l;       // n x p
  Eigen::VectorXd b;       // n
  double lambda = 0.0;
  int m = 0;               // sketch size
  int k_ensemble = 1;      // K
  Eigen::MatrixXd phi;     // p x p PSD metric; empty means identity
  Eigen::VectorXd x_ref;   // x'
  SketchSpec sketch;       // family template (default i.i.d. Gaussian)
  std::uint64_t seed = 0;

  // outputs
  std::vector<Eigen::VectorXd> members;
  Eigen::VectorXd ensemble_average;
  double empirical_error_single = 0.0;    // mean over members of E_phi
  double empirical_error_ensemble = 0.0;  // E_phi of the average
  double theory_error_equiv = 0.0;        // E_phi(x_equiv, x')
  double theory_inflation = 0.0;          // (mu'/n) b^H (A+mu I)^-2 b
  double theory_error_single = 0.0;
  double theory_error_ensemble = 0.0;     // inflation / K
  double mu = 0.0, mu_prime = 0.0, lambda0 = 0.0;
};

RidgeRun sketched_ridge(RidgeRun run);

// Lambda sweep reusing each member's factorization across the grid;
// `ensembles` independent repetitions of the K-ensemble are averaged.
struct RidgeSweepRow {
  double lambda = 0.0;
  bool admissible = false;
  double mu = 0.0, mu_prime = 0.0;
  double empirical_single = 0.0, empirical_ensemble = 0.0;
  double theory_single = 0.0, theory_ensemble = 0.0, theory_equiv = 0.0;
  std::vector<double> member_errors;  // ensembles * K entries
};

struct RidgeSweep {
  double lambda0 = 0.0;
  std::vector<RidgeSweepRow> rows;
};

RidgeSweep sketched_ridge_sweep(const Eigen::MatrixXd& l,
                                const Eigen::VectorXd& b,
                                const Eigen::VectorXd& x_ref, int m,
                                int k_ensemble, int ensembles,
                                const std::vector<double>& lambdas,
                                std::uint64_t seed, int threads = 0);

}  // namespace skeq
