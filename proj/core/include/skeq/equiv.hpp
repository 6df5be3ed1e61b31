#pragma once

#include <functional>
#include <span>
#include <utility>

#include "skeq/psd_matrix.hpp"
#include "skeq/spectrum.hpp"

namespace skeq {

// Result bundle of the first-order solve: the induced ridge level mu for a
// given (spectrum, alpha, lambda), together with the admissibility limits.
struct EquivalenceSolution {
  double mu = 0.0;
  double mu0 = 0.0;
  double lambda0 = 0.0;
  double residual = 0.0;  // |lambda - mu(1 - t1(mu)/alpha)|
  int iterations = 0;
};

// Fixed-point parameter zeta0 and the limiting smallest nonzero eigenvalue z0
// of a Wishart-type Gram matrix.
struct EdgeSolution {
  double zeta0 = 0.0;
  double z0 = 0.0;
};

// Limiting S-transform of S*S^H, evaluated on w in (-r_limit, 0].
class STransform {
 public:
  explicit STransform(std::function<double(double)> s) : s_(std::move(s)) {}

  // Free identity: no spectral distortion beyond the resolvent shift.
  static STransform identity();
  // Haar column-orthogonal sketch with aspect ratio alpha in (0, 1].
  static STransform orthogonal(double alpha);
  // i.i.d. sketch with aspect ratio alpha (Marchenko-Pastur S-transform).
  static STransform iid(double alpha);

  double operator()(double w) const { return s_(w); }

 private:
  std::function<double(double)> s_;
};

// Admissibility limits: mu0 is the unique root of alpha = t2(mu0) above the
// pole, lambda0 = mu0 (1 - t1(mu0)/alpha).
std::pair<double, double> solve_mu0_lambda0(const Spectrum& s, double alpha);

// Induced ridge level: unique mu in (mu0, inf) with
// lambda = mu (1 - t1(mu)/alpha). Throws DomainError for lambda <= lambda0
// (within a 1e-9 relative margin), ConvergenceError past the 1e12 mu cap.
EquivalenceSolution solve_mu(const Spectrum& s, double alpha, double lambda);

// Second-order inflation for a test matrix simultaneously diagonalizable
// with A, supplied as per-eigenvalue values psi aligned with s.
double solve_mu_prime(const Spectrum& s, double alpha, double lambda,
                      std::span<const double> psi);

// Smallest-nonzero-eigenvalue predictor for (1/n) X^H X with X = Z Sigma^1/2,
// gamma_ratio = p/n.
EdgeSolution solve_edge(const Spectrum& sigma, double gamma_ratio);

// Companion fixed point zeta for real z < z0: the most negative solution of
// z = zeta (1 - gamma_ratio * sum w s/(s - zeta)).
double solve_zeta(const Spectrum& sigma, double gamma_ratio, double z);

// Orthogonal-sketch ridge level: most positive gamma with
// g_inv(gamma) (gamma - alpha lambda) = 1 - alpha. Requires lambda > 0.
double solve_gamma_orthogonal(const Spectrum& s, double alpha, double lambda);

// Free-sketch ridge level: gamma = lambda * st(-t1(gamma)), damped fixed
// point with bisection fallback. Requires lambda > 0.
double solve_gamma_free(const Spectrum& s, const STransform& st, double lambda);

// Non-isotropic sketching: spectrum of R^1/2 A R^1/2 delegated to solve_mu.
// Throws SingularError when R is numerically singular.
double solve_mu_noniso(const PsdMatrix& a, const PsdMatrix& r, double alpha,
                       double lambda);

}  // namespace skeq
