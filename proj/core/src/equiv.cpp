#include "skeq/equiv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "skeq/errors.hpp"
#include "skeq/roots.hpp"

namespace skeq {

namespace {

// lambda(mu) = mu - (1/alpha) sum w a mu/(a+mu) - evaluated without the
// 1 - t1/alpha cancellation so the residual stays clean for large mu.
double lambda_of_mu(const Spectrum& s, double alpha, double mu) {
  const auto& ev = s.eigenvalues();
  const auto& w = s.weights();
  double acc = 0.0;
  for (std::size_t i = 0; i < ev.size(); ++i)
    if (ev[i] > 0.0) acc += w[i] * ev[i] * mu / (ev[i] + mu);
  return mu - acc / alpha;
}

// Edge-side sums over (sigma - zeta) denominators; zero eigenvalues drop out.
double edge_m1(const Spectrum& s, double zeta) {
  const auto& ev = s.eigenvalues();
  const auto& w = s.weights();
  double acc = 0.0;
  for (std::size_t i = 0; i < ev.size(); ++i)
    if (ev[i] > 0.0) acc += w[i] * ev[i] / (ev[i] - zeta);
  return acc;
}

double edge_m2(const Spectrum& s, double zeta) {
  const auto& ev = s.eigenvalues();
  const auto& w = s.weights();
  double acc = 0.0;
  for (std::size_t i = 0; i < ev.size(); ++i)
    if (ev[i] > 0.0) {
      const double f = ev[i] / (ev[i] - zeta);
      acc += w[i] * f * f;
    }
  return acc;
}

double edge_m3(const Spectrum& s, double zeta) {
  const auto& ev = s.eigenvalues();
  const auto& w = s.weights();
  double acc = 0.0;
  for (std::size_t i = 0; i < ev.size(); ++i)
    if (ev[i] > 0.0) {
      const double f = ev[i] / (ev[i] - zeta);
      acc += w[i] * f * f / (ev[i] - zeta);
    }
  return acc;
}

}  // namespace

std::pair<double, double> solve_mu0_lambda0(const Spectrum& s, double alpha) {
  if (!(alpha > 0.0)) throw ParameterError("alpha must be positive");
  if (s.relative_rank() <= 0.0)
    throw ParameterError("spectrum has no nonzero eigenvalues");

  const double lmin = s.lambda_min_plus();
  // alpha - t2(mu) is increasing; t2 blows up at the pole and decays to 0.
  auto f = [&](double mu) -> std::pair<double, double> {
    const auto& ev = s.eigenvalues();
    const auto& w = s.weights();
    double val = 0.0, der = 0.0;
    for (std::size_t i = 0; i < ev.size(); ++i)
      if (ev[i] > 0.0) {
        const double g = ev[i] / (ev[i] + mu);
        val += w[i] * g * g;
        der += 2.0 * w[i] * g * g / (ev[i] + mu);
      }
    return {alpha - val, der};
  };

  double lo = -lmin + 1e-13 * std::max(lmin, 1.0);
  double hi = expand_upper(f, lo, std::max(1.0, lmin),
                           1e12 * std::max(1.0, s.max_eigenvalue()));
  RootResult root =
      find_root_increasing(f, lo, hi, 1e-14 * std::max(1.0, alpha), 0.0, 4e-16);
  const double mu0 = root.x;
  const double lambda0 = lambda_of_mu(s, alpha, mu0);
  return {mu0, lambda0};
}

EquivalenceSolution solve_mu(const Spectrum& s, double alpha, double lambda) {
  auto [mu0, lambda0] = solve_mu0_lambda0(s, alpha);

  EquivalenceSolution sol;
  sol.mu0 = mu0;
  sol.lambda0 = lambda0;

  // lambda = 0 with alpha >= r(A) sits exactly at mu = 0 (and at the
  // degenerate alpha = r boundary where lambda0 = 0 as well).
  if (lambda == 0.0 && alpha >= s.relative_rank() - 1e-12) {
    sol.mu = 0.0;
    sol.residual = 0.0;
    sol.iterations = 0;
    return sol;
  }

  const double margin = 1e-9 * std::max(1.0, std::abs(lambda0));
  if (lambda <= lambda0 + margin) {
    std::ostringstream msg;
    msg << "lambda = " << lambda << " is not admissible: lambda0 = " << lambda0;
    throw DomainError(msg.str(), lambda0);
  }

  auto f = [&](double mu) -> std::pair<double, double> {
    return {lambda_of_mu(s, alpha, mu) - lambda, 1.0 - s.t2(mu) / alpha};
  };

  const double scale = std::max(1.0, s.max_eigenvalue());
  double lo = mu0 + 1e-12 * std::max(1.0, std::abs(mu0));
  double hi = lambda >= 0.0 ? lambda + s.mean() / alpha + 1.0
                            : std::max(mu0 + 1.0, 1.0);
  hi = expand_upper(f, lo, hi, 1e12 * scale);

  const double ftol = 0.5e-12 * std::max(1.0, std::abs(lambda));
  RootResult root = find_root_increasing(f, lo, hi, ftol, 0.0, 4e-16);
  sol.mu = root.x;
  sol.residual = std::abs(root.fx);
  sol.iterations = root.iterations;
  return sol;
}

double solve_mu_prime(const Spectrum& s, double alpha, double lambda,
                      std::span<const double> psi) {
  if (psi.size() != s.size())
    throw ParameterError("psi must align with the spectrum");
  EquivalenceSolution sol = solve_mu(s, alpha, lambda);
  const double mu = sol.mu;

  if (mu == 0.0) {
    // 0/0 joint limit at lambda = 0, alpha >= r: only kernel mass of psi
    // survives, scaled by 1/(1 - r/alpha).
    const auto& ev = s.eigenvalues();
    const auto& w = s.weights();
    double kernel_mass = 0.0;
    for (std::size_t i = 0; i < ev.size(); ++i)
      if (ev[i] == 0.0) kernel_mass += w[i] * psi[i];
    if (kernel_mass == 0.0) return 0.0;
    const double gap = 1.0 - s.relative_rank() / alpha;
    if (gap <= 0.0)
      throw DomainError("mu' diverges at alpha = r(A), lambda = 0", 0.0);
    return kernel_mass / (alpha * gap);
  }

  const double num = mu * mu * mu * s.resolvent2(psi, mu) / alpha;
  const double den = lambda + mu * mu * s.resolvent2_a(mu) / alpha;
  return num / den;
}

EdgeSolution solve_edge(const Spectrum& sigma, double gamma_ratio) {
  if (!(gamma_ratio > 0.0)) throw ParameterError("gamma_ratio must be positive");
  if (sigma.relative_rank() <= 0.0)
    throw ParameterError("spectrum has no nonzero eigenvalues");

  const double lmin = sigma.lambda_min_plus();
  auto f = [&](double zeta) -> std::pair<double, double> {
    return {gamma_ratio * edge_m2(sigma, zeta) - 1.0,
            2.0 * gamma_ratio * edge_m3(sigma, zeta)};
  };
  double hi = lmin - 1e-13 * std::max(lmin, 1.0);
  double lo = expand_lower(f, lmin - std::max(lmin, 1.0), hi,
                           1e12 * std::max(1.0, sigma.max_eigenvalue()));
  RootResult root = find_root_increasing(f, lo, hi, 1e-13, 0.0, 4e-16);

  EdgeSolution out;
  out.zeta0 = root.x;
  out.z0 = root.x * (1.0 - gamma_ratio * edge_m1(sigma, root.x));
  return out;
}

double solve_zeta(const Spectrum& sigma, double gamma_ratio, double z) {
  EdgeSolution edge = solve_edge(sigma, gamma_ratio);
  const double margin = 1e-12 * std::max(1.0, std::abs(edge.z0));
  if (z >= edge.z0 - margin) {
    std::ostringstream msg;
    msg << "z = " << z << " is not admissible: z0 = " << edge.z0;
    throw DomainError(msg.str(), edge.z0);
  }

  // z(zeta) = zeta - gamma_ratio * sum w s zeta/(s - zeta), increasing on
  // (-inf, zeta0).
  auto f = [&](double zeta) -> std::pair<double, double> {
    const auto& ev = sigma.eigenvalues();
    const auto& w = sigma.weights();
    double acc = 0.0;
    for (std::size_t i = 0; i < ev.size(); ++i)
      if (ev[i] > 0.0) acc += w[i] * ev[i] * zeta / (ev[i] - zeta);
    return {zeta - gamma_ratio * acc - z,
            1.0 - gamma_ratio * edge_m2(sigma, zeta)};
  };

  double hi = edge.zeta0 - 1e-13 * std::max(1.0, std::abs(edge.zeta0));
  double lo = expand_lower(f, hi - std::max(1.0, std::abs(z)), hi,
                           1e12 * std::max({1.0, std::abs(z),
                                            sigma.max_eigenvalue()}));
  const double ftol = 0.5e-12 * std::max(1.0, std::abs(z));
  RootResult root = find_root_increasing(f, lo, hi, ftol, 0.0, 4e-16);
  return root.x;
}

double solve_gamma_orthogonal(const Spectrum& s, double alpha, double lambda) {
  if (!(lambda > 0.0))
    throw DomainError("orthogonal sketching requires lambda > 0");
  if (!(alpha > 0.0) || alpha > 1.0)
    throw ParameterError("orthogonal sketching requires alpha in (0, 1]");
  if (alpha == 1.0) return lambda;  // square rotation adds no regularization

  // F(gamma) = g_inv(gamma)(gamma - alpha lambda) - (1 - alpha) is strictly
  // increasing on the domain of g_inv: gamma*g_inv grows while the
  // -alpha*lambda*g_inv part grows too (g_inv decays).
  auto f = [&](double gamma) -> std::pair<double, double> {
    const auto& ev = s.eigenvalues();
    const auto& w = s.weights();
    double g = 0.0, g1 = 0.0;
    for (std::size_t i = 0; i < ev.size(); ++i) {
      const double d = ev[i] + gamma;
      g += w[i] / d;
      g1 += w[i] / (d * d);
    }
    const double shift = gamma - alpha * lambda;
    return {g * shift - (1.0 - alpha), -g1 * shift + g};
  };

  const double edge = s.relative_rank() < 1.0 ? 0.0 : -s.lambda_min_plus();
  double lo = edge + 1e-9 * std::max(1.0, s.max_eigenvalue());
  double hi = expand_upper(f, lo, std::max(1.0, alpha * lambda + 1.0),
                           1e12 * std::max(1.0, s.max_eigenvalue()));
  RootResult root = find_root_increasing(f, lo, hi, 1e-14, 0.0, 4e-16);
  return root.x;
}

double solve_gamma_free(const Spectrum& s, const STransform& st, double lambda) {
  if (!(lambda > 0.0)) throw DomainError("free sketching requires lambda > 0");

  auto target = [&](double gamma) -> double {
    const double v = st(-s.t1(gamma));
    if (!std::isfinite(v) || v <= 0.0)
      return std::numeric_limits<double>::quiet_NaN();
    return lambda * v;
  };

  const double ftol = 1e-13 * std::max(1.0, lambda);
  double gamma = lambda;
  for (int it = 0; it < 200; ++it) {
    const double t = target(gamma);
    if (!std::isfinite(t) || t <= 0.0) break;
    const double next = 0.5 * gamma + 0.5 * t;
    if (std::abs(next - gamma) <= 1e-14 * std::max(1.0, std::abs(next))) {
      gamma = next;
      if (std::abs(gamma - target(gamma)) <= ftol) return gamma;
      break;
    }
    gamma = next;
  }
  if (std::isfinite(gamma) && gamma > 0.0 &&
      std::abs(gamma - target(gamma)) <= ftol)
    return gamma;

  // Fallback: bisection on h(gamma) = gamma - lambda st(-t1(gamma)). The
  // S-transform can leave its domain (pole of st) below the solution, so the
  // descent tracks the largest known-invalid gamma as a floor and keeps the
  // most positive sign change.
  auto h = [&](double g) -> double {
    const double t = target(g);
    return std::isfinite(t) ? g - t : std::numeric_limits<double>::quiet_NaN();
  };
  double hi = std::max({1.0, lambda, s.mean()});
  for (int k = 0; k < 200 && !(std::isfinite(h(hi)) && h(hi) > 0.0); ++k)
    hi *= 2.0;
  if (!(std::isfinite(h(hi)) && h(hi) > 0.0))
    throw ConvergenceError("free-sketch fixed point: no positive bracket end");
  double invalid_floor = 0.0;
  double lo = hi;
  bool bracketed = false;
  for (int k = 0; k < 400; ++k) {
    const double cand =
        invalid_floor > 0.0 ? 0.5 * (invalid_floor + lo) : 0.5 * lo;
    if (!(cand > invalid_floor) || !(cand < lo)) break;
    const double val = h(cand);
    if (!std::isfinite(val)) {
      invalid_floor = cand;
      continue;
    }
    if (std::abs(val) <= ftol) return cand;
    lo = cand;
    if (val < 0.0) {
      bracketed = true;
      break;
    }
    hi = cand;  // still above the root; tighten from above
  }
  if (!bracketed)
    throw ConvergenceError("free-sketch fixed point: bracketing failed");
  for (int it = 0; it < 300; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double val = h(mid);
    if (!std::isfinite(val))
      throw ConvergenceError("free-sketch fixed point left the S-transform domain");
    if (std::abs(val) <= ftol) return mid;
    (val < 0.0 ? lo : hi) = mid;
    if (hi - lo <= 4e-16 * std::max(1.0, std::abs(mid))) return mid;
  }
  throw ConvergenceError("free-sketch fixed point did not converge");
}

double solve_mu_noniso(const PsdMatrix& a, const PsdMatrix& r, double alpha,
                       double lambda) {
  if (a.dim() != r.dim())
    throw ParameterError("A and R dimensions do not match");
  if (r.eigenvalues()[0] <= r.rank_threshold())
    throw SingularError("R is numerically singular");

  const Eigen::MatrixXd rh = r.sqrt();
  Eigen::MatrixXd m = rh * a.apply(rh);
  PsdMatrix transformed(std::move(m));
  return solve_mu(transformed.spectrum(), alpha, lambda).mu;
}

STransform STransform::identity() {
  return STransform([](double) { return 1.0; });
}

STransform STransform::orthogonal(double alpha) {
  if (!(alpha > 0.0) || alpha > 1.0)
    throw ParameterError("orthogonal S-transform needs alpha in (0, 1]");
  return STransform(
      [alpha](double w) { return alpha * (1.0 + w) / (alpha + w); });
}

STransform STransform::iid(double alpha) {
  if (!(alpha > 0.0)) throw ParameterError("iid S-transform needs alpha > 0");
  return STransform([alpha](double w) { return 1.0 / (1.0 + w / alpha); });
}

}  // namespace skeq
