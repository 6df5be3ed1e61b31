#include "skeq/apps.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

#include "skeq/equiv.hpp"
#include "skeq/errors.hpp"
#include "skeq/rng.hpp"
#include "skeq/spectrum.hpp"

namespace skeq {

namespace {

// Thin eigenstructure of A = (1/n) L L^H through the p x p side.
struct GramThin {
  int n = 0, p = 0, rank = 0;
  Eigen::VectorXd d;    // nonzero eigenvalues of A, ascending (size rank)
  Eigen::MatrixXd v;    // matching right singular vectors of L (p x rank)
  Eigen::VectorXd ub;   // U^H b on the range of L (size rank)
  double bperp_sq = 0.0;
  double b_sq = 0.0;

  Spectrum spectrum() const {
    std::vector<double> ev(d.data(), d.data() + rank);
    std::vector<double> w(rank, 1.0 / n);
    if (rank < n) {
      ev.push_back(0.0);
      w.push_back(static_cast<double>(n - rank) / n);
    }
    return Spectrum(std::move(ev), std::move(w));
  }
};

GramThin gram_thin(const Eigen::MatrixXd& l, const Eigen::VectorXd& b) {
  GramThin g;
  g.n = static_cast<int>(l.rows());
  g.p = static_cast<int>(l.cols());
  Eigen::MatrixXd ltl = l.transpose() * l / static_cast<double>(g.n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
      0.5 * (ltl + ltl.transpose()));
  const Eigen::VectorXd& dall = eig.eigenvalues();
  const double tol = kRankTol * std::max(dall.cwiseAbs().maxCoeff(), 1.0);
  int first = 0;
  while (first < g.p && dall[first] <= tol) ++first;
  g.rank = g.p - first;
  if (g.rank == 0) throw ParameterError("L has no numerical rank");
  g.d = dall.tail(g.rank);
  g.v = eig.eigenvectors().rightCols(g.rank);
  // u_i = L v_i / sqrt(n d_i); only U^H b is ever needed.
  Eigen::VectorXd lv_b = g.v.transpose() * (l.transpose() * b);
  g.ub = lv_b.array() / (g.d.array() * g.n).sqrt();
  g.b_sq = b.squaredNorm();
  g.bperp_sq = std::max(0.0, g.b_sq - g.ub.squaredNorm());
  return g;
}

// x_equiv = (1/n) L^H (A + mu I)^-1 b, exact through the thin factors (the
// component of b outside range(L) is annihilated by L^H).
Eigen::VectorXd ridge_equiv_solution(const GramThin& g, double mu) {
  Eigen::VectorXd scale =
      (g.d.array() * g.n).sqrt() / ((g.d.array() + mu) * g.n);
  return g.v * (scale.array() * g.ub.array()).matrix();
}

struct RidgeTheory {
  double mu = 0.0, mu0 = 0.0, lambda0 = 0.0, mu_prime = 0.0;
  double error_equiv = 0.0;   // E_phi(x_equiv, x')
  double inflation = 0.0;     // (mu'/n) b^H (A + mu I)^-2 b (joint limit at mu=0)
  Eigen::VectorXd x_equiv;
};

// phi_diag: diag of V^H Phi V over the nonzero eigenbasis (ones for Phi = I).
RidgeTheory ridge_theory(const GramThin& g, const Eigen::VectorXd& phi_diag,
                         const Eigen::MatrixXd& phi,
                         const Eigen::VectorXd& x_ref, double lambda, int m) {
  Spectrum spec = g.spectrum();
  const double alpha = static_cast<double>(m) / g.n;
  EquivalenceSolution sol = solve_mu(spec, alpha, lambda);

  RidgeTheory out;
  out.mu = sol.mu;
  out.mu0 = sol.mu0;
  out.lambda0 = sol.lambda0;
  out.x_equiv = ridge_equiv_solution(g, sol.mu);
  Eigen::VectorXd diff = out.x_equiv - x_ref;
  out.error_equiv =
      phi.size() ? diff.dot(phi * diff) : diff.squaredNorm();

  // (1/m) tr[(A+muI)^-1 Psi (A+muI)^-1] with Psi = (1/n) L Phi L^H reduces to
  // sum_i phi_i d_i/(d_i+mu)^2 over the nonzero eigenvalues.
  const double mu = sol.mu;
  if (mu > 0.0 || lambda != 0.0) {
    double t_psi = 0.0, t_a = 0.0, quad = 0.0;
    for (int i = 0; i < g.rank; ++i) {
      const double dmu = g.d[i] + mu;
      t_psi += phi_diag[i] * g.d[i] / (dmu * dmu);
      t_a += g.d[i] / (dmu * dmu);
      quad += g.ub[i] * g.ub[i] / (dmu * dmu);
    }
    out.mu_prime = (mu * mu * mu * t_psi / m) / (lambda + mu * mu * t_a / m);
    const double bquad = quad + (mu != 0.0 ? g.bperp_sq / (mu * mu) : 0.0);
    out.inflation = out.mu_prime * bquad / g.n;
  } else {
    // lambda = 0 with alpha >= r: mu'->0 while b^H(A+muI)^-2 b diverges on
    // Ker(A); the product has the finite limit below.
    const double r = spec.relative_rank();
    const double gap = 1.0 - r / alpha;
    if (gap <= 0.0)
      throw DomainError("ridge theory diverges at alpha = r, lambda = 0", 0.0);
    double t0 = 0.0;
    for (int i = 0; i < g.rank; ++i) t0 += phi_diag[i] / g.d[i];
    out.mu_prime = 0.0;
    out.inflation = t0 * g.bperp_sq / (gap * m * g.n);
  }
  return out;
}

struct RidgeMember {
  Eigen::MatrixXd c;   // S^H L (m x p)
  Eigen::VectorXd dg;  // eigenvalues of (1/n) C C^H
  Eigen::MatrixXd vg;
  Eigen::VectorXd sb;  // S^H b
};

RidgeMember ridge_member(const Eigen::MatrixXd& l, const Eigen::VectorXd& b,
                         const SketchSpec& family, int m, std::uint64_t seed) {
  const int n = static_cast<int>(l.rows());
  SketchSpec spec = family.with_dims(n, m).with_seed(seed);
  Eigen::MatrixXd s = generate_sketch(spec);
  RidgeMember mem;
  mem.c = s.transpose() * l;
  Eigen::MatrixXd g = mem.c * mem.c.transpose() / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (g + g.transpose()));
  mem.dg = eig.eigenvalues();
  mem.vg = eig.eigenvectors();
  mem.sb = s.transpose() * b;
  return mem;
}

Eigen::VectorXd ridge_member_solution(const RidgeMember& mem, double lambda,
                                      int n) {
  Eigen::VectorXd shifted = mem.dg.array() + lambda;
  Eigen::VectorXd inv(shifted.size());
  const double top = std::max(mem.dg.cwiseAbs().maxCoeff(), 1e-300);
  if (lambda == 0.0) {
    const double tol = 1e-10 * std::max(top, 1.0);
    for (Eigen::Index i = 0; i < shifted.size(); ++i)
      inv[i] = std::abs(shifted[i]) > tol ? 1.0 / shifted[i] : 0.0;
  } else {
    const double bottom = shifted.cwiseAbs().minCoeff();
    if (!(bottom > 0.0) || shifted.cwiseAbs().maxCoeff() / bottom > 1e14)
      throw IllConditionedError("sketched ridge member condition > 1e14");
    inv = shifted.cwiseInverse();
  }
  Eigen::VectorXd w = mem.vg * (inv.array() * (mem.vg.transpose() * mem.sb).array()).matrix();
  return mem.c.transpose() * w / static_cast<double>(n);
}

}  // namespace

int t_epsilon(double rho, double eps, double lambda_max, double dist0_sq) {
  if (dist0_sq <= 0.0) return 0;
  if (rho == 0.0) return 1;
  const double ratio = eps / (lambda_max * dist0_sq);
  if (ratio >= 1.0) return 0;
  return std::max(1, static_cast<int>(std::ceil(std::log(ratio) / std::log(rho))));
}

double relative_computation_factor(double rho, double eps,
                                   const ProjectConstants& constants) {
  if (!(rho >= 0.0) || rho >= 1.0)
    throw DomainError("relative computation factor needs rho in [0, 1)");
  const int t = t_epsilon(rho, eps, constants.lambda_max, constants.dist0_sq);
  return constants.alpha * constants.alpha * t;
}

ProjectRun sketch_and_project(ProjectRun run) {
  const int n = static_cast<int>(run.l.rows());
  const int p = static_cast<int>(run.l.cols());
  if (run.b.size() != n) throw ParameterError("b must have n entries");
  if (run.x0.size() != p) throw ParameterError("x0 must have p entries");
  if (run.m < 1) throw ParameterError("sketch size m must be >= 1");

  GramThin g = gram_thin(run.l, run.b);
  run.lambda_min_plus = g.n * g.d[0];        // spectrum of L L^H, unnormalized
  run.lambda_max = g.n * g.d[g.rank - 1];
  const double r = static_cast<double>(g.rank) / n;
  const double alpha = static_cast<double>(run.m) / n;

  // Spectrum of L L^H = n * spectrum of A; at lambda = 0 the fixed point is
  // scale-equivariant so solve on A's spectrum and rescale.
  if (alpha >= r - 1e-12) {
    run.mu = 0.0;
    run.rho = 0.0;
  } else {
    run.mu = g.n * solve_mu(g.spectrum(), alpha, 0.0).mu;
    run.rho = run.mu / (run.lambda_min_plus + run.mu);
  }

  // x* = least-norm solution; b is in range(L) for satisfiable systems.
  Eigen::VectorXd x_star =
      g.v * (g.ub.array() / (g.d.array() * g.n).sqrt()).matrix();
  const double dist0 = (run.x0 - x_star).squaredNorm();
  const double eps_unnorm = run.eps * n;
  run.t_eps = t_epsilon(run.rho, eps_unnorm, run.lambda_max, dist0);
  run.rel_computation_factor = relative_computation_factor(
      run.rho, eps_unnorm, {alpha, run.lambda_max, dist0});

  run.x = run.x0;
  Eigen::VectorXd res = run.l * run.x - run.b;
  run.residual_history.assign(1, res.squaredNorm() / n);
  run.dist_history.assign(1, dist0);
  run.iterations = 0;
  run.converged = run.residual_history[0] <= run.eps;

  const int cap = std::max(1, run.max_iter_factor * std::max(1, run.t_eps));
  const double pinv_tol_base = 1e-10;
  const auto tick = std::chrono::steady_clock::now();
  while (!run.converged) {
    if (run.iterations >= cap)
      throw NotSatisfiableError("sketch-and-project stalled above the target");
    SketchSpec spec = run.sketch.with_dims(n, run.m).with_seed(
        mix_seed(run.seed, 0x5a9, run.iterations + 1));
    Eigen::MatrixXd s = generate_sketch(spec);
    Eigen::MatrixXd bmat = run.l.transpose() * s;          // p x m
    Eigen::MatrixXd gram = bmat.transpose() * bmat;        // S^H L L^H S
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
        0.5 * (gram + gram.transpose()));
    const Eigen::VectorXd& dg = eig.eigenvalues();
    const double tol = pinv_tol_base * std::max(dg.cwiseAbs().maxCoeff(), 1.0);
    Eigen::VectorXd inv(dg.size());
    for (Eigen::Index i = 0; i < dg.size(); ++i)
      inv[i] = dg[i] > tol ? 1.0 / dg[i] : 0.0;
    Eigen::VectorXd y = s.transpose() * res;
    y = eig.eigenvectors() *
        (inv.array() * (eig.eigenvectors().transpose() * y).array()).matrix();
    run.x -= bmat * y;
    res = run.l * run.x - run.b;
    run.iterations += 1;
    run.residual_history.push_back(res.squaredNorm() / n);
    run.dist_history.push_back((run.x - x_star).squaredNorm());
    run.converged = run.residual_history.back() <= run.eps;
  }
  run.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - tick)
          .count();
  return run;
}

RidgeRun sketched_ridge(RidgeRun run) {
  const int n = static_cast<int>(run.l.rows());
  const int p = static_cast<int>(run.l.cols());
  if (run.b.size() != n) throw ParameterError("b must have n entries");
  if (run.k_ensemble < 1) throw ParameterError("K must be >= 1");
  if (run.m < 1) throw ParameterError("sketch size m must be >= 1");
  if (run.x_ref.size() != p) throw ParameterError("x' must have p entries");
  if (run.phi.size() && (run.phi.rows() != p || run.phi.cols() != p))
    throw ParameterError("phi must be p x p");

  GramThin g = gram_thin(run.l, run.b);
  Eigen::VectorXd phi_diag = Eigen::VectorXd::Ones(g.rank);
  if (run.phi.size())
    for (int i = 0; i < g.rank; ++i)
      phi_diag[i] = g.v.col(i).dot(run.phi * g.v.col(i));
  RidgeTheory theory =
      ridge_theory(g, phi_diag, run.phi, run.x_ref, run.lambda, run.m);
  run.mu = theory.mu;
  run.mu_prime = theory.mu_prime;
  run.lambda0 = theory.lambda0;
  run.theory_error_equiv = theory.error_equiv;
  run.theory_inflation = theory.inflation;
  run.theory_error_single = theory.error_equiv + theory.inflation;
  run.theory_error_ensemble =
      theory.error_equiv + theory.inflation / run.k_ensemble;

  run.members.clear();
  Eigen::VectorXd avg = Eigen::VectorXd::Zero(p);
  double err_sum = 0.0;
  auto error_of = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd diff = x - run.x_ref;
    return run.phi.size() ? diff.dot(run.phi * diff) : diff.squaredNorm();
  };
  for (int k = 0; k < run.k_ensemble; ++k) {
    RidgeMember mem = ridge_member(run.l, run.b, run.sketch, run.m,
                                   mix_seed(run.seed, 0x51d6e, k + 1));
    Eigen::VectorXd x = ridge_member_solution(mem, run.lambda, n);
    err_sum += error_of(x);
    avg += x;
    run.members.push_back(std::move(x));
  }
  avg /= run.k_ensemble;
  run.ensemble_average = avg;
  run.empirical_error_single = err_sum / run.k_ensemble;
  run.empirical_error_ensemble = error_of(avg);
  return run;
}

RidgeSweep sketched_ridge_sweep(const Eigen::MatrixXd& l,
                                const Eigen::VectorXd& b,
                                const Eigen::VectorXd& x_ref, int m,
                                int k_ensemble, int ensembles,
                                const std::vector<double>& lambdas,
                                std::uint64_t seed, int threads) {
  const int n = static_cast<int>(l.rows());
  const int p = static_cast<int>(l.cols());
  if (ensembles < 1) throw ParameterError("ensembles must be >= 1");
  GramThin g = gram_thin(l, b);
  Eigen::VectorXd phi_diag = Eigen::VectorXd::Ones(g.rank);
  Eigen::MatrixXd no_phi;

  RidgeSweep sweep;
  sweep.rows.resize(lambdas.size());
  std::vector<RidgeTheory> theories(lambdas.size());
  for (std::size_t li = 0; li < lambdas.size(); ++li) {
    RidgeSweepRow& row = sweep.rows[li];
    row.lambda = lambdas[li];
    try {
      theories[li] = ridge_theory(g, phi_diag, no_phi, x_ref, lambdas[li], m);
      row.admissible = true;
      row.mu = theories[li].mu;
      row.mu_prime = theories[li].mu_prime;
      row.theory_equiv = theories[li].error_equiv;
      row.theory_single = theories[li].error_equiv + theories[li].inflation;
      row.theory_ensemble =
          theories[li].error_equiv + theories[li].inflation / k_ensemble;
      sweep.lambda0 = theories[li].lambda0;
    } catch (const DomainError& e) {
      row.admissible = false;
      sweep.lambda0 = e.boundary;
    }
  }

  // Per (ensemble, member): factor once, then sweep lambda.
  const int total = ensembles * k_ensemble;
  struct Slot {
    std::vector<double> err;               // per lambda
    std::vector<Eigen::VectorXd> x;        // per lambda
    bool failed = false;
  };
  std::vector<Slot> slots(total);
  int workers = threads > 0 ? threads
                            : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min(workers, total));
  std::atomic<int> next{0};
  auto work = [&]() {
    for (;;) {
      const int idx = next.fetch_add(1);
      if (idx >= total) return;
      Slot& slot = slots[idx];
      const int e = idx / k_ensemble;
      const int k = idx % k_ensemble;
      RidgeMember mem = ridge_member(l, b, SketchSpec{}, m,
                                     mix_seed(seed, 0x51d6e + e, k + 1));
      slot.err.assign(lambdas.size(), std::numeric_limits<double>::quiet_NaN());
      slot.x.assign(lambdas.size(), Eigen::VectorXd());
      for (std::size_t li = 0; li < lambdas.size(); ++li) {
        if (!sweep.rows[li].admissible) continue;
        try {
          Eigen::VectorXd x = ridge_member_solution(mem, lambdas[li], n);
          slot.err[li] = (x - x_ref).squaredNorm();
          slot.x[li] = std::move(x);
        } catch (const Error&) {
          slot.failed = true;
        }
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }

  for (std::size_t li = 0; li < lambdas.size(); ++li) {
    RidgeSweepRow& row = sweep.rows[li];
    if (!row.admissible) continue;
    double err_single = 0.0, err_ens = 0.0;
    long singles = 0;
    int good_ens = 0;
    row.member_errors.reserve(total);
    for (int e = 0; e < ensembles; ++e) {
      Eigen::VectorXd avg = Eigen::VectorXd::Zero(p);
      int good = 0;
      for (int k = 0; k < k_ensemble; ++k) {
        const Slot& slot = slots[e * k_ensemble + k];
        row.member_errors.push_back(slot.err[li]);
        if (std::isnan(slot.err[li])) continue;
        err_single += slot.err[li];
        singles += 1;
        avg += slot.x[li];
        good += 1;
      }
      if (good == k_ensemble) {
        avg /= good;
        err_ens += (avg - x_ref).squaredNorm();
        good_ens += 1;
      }
    }
    if (singles < static_cast<long>(0.9 * ensembles * k_ensemble) ||
        good_ens == 0)
      throw FailureBudgetError("too many failed ridge members in the sweep");
    row.empirical_single = err_single / singles;
    row.empirical_ensemble = err_ens / good_ens;
  }
  return sweep;
}

}  // namespace skeq
