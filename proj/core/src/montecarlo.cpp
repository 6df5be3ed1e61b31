#include "skeq/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "skeq/equiv.hpp"
#include "skeq/errors.hpp"
#include "skeq/rng.hpp"

namespace skeq {

namespace {

void check_config(const ExperimentConfig& cfg) {
  if (cfg.trials < 1) throw ParameterError("trials must be >= 1");
  if (!std::is_sorted(cfg.p_grid.begin(), cfg.p_grid.end()))
    throw ParameterError("p grid must be ascending");
  if (!(cfg.failure_budget >= 0.0 && cfg.failure_budget < 1.0))
    throw ParameterError("failure budget must lie in [0, 1)");
}

int worker_count(const ExperimentConfig& cfg) {
  int n = cfg.threads > 0
              ? cfg.threads
              : static_cast<int>(std::thread::hardware_concurrency());
  return std::max(1, std::min(n, cfg.trials));
}

// Runs fn(trial) on a small pool; results land in per-trial slots so the
// aggregate is independent of scheduling.
void parallel_trials(int trials, int workers,
                     const std::function<void(int)>& fn) {
  if (workers <= 1) {
    for (int t = 0; t < trials; ++t) fn(t);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (;;) {
        int t = next.fetch_add(1);
        if (t >= trials) return;
        fn(t);
      }
    });
  for (auto& th : pool) th.join();
}

// Realized diagonal values and the cluster structure of a spectrum at p.
struct Realization {
  Eigen::VectorXd diag;
  Spectrum spectrum;
  std::vector<double> cluster_values;        // ascending unique eigenvalues
  std::vector<std::vector<int>> cluster_idx; // indices into diag per cluster
};

Realization realize(const Spectrum& source, int p) {
  PsdMatrix a = PsdMatrix::from_spectrum(source, p);
  Realization out{a.matrix().diagonal(), a.spectrum(), {}, {}};
  const double tol = 1e-9 * std::max(1.0, out.spectrum.max_eigenvalue());
  std::vector<double> sorted(out.diag.data(), out.diag.data() + p);
  std::sort(sorted.begin(), sorted.end());
  for (double v : sorted)
    if (out.cluster_values.empty() || v > out.cluster_values.back() + tol)
      out.cluster_values.push_back(v);
  out.cluster_idx.resize(out.cluster_values.size());
  for (int i = 0; i < p; ++i) {
    auto it = std::lower_bound(out.cluster_values.begin(),
                               out.cluster_values.end(), out.diag[i] - tol);
    out.cluster_idx[it - out.cluster_values.begin()].push_back(i);
  }
  return out;
}

Histogram make_histogram(std::vector<double> samples, int fixed_bins) {
  Histogram h;
  if (samples.size() < 2) return h;
  std::sort(samples.begin(), samples.end());
  const double lo = samples.front(), hi = samples.back();
  if (!(hi > lo)) return h;
  int bins = fixed_bins;
  if (bins <= 0) {
    // Freedman-Diaconis width 2*IQR*n^(-1/3)
    const double q1 = samples[samples.size() / 4];
    const double q3 = samples[(samples.size() * 3) / 4];
    const double width =
        2.0 * (q3 - q1) / std::cbrt(static_cast<double>(samples.size()));
    bins = width > 0.0 ? static_cast<int>(std::ceil((hi - lo) / width)) : 64;
    bins = std::clamp(bins, 8, 512);
  }
  h.edges.resize(bins + 1);
  h.counts.assign(bins, 0);
  for (int b = 0; b <= bins; ++b)
    h.edges[b] = lo + (hi - lo) * b / static_cast<double>(bins);
  for (double v : samples) {
    int b = std::min<int>(static_cast<int>((v - lo) / (hi - lo) * bins),
                          bins - 1);
    h.counts[b] += 1;
  }
  return h;
}

struct Accumulator {
  std::vector<double> group_sum, group_sumsq;
  std::vector<long> group_n;
  double off_sum = 0.0, off_sumsq = 0.0;
  long off_n = 0;
  double dev_sum = 0.0, dev_max = 0.0;
  long dev_n = 0;
  std::vector<double> hist_samples;
  std::vector<CsvRow> rows;
  bool failed = false;
  std::string error;
};

void reduce_point(PointSummary& point, std::vector<Accumulator>& slots,
                  const ExperimentConfig& cfg, TrialReport& report) {
  std::size_t ngroups = 0;
  for (const auto& acc : slots)
    if (!acc.failed) ngroups = std::max(ngroups, acc.group_sum.size());
  std::vector<double> sum(ngroups, 0.0), sumsq(ngroups, 0.0);
  std::vector<long> n(ngroups, 0);
  double off_sum = 0, off_sumsq = 0;
  long off_n = 0;
  double dev_sum = 0, dev_max = 0;
  long dev_n = 0;
  std::vector<double> hist;
  for (auto& acc : slots) {
    if (acc.failed) {
      point.failed += 1;
      if (point.errors.size() < 5) point.errors.push_back(acc.error);
      continue;
    }
    for (std::size_t g = 0; g < acc.group_sum.size(); ++g) {
      sum[g] += acc.group_sum[g];
      sumsq[g] += acc.group_sumsq[g];
      n[g] += acc.group_n[g];
    }
    off_sum += acc.off_sum;
    off_sumsq += acc.off_sumsq;
    off_n += acc.off_n;
    dev_sum += acc.dev_sum;
    dev_max = std::max(dev_max, acc.dev_max);
    dev_n += acc.dev_n;
    hist.insert(hist.end(), acc.hist_samples.begin(), acc.hist_samples.end());
    report.rows.insert(report.rows.end(), acc.rows.begin(), acc.rows.end());
  }
  point.trials = cfg.trials;
  for (std::size_t g = 0; g < ngroups && g < point.groups.size(); ++g) {
    if (n[g] == 0) continue;
    point.groups[g].count = n[g];
    point.groups[g].mean = sum[g] / n[g];
    const double var = sumsq[g] / n[g] - point.groups[g].mean * point.groups[g].mean;
    point.groups[g].sd = var > 0.0 ? std::sqrt(var) : 0.0;
  }
  if (off_n > 0) {
    point.off_mean = off_sum / off_n;
    const double var = off_sumsq / off_n - point.off_mean * point.off_mean;
    point.off_sd = var > 0.0 ? std::sqrt(var) : 0.0;
  }
  if (dev_n > 0) {
    point.mean_abs_dev = dev_sum / dev_n;
    point.max_abs_dev = dev_max;
  }
  point.histogram = make_histogram(std::move(hist), cfg.fixed_bins);
  if (point.failed > cfg.failure_budget * cfg.trials) {
    std::ostringstream msg;
    msg << point.failed << "/" << cfg.trials << " trials failed at "
        << point.label;
    if (!point.errors.empty()) msg << " (first: " << point.errors.front() << ")";
    throw FailureBudgetError(msg.str());
  }
}

// Shared element-statistics driver for run_concentration, run_second_order
// and run_sketch_zoo.
PointSummary element_point(const ExperimentConfig& cfg, TrialReport& report,
                           const SketchSpec& family, const std::string& label,
                           int p, bool second_order) {
  if (!cfg.spectrum) throw ParameterError("experiment needs a spectrum source");
  Realization real = realize(*cfg.spectrum, p);
  const int q = std::max(1, static_cast<int>(std::floor(cfg.alpha * p)));
  const double alpha_eff = static_cast<double>(q) / p;
  PsdMatrix a = PsdMatrix::diagonal(real.diag);

  EquivalenceSolution sol = solve_mu(real.spectrum, alpha_eff, cfg.lambda);
  PointSummary point;
  point.label = label;
  point.p = p;
  point.theory["mu"] = sol.mu;
  point.theory["mu0"] = sol.mu0;
  point.theory["lambda0"] = sol.lambda0;

  double mu_prime = std::numeric_limits<double>::quiet_NaN();
  if (second_order) {
    const auto& ev = real.spectrum.eigenvalues();
    std::vector<double> psi(ev.size(), 1.0);
    if (cfg.psi == ExperimentConfig::Psi::MatrixA)
      psi.assign(ev.begin(), ev.end());
    mu_prime = solve_mu_prime(real.spectrum, alpha_eff, cfg.lambda, psi);
    point.theory["mu_prime"] = mu_prime;
  }

  double gamma = std::numeric_limits<double>::quiet_NaN();
  if (cfg.lambda > 0.0 && alpha_eff <= 1.0) {
    gamma = solve_gamma_orthogonal(real.spectrum, alpha_eff, cfg.lambda);
    point.theory["gamma"] = gamma;
  }

  auto diag_theory = [&](double a_val) {
    if (!second_order) return 1.0 / (a_val + sol.mu);
    const double psi_val =
        cfg.psi == ExperimentConfig::Psi::MatrixA ? a_val : 1.0;
    const double d = a_val + sol.mu;
    return (psi_val + mu_prime) / (d * d);
  };
  for (double v : real.cluster_values) {
    GroupStat g;
    g.eigenvalue = v;
    g.theory = diag_theory(v);
    g.theory_alt = std::isnan(gamma) || second_order
                       ? std::numeric_limits<double>::quiet_NaN()
                       : 1.0 / (v + gamma);
    point.groups.push_back(g);
  }

  std::vector<Accumulator> slots(cfg.trials);
  PsdMatrix psi_mat =
      cfg.psi == ExperimentConfig::Psi::MatrixA
          ? PsdMatrix::diagonal(real.diag)
          : PsdMatrix::diagonal(Eigen::VectorXd::Ones(p));

  parallel_trials(cfg.trials, worker_count(cfg), [&](int t) {
    Accumulator& acc = slots[t];
    try {
      SketchSpec spec = family.with_dims(p, q).with_seed(
          mix_seed(cfg.seed, static_cast<std::uint64_t>(p), t + 1));
      Eigen::MatrixXd s = generate_sketch(spec);
      Eigen::MatrixXd k = sketched_inner_inverse(a, s, cfg.lambda);
      Eigen::MatrixXd r;
      if (second_order) {
        Eigen::MatrixXd tmid = s.transpose() * psi_mat.apply(s);
        r = s * (k * (0.5 * (tmid + tmid.transpose())) * k) * s.transpose();
      } else {
        r = s * k * s.transpose();
      }
      if (cfg.statistic == Statistic::VTilde) {
        // trace of the inner inverse; 1/v~ estimates mu
        const double vt = k.trace() / q;
        acc.rows.push_back({t, p, 0, vt, 1.0 / sol.mu, label});
        acc.hist_samples.push_back(vt);
      }

      const bool element_rows = cfg.statistic == Statistic::DiagElements ||
                                cfg.statistic == Statistic::SecondOrderDiag;
      acc.group_sum.assign(real.cluster_values.size(), 0.0);
      acc.group_sumsq.assign(real.cluster_values.size(), 0.0);
      acc.group_n.assign(real.cluster_values.size(), 0);
      for (std::size_t g = 0; g < real.cluster_idx.size(); ++g) {
        const double th = diag_theory(real.cluster_values[g]);
        for (int i : real.cluster_idx[g]) {
          const double v = r(i, i);
          acc.group_sum[g] += v;
          acc.group_sumsq[g] += v * v;
          acc.group_n[g] += 1;
          acc.dev_sum += std::abs(v - th);
          acc.dev_max = std::max(acc.dev_max, std::abs(v - th));
          acc.dev_n += 1;
          if (element_rows) {
            acc.hist_samples.push_back(v);
            acc.rows.push_back({t, p, i, v, th, label});
          }
        }
      }
      const double trace = r.trace();
      const double diag_sq = r.diagonal().squaredNorm();
      acc.off_sum = r.sum() - trace;
      acc.off_sumsq = r.squaredNorm() - diag_sq;
      acc.off_n = static_cast<long>(p) * p - p;
      if (cfg.statistic == Statistic::OffDiagElements && p > 1) {
        Rng rng = Rng::stream(cfg.seed, 0x0ffd1a6, t + 1);
        for (int draw = 0; draw < cfg.offdiag_samples_per_trial; ++draw) {
          int i, j;
          do {
            i = static_cast<int>(rng.below(p));
            j = static_cast<int>(rng.below(p));
          } while (i == j);
          acc.hist_samples.push_back(r(i, j));
          acc.rows.push_back(
              {t, p, static_cast<long>(i) * p + j, r(i, j), 0.0, label});
        }
      }
    } catch (const Error& e) {
      acc.failed = true;
      acc.error = e.what();
    }
  });
  reduce_point(point, slots, cfg, report);
  return point;
}

}  // namespace

TrialReport run_concentration(const ExperimentConfig& cfg) {
  check_config(cfg);
  TrialReport report{cfg.statistic, cfg.alpha, cfg.lambda, cfg.seed, {}, {}};
  for (int p : cfg.p_grid)
    report.points.push_back(element_point(cfg, report, cfg.sketch,
                                          "p=" + std::to_string(p), p,
                                          /*second_order=*/false));
  return report;
}

TrialReport run_second_order(const ExperimentConfig& cfg) {
  check_config(cfg);
  ExperimentConfig local = cfg;
  if (local.psi == ExperimentConfig::Psi::None)
    local.psi = ExperimentConfig::Psi::Identity;
  local.statistic = Statistic::SecondOrderDiag;
  TrialReport report{local.statistic, local.alpha, local.lambda, local.seed,
                     {}, {}};
  for (int p : local.p_grid)
    report.points.push_back(element_point(local, report, local.sketch,
                                          "p=" + std::to_string(p), p,
                                          /*second_order=*/true));
  return report;
}

TrialReport run_edge(const ExperimentConfig& cfg) {
  check_config(cfg);
  if (cfg.p_grid.size() != 1)
    throw ParameterError("edge experiment expects a single p");
  if (cfg.pn_grid.empty()) throw ParameterError("edge experiment needs a p/n grid");
  const int p = cfg.p_grid[0];

  TrialReport report{Statistic::LambdaMinPlus, 0.0, 0.0, cfg.seed, {}, {}};

  Eigen::MatrixXd sigma_half;
  Spectrum sigma_spec({1.0});
  int m_rows = 0;
  if (cfg.sigma_sample_ratio > 0.0) {
    m_rows = std::max(1, static_cast<int>(std::llround(p / cfg.sigma_sample_ratio)));
    Rng rng = Rng::stream(cfg.seed, 0x51 /*sigma*/, 0);
    Eigen::MatrixXd y(m_rows, p);
    for (int i = 0; i < m_rows; ++i)
      for (int j = 0; j < p; ++j) y(i, j) = rng.normal();
    PsdMatrix sigma(Eigen::MatrixXd(y.transpose() * y / double(m_rows)));
    sigma_half = sigma.sqrt();
    sigma_spec = sigma.spectrum();
  } else {
    if (!cfg.spectrum) throw ParameterError("edge experiment needs a Sigma source");
    Realization real = realize(*cfg.spectrum, p);
    sigma_half = real.diag.cwiseSqrt().asDiagonal();
    sigma_spec = real.spectrum;
  }

  for (std::size_t pi = 0; pi < cfg.pn_grid.size(); ++pi) {
    const double pn = cfg.pn_grid[pi];
    if (!(pn > 0.0)) throw ParameterError("p/n values must be positive");
    const int n = std::max(1, static_cast<int>(std::llround(p / pn)));
    const double gamma_eff = static_cast<double>(p) / n;
    EdgeSolution edge = solve_edge(sigma_spec, gamma_eff);

    PointSummary point;
    {
      std::ostringstream lbl;
      lbl << "pn=" << pn;
      point.label = lbl.str();
    }
    point.p = p;
    point.pn = pn;
    point.theory["z0"] = edge.z0;
    point.theory["zeta0"] = edge.zeta0;
    point.theory["n"] = n;
    double naive = 0.0;
    if (cfg.sigma_sample_ratio > 0.0 && p < std::max(m_rows, n)) {
      auto factor = [](double ratio) {
        const double s = 1.0 - std::sqrt(ratio);
        return ratio < 1.0 ? s * s : 0.0;
      };
      naive = factor(static_cast<double>(p) / m_rows) *
              factor(static_cast<double>(p) / n);
    }
    point.theory["naive_bound"] = naive;
    GroupStat g;
    g.eigenvalue = std::numeric_limits<double>::quiet_NaN();
    g.theory = edge.z0;
    g.theory_alt = naive;
    point.groups.push_back(g);

    std::vector<Accumulator> slots(cfg.trials);
    parallel_trials(cfg.trials, worker_count(cfg), [&](int t) {
      Accumulator& acc = slots[t];
      try {
        Rng rng = Rng::stream(cfg.seed, 0xed6e + pi, t + 1);
        Eigen::MatrixXd gram;
        if (n >= p) {
          // Bartlett factor of the Wishart part: X^T X/n == (Sigma^1/2 T)
          // (Sigma^1/2 T)^T / n in distribution.
          Eigen::MatrixXd tmat = Eigen::MatrixXd::Zero(p, p);
          for (int i = 0; i < p; ++i) {
            tmat(i, i) = std::sqrt(rng.chi_squared(n - i));
            for (int j = 0; j < i; ++j) tmat(i, j) = rng.normal();
          }
          Eigen::MatrixXd m = sigma_half * tmat;
          gram = m * m.transpose() / double(n);
        } else {
          // n < p: the n x n Gram (1/n) X X^H shares the nonzero spectrum.
          Eigen::MatrixXd z(n, p);
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < p; ++j) z(i, j) = rng.normal();
          Eigen::MatrixXd x = z * sigma_half;
          gram = x * x.transpose() / double(n);
        }
        const double emp = empirical_lambda_min_plus(gram);
        acc.group_sum.assign(1, emp);
        acc.group_sumsq.assign(1, emp * emp);
        acc.group_n.assign(1, 1);
        acc.dev_sum = std::abs(emp - edge.z0);
        acc.dev_max = acc.dev_sum;
        acc.dev_n = 1;
        acc.hist_samples.push_back(emp);
        acc.rows.push_back({t, p, static_cast<long>(pi), emp, edge.z0, point.label});
      } catch (const Error& e) {
        acc.failed = true;
        acc.error = e.what();
      }
    });
    reduce_point(point, slots, cfg, report);
    report.points.push_back(std::move(point));
  }
  return report;
}

TrialReport run_sketch_zoo(const ExperimentConfig& cfg) {
  check_config(cfg);
  if (cfg.zoo.empty()) throw ParameterError("zoo experiment needs sketch kinds");
  TrialReport report{cfg.statistic, cfg.alpha, cfg.lambda, cfg.seed, {}, {}};
  for (std::size_t k = 0; k < cfg.zoo.size(); ++k) {
    const SketchSpec& family = cfg.zoo[k];
    const int p = family.p > 0 ? family.p
                               : (cfg.p_grid.empty() ? 0 : cfg.p_grid.back());
    if (p <= 0) throw ParameterError("zoo entry needs a dimension");
    const std::string label = k < cfg.zoo_labels.size()
                                  ? cfg.zoo_labels[k]
                                  : SketchSpec::kind_name(family.kind);
    report.points.push_back(
        element_point(cfg, report, family, label, p, /*second_order=*/false));
  }
  return report;
}

void TrialReport::write_csv(std::ostream& out) const {
  const bool labeled = !rows.empty() && !rows.front().label.empty() &&
                       points.size() > 1 && statistic != Statistic::LambdaMinPlus;
  out << "trial,p,entry_index,empirical,theoretical";
  if (labeled) out << ",label";
  out << "\n";
  char buf[32];
  for (const CsvRow& r : rows) {
    out << r.trial << ',' << r.p << ',' << r.entry << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", r.empirical);
    out << buf << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", r.theoretical);
    out << buf;
    if (labeled) out << ',' << r.label;
    out << "\n";
  }
}

std::string TrialReport::summary_json() const {
  nlohmann::json j;
  j["alpha"] = alpha;
  j["lambda"] = lambda;
  j["seed"] = seed;
  j["points"] = nlohmann::json::array();
  for (const PointSummary& pt : points) {
    nlohmann::json jp;
    jp["label"] = pt.label;
    jp["p"] = pt.p;
    if (pt.pn > 0.0) jp["pn"] = pt.pn;
    jp["theory"] = pt.theory;
    jp["off_diag_mean"] = pt.off_mean;
    jp["off_diag_sd"] = pt.off_sd;
    jp["mean_abs_dev"] = pt.mean_abs_dev;
    jp["max_abs_dev"] = pt.max_abs_dev;
    jp["trials"] = pt.trials;
    jp["failed_trials"] = pt.failed;
    if (!pt.errors.empty()) jp["trial_errors"] = pt.errors;
    jp["groups"] = nlohmann::json::array();
    for (const GroupStat& g : pt.groups) {
      nlohmann::json jg;
      if (!std::isnan(g.eigenvalue)) jg["eigenvalue"] = g.eigenvalue;
      jg["theory"] = g.theory;
      if (!std::isnan(g.theory_alt)) jg["theory_gamma"] = g.theory_alt;
      jg["mean"] = g.mean;
      jg["sd"] = g.sd;
      jg["count"] = g.count;
      jp["groups"].push_back(jg);
    }
    if (!pt.histogram.counts.empty()) {
      jp["histogram"]["edges"] = pt.histogram.edges;
      jp["histogram"]["counts"] = pt.histogram.counts;
    }
    j["points"].push_back(jp);
  }
  return j.dump(2);
}

}  // namespace skeq
