// sketcheq: fixed-point solvers and Monte Carlo verification drivers for
// sketched regularized pseudoinverses.
//
// Subcommands: solve, sweep, edge, verify, zoo, project, ridge.
// Exit codes: 0 ok, 1 usage, 2 domain, 3 convergence, 4 failure budget.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "skeq/apps.hpp"
#include "skeq/equiv.hpp"
#include "skeq/errors.hpp"
#include "skeq/montecarlo.hpp"
#include "skeq/psd_matrix.hpp"
#include "skeq/rng.hpp"
#include "skeq/sketch.hpp"
#include "skeq/spectrum.hpp"

namespace {

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<double> parse_grid(const std::string& text) {
  // "a:b:n" -> n points from a to b inclusive; a bare number is one point.
  double a = 0, b = 0;
  int n = 0;
  if (std::sscanf(text.c_str(), "%lf:%lf:%d", &a, &b, &n) == 3) {
    if (n < 1) throw skeq::ParameterError("grid needs at least one point");
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i)
      out[i] = n == 1 ? a : a + (b - a) * i / static_cast<double>(n - 1);
    return out;
  }
  try {
    return {std::stod(text)};
  } catch (const std::exception&) {
    throw skeq::ParameterError("cannot parse grid: " + text);
  }
}

struct OutputSink {
  std::string path;  // empty: stdout

  void write(const std::string& text) const {
    if (path.empty()) {
      std::cout << text;
      return;
    }
    std::ofstream out(path);
    if (!out) throw skeq::ParameterError("cannot write output file: " + path);
    out << text;
  }
};

// Mutually exclusive spectrum sources.
struct SpectrumSource {
  std::string spectrum_file;
  std::string preset;
  std::string matrix_file;

  skeq::Spectrum load() const {
    const int given = !spectrum_file.empty() + !preset.empty() + !matrix_file.empty();
    if (given != 1)
      throw skeq::ParameterError(
          "exactly one of --spectrum, --preset, --matrix is required");
    if (!spectrum_file.empty()) return skeq::Spectrum::load(spectrum_file);
    if (!preset.empty())
      return skeq::realize_preset(skeq::SpectrumPreset::parse(preset));
    return skeq::PsdMatrix::load_csv(matrix_file).spectrum();
  }

  void attach(CLI::App* cmd) {
    cmd->add_option("--spectrum", spectrum_file, "spectrum JSON file");
    cmd->add_option("--preset", preset, "preset string, e.g. iso:r=0.5 or mp:ratio=0.2");
    cmd->add_option("--matrix", matrix_file, "PSD matrix CSV (p=<n> header)");
  }
};

std::vector<double> psi_values(const std::string& psi,
                               const skeq::Spectrum& s) {
  if (psi == "identity") return std::vector<double>(s.size(), 1.0);
  if (psi == "a")
    return std::vector<double>(s.eigenvalues().begin(), s.eigenvalues().end());
  throw skeq::ParameterError("--psi must be 'identity' or 'a'");
}

nlohmann::json solve_record(const skeq::Spectrum& s, double alpha,
                            double lambda, const std::string& psi,
                            bool want_gamma) {
  skeq::EquivalenceSolution sol = skeq::solve_mu(s, alpha, lambda);
  nlohmann::json j;
  j["mu"] = sol.mu;
  j["mu0"] = sol.mu0;
  j["lambda0"] = sol.lambda0;
  j["residual"] = sol.residual;
  j["iterations"] = sol.iterations;
  if (!psi.empty())
    j["mu_prime"] = skeq::solve_mu_prime(s, alpha, lambda, psi_values(psi, s));
  if (want_gamma)
    j["gamma"] = skeq::solve_gamma_orthogonal(s, alpha, lambda);
  return j;
}

int run_app(CLI::App& app, int argc, char** argv) {
  try {
    app.parse(argc, argv);
    return 0;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const skeq::DomainError& e) {
    std::cerr << "domain error: " << e.what() << "\n";
    return 2;
  } catch (const skeq::SingularError& e) {
    std::cerr << "domain error: " << e.what() << "\n";
    return 2;
  } catch (const skeq::FailureBudgetError& e) {
    std::cerr << "failure budget exceeded: " << e.what() << "\n";
    return 4;
  } catch (const skeq::ParameterError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const skeq::Error& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 3;
  }
}

void emit_report(const skeq::TrialReport& report, const OutputSink& sink,
                 const std::string& format, const std::string& summary_path) {
  if (format == "json") {
    sink.write(report.summary_json() + "\n");
  } else {
    std::ostringstream csv;
    report.write_csv(csv);
    sink.write(csv.str());
  }
  if (!summary_path.empty()) {
    std::ofstream out(summary_path);
    if (!out)
      throw skeq::ParameterError("cannot write summary file: " + summary_path);
    out << report.summary_json() << "\n";
  }
}

// Frozen p/n sweeps for the edge verification at p = 500 (kept inside the
// region where the 5% tolerance is meaningful; see tests).
std::vector<double> edge_grid_for_ratio(double ratio) {
  if (ratio < 0.5)
    return {0.05, 0.08, 0.11, 0.14, 0.18, 0.22, 0.26, 0.30, 0.35, 0.40};
  if (ratio < 2.0)
    return {0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09, 0.10, 0.12};
  return {0.02, 0.03, 0.045, 0.06, 0.075, 0.09, 0.105, 0.12, 0.135, 0.15};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sketched-pseudoinverse equivalents: solvers and verification"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags are accepted after the subcommand too

  std::uint64_t seed = 0;
  int threads = 0;
  std::string output;
  std::string format;  // solve defaults to json, table commands to csv
  std::string summary_path;
  app.add_option("--seed", seed, "global RNG seed")
      ->envname("SKETCH_EQUIV_SEED");
  app.add_option("--threads", threads, "worker cap (0 = hardware)");
  app.add_option("--output,-o", output, "output file (default stdout)");
  app.add_option("--format", format, "csv or json where applicable");
  app.add_option("--summary", summary_path, "write a JSON summary here");

  // ---- solve ----------------------------------------------------------
  auto* solve = app.add_subcommand("solve", "solve the fixed points at one point");
  auto solve_src = std::make_shared<SpectrumSource>();
  solve_src->attach(solve);
  auto solve_alpha = std::make_shared<double>(0.0);
  auto solve_lambda = std::make_shared<double>(0.0);
  auto solve_psi = std::make_shared<std::string>();
  auto solve_gamma = std::make_shared<bool>(false);
  solve->add_option("--alpha", *solve_alpha, "sketch aspect ratio q/p")->required();
  solve->add_option("--lambda", *solve_lambda, "sketch-side ridge level")->required();
  solve->add_option("--psi", *solve_psi, "also compute mu' for psi in {identity, a}");
  solve->add_flag("--gamma", *solve_gamma, "also compute the orthogonal-sketch gamma");
  solve->callback([&, solve_src, solve_alpha, solve_lambda, solve_psi, solve_gamma] {
    skeq::Spectrum s = solve_src->load();
    nlohmann::json j =
        solve_record(s, *solve_alpha, *solve_lambda, *solve_psi, *solve_gamma);
    if (format == "csv") {
      std::ostringstream csv;
      csv << "mu,mu0,lambda0";
      if (j.contains("mu_prime")) csv << ",mu_prime";
      if (j.contains("gamma")) csv << ",gamma";
      csv << "\n"
          << fmt17(j["mu"]) << ',' << fmt17(j["mu0"]) << ','
          << fmt17(j["lambda0"]);
      if (j.contains("mu_prime")) csv << ',' << fmt17(j["mu_prime"]);
      if (j.contains("gamma")) csv << ',' << fmt17(j["gamma"]);
      csv << "\n";
      OutputSink{output}.write(csv.str());
    } else {
      OutputSink{output}.write(j.dump(2) + "\n");
    }
  });

  // ---- sweep ----------------------------------------------------------
  auto* sweep = app.add_subcommand("sweep", "grid of (alpha, lambda) solves as CSV");
  auto sweep_src = std::make_shared<SpectrumSource>();
  sweep_src->attach(sweep);
  auto sweep_alphas = std::make_shared<std::string>();
  auto sweep_lambdas = std::make_shared<std::string>();
  auto sweep_psi = std::make_shared<std::string>();
  auto sweep_gamma = std::make_shared<bool>(false);
  sweep->add_option("--alphas", *sweep_alphas, "alpha grid a:b:n")->required();
  sweep->add_option("--lambdas", *sweep_lambdas, "lambda grid a:b:n")->required();
  sweep->add_option("--psi", *sweep_psi, "also sweep mu' for psi in {identity, a}");
  sweep->add_flag("--gamma", *sweep_gamma, "also sweep the orthogonal gamma");
  sweep->callback([&, sweep_src, sweep_alphas, sweep_lambdas, sweep_psi, sweep_gamma] {
    skeq::Spectrum s = sweep_src->load();
    std::vector<double> alphas = parse_grid(*sweep_alphas);
    std::vector<double> lambdas = parse_grid(*sweep_lambdas);
    std::ostringstream csv;
    csv << "alpha,lambda,mu,mu0,lambda0";
    if (!sweep_psi->empty()) csv << ",mu_prime";
    if (*sweep_gamma) csv << ",gamma";
    csv << ",status\n";
    int admissible = 0;
    for (double alpha : alphas) {
      for (double lambda : lambdas) {
        csv << fmt17(alpha) << ',' << fmt17(lambda) << ',';
        try {
          skeq::EquivalenceSolution sol = skeq::solve_mu(s, alpha, lambda);
          csv << fmt17(sol.mu) << ',' << fmt17(sol.mu0) << ','
              << fmt17(sol.lambda0);
          if (!sweep_psi->empty())
            csv << ','
                << fmt17(skeq::solve_mu_prime(s, alpha, lambda,
                                              psi_values(*sweep_psi, s)));
          if (*sweep_gamma)
            csv << ','
                << fmt17(skeq::solve_gamma_orthogonal(s, alpha, lambda));
          csv << ",ok\n";
          ++admissible;
        } catch (const skeq::DomainError& e) {
          csv << "nan,nan," << fmt17(e.boundary);
          if (!sweep_psi->empty()) csv << ",nan";
          if (*sweep_gamma) csv << ",nan";
          csv << ",inadmissible\n";
        }
      }
    }
    if (admissible == 0)
      throw skeq::DomainError("entire sweep grid is inadmissible");
    OutputSink{output}.write(csv.str());
  });

  // ---- edge -----------------------------------------------------------
  auto* edge = app.add_subcommand("edge", "smallest-nonzero-eigenvalue sweep");
  auto edge_sigma = std::make_shared<std::string>("mp:ratio=0.2");
  auto edge_spectrum = std::make_shared<std::string>();
  auto edge_p = std::make_shared<int>(500);
  auto edge_pn = std::make_shared<std::string>();
  auto edge_trials = std::make_shared<int>(1);
  auto edge_fig = std::make_shared<int>(0);
  edge->add_option("--sigma", *edge_sigma,
                   "mp:ratio=R (sampled Sigma) or any preset (explicit Sigma)");
  edge->add_option("--sigma-file", *edge_spectrum, "explicit Sigma spectrum JSON");
  edge->add_option("--p", *edge_p, "ambient dimension");
  edge->add_option("--pn-grid", *edge_pn, "p/n grid a:b:n");
  edge->add_option("--trials", *edge_trials, "trials per grid point");
  edge->add_option("--fig", *edge_fig, "1: pinned Fig-1 configuration");
  edge->callback([&, edge_sigma, edge_spectrum, edge_p, edge_pn, edge_trials, edge_fig] {
    skeq::ExperimentConfig cfg;
    cfg.seed = seed;
    cfg.threads = threads;
    cfg.trials = *edge_trials;
    cfg.p_grid = {*edge_p};
    if (!edge_spectrum->empty()) {
      cfg.spectrum = skeq::Spectrum::load(*edge_spectrum);
    } else {
      skeq::SpectrumPreset preset = skeq::SpectrumPreset::parse(*edge_sigma);
      if (preset.kind == skeq::SpectrumPreset::Kind::MarchenkoPastur)
        cfg.sigma_sample_ratio = preset.ratio;  // sample a finite-p Sigma
      else
        cfg.spectrum = skeq::realize_preset(preset);
    }
    if (*edge_fig == 1) {
      cfg.p_grid = {500};
      cfg.trials = 25;
      cfg.pn_grid = edge_grid_for_ratio(
          cfg.sigma_sample_ratio > 0 ? cfg.sigma_sample_ratio : 1.0);
    } else {
      if (edge_pn->empty())
        throw skeq::ParameterError("edge needs --pn-grid (or --fig 1)");
      cfg.pn_grid = parse_grid(*edge_pn);
    }
    emit_report(skeq::run_edge(cfg), OutputSink{output}, format, summary_path);
  });

  // ---- verify ---------------------------------------------------------
  auto* verify = app.add_subcommand("verify", "element concentration experiments");
  auto verify_src = std::make_shared<SpectrumSource>();
  verify_src->attach(verify);
  auto verify_fig = std::make_shared<int>(0);
  auto verify_pgrid = std::make_shared<std::string>("1500");
  auto verify_alpha = std::make_shared<double>(0.8);
  auto verify_lambda = std::make_shared<double>(1.0);
  auto verify_trials = std::make_shared<int>(20);
  auto verify_stat = std::make_shared<std::string>("diag");
  auto verify_psi = std::make_shared<std::string>("identity");
  auto verify_second = std::make_shared<bool>(false);
  verify->add_option("--fig", *verify_fig, "2 or 3: pinned figure configuration");
  verify->add_option("--p-grid", *verify_pgrid, "dimension grid a:b:n or value");
  verify->add_option("--alpha", *verify_alpha, "sketch aspect ratio");
  verify->add_option("--lambda", *verify_lambda, "ridge level");
  verify->add_option("--trials", *verify_trials, "trials per dimension");
  verify->add_option("--stat", *verify_stat, "diag | offdiag | vtilde");
  verify->add_option("--psi", *verify_psi, "identity | a (second order)");
  verify->add_flag("--second-order", *verify_second, "second-order statistic");
  verify->callback([&, verify_src, verify_fig, verify_pgrid, verify_alpha,
                    verify_lambda, verify_trials, verify_stat, verify_psi,
                    verify_second] {
    skeq::ExperimentConfig cfg;
    cfg.seed = seed;
    cfg.threads = threads;
    if (*verify_fig == 2 || *verify_fig == 3) {
      cfg.spectrum = skeq::Spectrum({0.0, 1.0, 2.0});
      cfg.p_grid = {60, 300, 1500};
      cfg.alpha = 0.8;
      cfg.lambda = 1.0;
      cfg.trials = 20;
      if (*verify_fig == 3) *verify_second = true;
    } else {
      cfg.spectrum = verify_src->load();
      cfg.alpha = *verify_alpha;
      cfg.lambda = *verify_lambda;
      cfg.trials = *verify_trials;
      for (double p : parse_grid(*verify_pgrid))
        cfg.p_grid.push_back(static_cast<int>(p));
    }
    if (*verify_stat == "offdiag") cfg.statistic = skeq::Statistic::OffDiagElements;
    if (*verify_stat == "vtilde") cfg.statistic = skeq::Statistic::VTilde;
    if (*verify_second) {
      cfg.psi = *verify_psi == "a" ? skeq::ExperimentConfig::Psi::MatrixA
                                   : skeq::ExperimentConfig::Psi::Identity;
      emit_report(skeq::run_second_order(cfg), OutputSink{output}, format, summary_path);
    } else {
      emit_report(skeq::run_concentration(cfg), OutputSink{output}, format, summary_path);
    }
  });

  // ---- zoo ------------------------------------------------------------
  auto* zoo = app.add_subcommand("zoo", "diagonal histograms for sketch families");
  auto zoo_src = std::make_shared<SpectrumSource>();
  zoo_src->attach(zoo);
  auto zoo_fig = std::make_shared<int>(0);
  auto zoo_kinds = std::make_shared<std::string>("iid-gaussian,haar-orthogonal");
  auto zoo_p = std::make_shared<int>(1500);
  auto zoo_alpha = std::make_shared<double>(0.8);
  auto zoo_lambda = std::make_shared<double>(1.0);
  auto zoo_trials = std::make_shared<int>(20);
  zoo->add_option("--fig", *zoo_fig, "7: pinned figure configuration");
  zoo->add_option("--kinds", *zoo_kinds, "comma-separated sketch kinds");
  zoo->add_option("--p", *zoo_p, "ambient dimension");
  zoo->add_option("--alpha", *zoo_alpha, "sketch aspect ratio");
  zoo->add_option("--lambda", *zoo_lambda, "ridge level");
  zoo->add_option("--trials", *zoo_trials, "trials per kind");
  zoo->callback([&, zoo_src, zoo_fig, zoo_kinds, zoo_p, zoo_alpha, zoo_lambda,
                 zoo_trials] {
    skeq::ExperimentConfig cfg;
    cfg.seed = seed;
    cfg.threads = threads;
    cfg.alpha = *zoo_alpha;
    cfg.lambda = *zoo_lambda;
    cfg.trials = *zoo_trials;
    cfg.p_grid = {*zoo_p};
    if (*zoo_fig == 7) {
      cfg.spectrum = skeq::Spectrum({0.0, 1.0, 2.0});
      cfg.alpha = 0.8;
      cfg.lambda = 1.0;
      cfg.trials = 20;
      cfg.p_grid = {1500};
      auto add = [&](skeq::SketchSpec::Kind k, int p, const std::string& label) {
        skeq::SketchSpec spec;
        spec.kind = k;
        spec.p = p;
        cfg.zoo.push_back(spec);
        cfg.zoo_labels.push_back(label);
      };
      add(skeq::SketchSpec::Kind::IidGaussian, 0, "iid-gaussian");
      add(skeq::SketchSpec::Kind::HaarOrthogonal, 0, "haar-orthogonal");
      add(skeq::SketchSpec::Kind::Srht, 1020, "srht-below-pow2");
      add(skeq::SketchSpec::Kind::Srht, 1026, "srht-above-pow2");
      add(skeq::SketchSpec::Kind::CountSketch, 0, "count-sketch");
      add(skeq::SketchSpec::Kind::Fjlt, 0, "fjlt");
      {
        // adaptive sketching: R = A realized at the zoo dimension
        skeq::SketchSpec spec;
        spec.kind = skeq::SketchSpec::Kind::NonIsotropic;
        spec.noniso_r = std::make_shared<skeq::PsdMatrix>(
            skeq::PsdMatrix::from_spectrum(*cfg.spectrum, 1500));
        spec.p = 1500;
        cfg.zoo.push_back(spec);
        cfg.zoo_labels.push_back("adaptive");
      }
    } else {
      cfg.spectrum = zoo_src->load();
      std::stringstream kinds(*zoo_kinds);
      for (std::string item; std::getline(kinds, item, ',');) {
        skeq::SketchSpec spec;
        spec.kind = skeq::SketchSpec::kind_from_name(item);
        if (spec.kind == skeq::SketchSpec::Kind::NonIsotropic)
          spec.noniso_r = std::make_shared<skeq::PsdMatrix>(
              skeq::PsdMatrix::from_spectrum(*cfg.spectrum, *zoo_p));
        cfg.zoo.push_back(spec);
        cfg.zoo_labels.push_back(item);
      }
    }
    emit_report(skeq::run_sketch_zoo(cfg), OutputSink{output}, format, summary_path);
  });

  // ---- project --------------------------------------------------------
  auto* project = app.add_subcommand("project", "sketch-and-project driver");
  auto proj_fig = std::make_shared<int>(0);
  auto proj_n = std::make_shared<int>(2000);
  auto proj_p = std::make_shared<int>(400);
  auto proj_ms = std::make_shared<std::string>();
  auto proj_eps = std::make_shared<double>(1e-3);
  auto proj_trials = std::make_shared<int>(5);
  auto proj_config = std::make_shared<std::string>();
  auto proj_timing = std::make_shared<bool>(false);
  project->add_option("--fig", *proj_fig, "5: pinned (desk-scaled) configuration");
  project->add_option("--n", *proj_n, "rows of L");
  project->add_option("--p", *proj_p, "columns of L");
  project->add_option("--m-grid", *proj_ms, "sketch sizes a:b:n");
  project->add_option("--eps", *proj_eps, "target on (1/n)||Lx-b||^2");
  project->add_option("--trials", *proj_trials, "trials per sketch size");
  project->add_option("--config", *proj_config, "run config as JSON");
  project->add_flag("--timing", *proj_timing,
                    "append wall-clock seconds (not byte-stable)");
  project->callback([&, proj_fig, proj_n, proj_p, proj_ms, proj_eps, proj_trials,
                     proj_config, proj_timing] {
    std::vector<double> ms;
    if (!proj_config->empty()) {
      std::ifstream in(*proj_config);
      if (!in) throw skeq::ParameterError("cannot open config: " + *proj_config);
      nlohmann::json j = nlohmann::json::parse(in);
      *proj_n = j.value("n", *proj_n);
      *proj_p = j.value("p", *proj_p);
      *proj_eps = j.value("eps", *proj_eps);
      *proj_trials = j.value("trials", *proj_trials);
      seed = j.value("seed", seed);
      if (j.contains("m_grid"))
        for (double m : j["m_grid"]) ms.push_back(m);
    }
    if (*proj_fig == 5) {
      *proj_n = 2000;
      *proj_p = 400;
      *proj_eps = 1e-3;
      *proj_trials = 5;
      ms = {50, 100, 200, 300, 350, 400, 500, 600};
    } else if (ms.empty()) {
      if (proj_ms->empty())
        throw skeq::ParameterError("project needs --m-grid (or --fig 5)");
      ms = parse_grid(*proj_ms);
    }
    skeq::Rng rng(skeq::mix_seed(seed, 0x9a07));
    Eigen::MatrixXd l(*proj_n, *proj_p);
    for (int i = 0; i < *proj_n; ++i)
      for (int j = 0; j < *proj_p; ++j) l(i, j) = rng.normal();
    Eigen::VectorXd xstar(*proj_p);
    for (int j = 0; j < *proj_p; ++j)
      xstar[j] = rng.normal() / std::sqrt(static_cast<double>(*proj_p));
    Eigen::VectorXd b = l * xstar;

    std::ostringstream csv;
    csv << "m,alpha,trial,iterations,t_eps,rho,mu,rel_computation_factor,"
           "final_residual";
    if (*proj_timing) csv << ",seconds";
    csv << "\n";
    for (double md : ms) {
      const int m = static_cast<int>(md);
      for (int t = 0; t < *proj_trials; ++t) {
        skeq::ProjectRun run;
        run.l = l;
        run.b = b;
        run.x0 = Eigen::VectorXd::Zero(*proj_p);
        run.sketch.kind = skeq::SketchSpec::Kind::SparseIid;
        run.m = m;
        run.eps = *proj_eps;
        run.seed = skeq::mix_seed(seed, 0x9a08 + m, t);
        run = skeq::sketch_and_project(std::move(run));
        csv << m << ',' << fmt17(static_cast<double>(m) / *proj_n) << ',' << t
            << ',' << run.iterations << ',' << run.t_eps << ','
            << fmt17(run.rho) << ',' << fmt17(run.mu) << ','
            << fmt17(run.rel_computation_factor) << ','
            << fmt17(run.residual_history.back());
        if (*proj_timing) csv << ',' << fmt17(run.wall_seconds);
        csv << "\n";
      }
    }
    OutputSink{output}.write(csv.str());
  });

  // ---- ridge ----------------------------------------------------------
  auto* ridge = app.add_subcommand("ridge", "sketched ridge regression driver");
  auto ridge_fig = std::make_shared<int>(0);
  auto ridge_n = std::make_shared<int>(2000);
  auto ridge_p = std::make_shared<int>(400);
  auto ridge_m = std::make_shared<int>(100);
  auto ridge_k = std::make_shared<int>(30);
  auto ridge_sigma = std::make_shared<double>(1.5);
  auto ridge_lambdas = std::make_shared<std::string>("-0.03:0.1:30");
  auto ridge_ensembles = std::make_shared<int>(1);
  auto ridge_config = std::make_shared<std::string>();
  ridge->add_option("--fig", *ridge_fig, "6: pinned configuration (choose --m)");
  ridge->add_option("--n", *ridge_n, "rows of L");
  ridge->add_option("--p", *ridge_p, "columns of L");
  ridge->add_option("--m", *ridge_m, "sketch size");
  ridge->add_option("--K", *ridge_k, "ensemble size");
  ridge->add_option("--sigma-noise", *ridge_sigma, "noise standard deviation");
  ridge->add_option("--lambdas", *ridge_lambdas, "lambda grid a:b:n");
  ridge->add_option("--ensembles", *ridge_ensembles, "independent K-ensembles");
  ridge->add_option("--config", *ridge_config, "run config as JSON");
  ridge->callback([&, ridge_fig, ridge_n, ridge_p, ridge_m, ridge_k, ridge_sigma,
                   ridge_lambdas, ridge_ensembles, ridge_config] {
    std::vector<double> lambdas;
    if (!ridge_config->empty()) {
      std::ifstream in(*ridge_config);
      if (!in) throw skeq::ParameterError("cannot open config: " + *ridge_config);
      nlohmann::json j = nlohmann::json::parse(in);
      *ridge_n = j.value("n", *ridge_n);
      *ridge_p = j.value("p", *ridge_p);
      *ridge_m = j.value("m", *ridge_m);
      *ridge_k = j.value("K", *ridge_k);
      *ridge_sigma = j.value("sigma_noise", *ridge_sigma);
      *ridge_ensembles = j.value("ensembles", *ridge_ensembles);
      seed = j.value("seed", seed);
      if (j.contains("lambdas"))
        for (double l : j["lambdas"]) lambdas.push_back(l);
    }
    if (*ridge_fig == 6) {
      *ridge_n = 2000;
      *ridge_p = 400;
      *ridge_k = 30;
      *ridge_sigma = 1.5;
      *ridge_ensembles = 6;
      lambdas = *ridge_m == 100
                    ? parse_grid("-0.6:0.1:30")
                    : parse_grid("0.015:0.1:30");
    } else if (lambdas.empty()) {
      lambdas = parse_grid(*ridge_lambdas);
    }
    skeq::Rng rng(skeq::mix_seed(seed, 0x91d6e));
    Eigen::MatrixXd l(*ridge_n, *ridge_p);
    for (int i = 0; i < *ridge_n; ++i)
      for (int j = 0; j < *ridge_p; ++j) l(i, j) = rng.normal();
    Eigen::VectorXd xstar(*ridge_p);
    for (int j = 0; j < *ridge_p; ++j)
      xstar[j] = rng.normal() / std::sqrt(static_cast<double>(*ridge_p));
    Eigen::VectorXd b = l * xstar;
    for (int i = 0; i < *ridge_n; ++i) b[i] += *ridge_sigma * rng.normal();

    skeq::RidgeSweep sweep = skeq::sketched_ridge_sweep(
        l, b, xstar, *ridge_m, *ridge_k, *ridge_ensembles, lambdas,
        skeq::mix_seed(seed, 0x91d6f), threads);

    std::ostringstream csv;
    csv << "lambda,member,empirical_error,theory_error_single,"
           "theory_error_ensemble\n";
    for (const skeq::RidgeSweepRow& row : sweep.rows) {
      if (!row.admissible) {
        csv << fmt17(row.lambda) << ",skipped,nan,nan,nan\n";
        continue;
      }
      for (std::size_t k = 0; k < row.member_errors.size(); ++k)
        csv << fmt17(row.lambda) << ',' << k << ','
            << fmt17(row.member_errors[k]) << ',' << fmt17(row.theory_single)
            << ',' << fmt17(row.theory_ensemble) << "\n";
      csv << fmt17(row.lambda) << ",ensemble-average,"
          << fmt17(row.empirical_ensemble) << ',' << fmt17(row.theory_single)
          << ',' << fmt17(row.theory_ensemble) << "\n";
    }
    OutputSink{output}.write(csv.str());
    if (!summary_path.empty()) {
      nlohmann::json j;
      j["lambda0"] = sweep.lambda0;
      j["rows"] = nlohmann::json::array();
      for (const skeq::RidgeSweepRow& row : sweep.rows) {
        nlohmann::json jr;
        jr["lambda"] = row.lambda;
        jr["admissible"] = row.admissible;
        jr["mu"] = row.mu;
        jr["mu_prime"] = row.mu_prime;
        jr["empirical_single"] = row.empirical_single;
        jr["empirical_ensemble"] = row.empirical_ensemble;
        jr["theory_single"] = row.theory_single;
        jr["theory_ensemble"] = row.theory_ensemble;
        j["rows"].push_back(jr);
      }
      std::ofstream out(summary_path);
      out << j.dump(2) << "\n";
    }
  });

  return run_app(app, argc, argv);
}
