#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "skeq/sketch.hpp"
#include "skeq/spectrum.hpp"

namespace skeq {

enum class Statistic {
  DiagElements,
  OffDiagElements,
  LambdaMinPlus,
  VTilde,
  SecondOrderDiag,
};

// Parameterizes a repeated-trial verification experiment.
struct ExperimentConfig {
  std::optional<Spectrum> spectrum;  // diagonal realization source
  SketchSpec sketch;                 // family template; dims/seed set per trial
  std::vector<int> p_grid;           // ascending
  double alpha = 0.8;
  double lambda = 1.0;

  enum class Psi { None, Identity, MatrixA };
  Psi psi = Psi::None;  // second-order test matrix selector

  int trials = 20;
  std::uint64_t seed = 0;
  Statistic statistic = Statistic::DiagElements;
  int threads = 0;  // 0: hardware concurrency
  double failure_budget = 0.10;
  int offdiag_samples_per_trial = 2000;  // CSV row cap for off-diagonals
  int fixed_bins = 0;                    // 0: Freedman-Diaconis

  // run_edge: sweep of p/n values; Sigma either sampled as (1/m) Y^T Y with
  // p/m = sigma_sample_ratio, or realized from `spectrum`.
  std::vector<double> pn_grid;
  double sigma_sample_ratio = -1.0;

  // run_sketch_zoo: one entry per sketch family; entry p of 0 inherits the
  // grid; labels default to the kind name.
  std::vector<SketchSpec> zoo;
  std::vector<std::string> zoo_labels;
};

struct Histogram {
  std::vector<double> edges;  // size counts.size() + 1
  std::vector<long> counts;
};

struct GroupStat {
  double eigenvalue = 0.0;  // cluster location (or NaN for scalar statistics)
  double theory = 0.0;      // reference value (mu-curve for zoo)
  double theory_alt = 0.0;  // orthogonal gamma-curve for zoo; NaN otherwise
  double mean = 0.0;
  double sd = 0.0;
  long count = 0;
};

// Everything measured at one grid point (one p, one p/n value, or one zoo
// family).
struct PointSummary {
  std::string label;
  int p = 0;
  double pn = 0.0;
  std::map<std::string, double> theory;
  std::vector<GroupStat> groups;
  double off_mean = 0.0, off_sd = 0.0;
  double mean_abs_dev = 0.0, max_abs_dev = 0.0;
  Histogram histogram;
  int trials = 0;
  int failed = 0;
  std::vector<std::string> errors;
};

struct CsvRow {
  int trial = 0;
  int p = 0;
  long entry = 0;
  double empirical = 0.0;
  double theoretical = 0.0;
  std::string label;  // zoo only
};

struct TrialReport {
  Statistic statistic = Statistic::DiagElements;
  double alpha = 0.0, lambda = 0.0;
  std::uint64_t seed = 0;
  std::vector<PointSummary> points;
  std::vector<CsvRow> rows;

  // Long format: trial,p,entry_index,empirical,theoretical[,label].
  void write_csv(std::ostream& out) const;
  std::string summary_json() const;
};

// Element concentration of the sketched pseudoinverse against 1/(a + mu).
TrialReport run_concentration(const ExperimentConfig& cfg);

// Second-order diagonal concentration against (psi + mu')/(a + mu)^2.
TrialReport run_second_order(const ExperimentConfig& cfg);

// Empirical smallest nonzero eigenvalue of (1/n) X^H X against z0, plus the
// naive product bound.
TrialReport run_edge(const ExperimentConfig& cfg);

// Diagonal histograms for a list of sketch families against both analytic
// references (i.i.d. mu-curve and orthogonal gamma-curve).
TrialReport run_sketch_zoo(const ExperimentConfig& cfg);

}  // namespace skeq
