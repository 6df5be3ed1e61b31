#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace skeq {

// Eigenvalue below rank_threshold() counts as exactly zero everywhere.
inline constexpr double kRankTol = 1e-10;

// Weighted eigenvalue multiset of a PSD matrix. The only input the analytic
// fixed-point solvers need. Immutable after construction.
class Spectrum {
 public:
  // Weights default to uniform; they are validated (> 0, sum 1 within 1e-12)
  // and renormalized to sum exactly 1. Eigenvalues must be >= 0 up to the
  // rank tolerance and are clamped to 0 below it.
  explicit Spectrum(std::vector<double> eigenvalues,
                    std::vector<double> weights = {});

  const std::vector<double>& eigenvalues() const { return eigenvalues_; }
  const std::vector<double>& weights() const { return weights_; }
  std::size_t size() const { return eigenvalues_.size(); }

  double max_eigenvalue() const { return max_eigenvalue_; }
  double rank_threshold() const;
  // Smallest eigenvalue above the rank threshold; +inf when none.
  double lambda_min_plus() const;
  // Sum w_i a_i = (1/p) tr[A].
  double mean() const { return mean_; }

  // Fraction of weight on eigenvalues above the rank threshold.
  double relative_rank() const { return relative_rank_; }

  // (1/p)-normalized resolvent trace functionals. Zero eigenvalues contribute
  // their mu->0 limits (0 for t1/t2); g_inv keeps the 1/mu pole.
  double t1(double mu) const;   // sum w a/(a+mu)
  double t2(double mu) const;   // sum w a^2/(a+mu)^2
  double g_inv(double mu) const;  // sum w/(a+mu)

  // sum w a/(a+mu)^2 = -d/dmu t1. Zero eigenvalues contribute 0.
  double resolvent2_a(double mu) const;
  // sum w psi/(a+mu)^2 for per-eigenvalue values psi aligned with this
  // spectrum. Zero eigenvalues DO contribute psi_i/mu^2.
  double resolvent2(std::span<const double> psi, double mu) const;

  // JSON object {"eigenvalues": [...], "weights": [...]} (weights optional).
  static Spectrum from_json(const std::string& text);
  static Spectrum load(const std::string& path);
  std::string to_json() const;
  void save(const std::string& path) const;

 private:
  void check_pole(double mu, bool include_zeros) const;

  std::vector<double> eigenvalues_;
  std::vector<double> weights_;
  double max_eigenvalue_ = 0.0;
  double mean_ = 0.0;
  double relative_rank_ = 0.0;
};

// Named spectra. Continuous laws realize as discrete quadrature spectra so
// every solver runs on one representation.
struct SpectrumPreset {
  enum class Kind { IsotropicRankDeficient, MarchenkoPastur, ExplicitList };

  Kind kind = Kind::ExplicitList;
  double r = 1.0;          // IsotropicRankDeficient: support fraction in (0,1]
  double ratio = 1.0;      // MarchenkoPastur: p/m > 0
  double scale = 1.0;      // MarchenkoPastur: optional eigenvalue rescaling
  int resolution = 2048;   // quadrature node count for continuous laws
  std::vector<double> eigenvalues;  // ExplicitList
  std::vector<double> weights;

  // "iso:r=0.5", "mp:ratio=0.2", "mp:ratio=2,scale=0.5,nodes=1024"
  static SpectrumPreset parse(const std::string& text);
  std::string to_string() const;
};

double relative_rank(const Spectrum& s);
Spectrum realize_preset(const SpectrumPreset& preset);

// Gauss-Legendre nodes/weights on [-1, 1].
void gauss_legendre(int n, std::vector<double>& nodes,
                    std::vector<double>& weights);

}  // namespace skeq
