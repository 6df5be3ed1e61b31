#pragma once

#include <string>

#include <Eigen/Dense>

#include "skeq/spectrum.hpp"

namespace skeq {

// Dense symmetric PSD matrix with a cached eigendecomposition. Symmetry is
// required within 1e-10 * ||.||; eigenvalues below -1e-10 * ||.|| are an
// error, small negatives are clamped to 0. Diagonal construction skips the
// O(p^3) solve.
class PsdMatrix {
 public:
  explicit PsdMatrix(Eigen::MatrixXd m);
  static PsdMatrix diagonal(Eigen::VectorXd values);
  // Diagonal realization of a spectrum at dimension p; multiplicities by
  // largest remainder so counts sum to exactly p.
  static PsdMatrix from_spectrum(const Spectrum& s, int p);

  // Row-major CSV with a one-line header "p=<n>".
  static PsdMatrix load_csv(const std::string& path);
  void save_csv(const std::string& path) const;

  int dim() const { return static_cast<int>(matrix_.rows()); }
  const Eigen::MatrixXd& matrix() const { return matrix_; }
  bool is_diagonal() const { return diagonal_; }

  // Ascending, clamped to >= 0.
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  // Orthonormal columns aligned with eigenvalues().
  const Eigen::MatrixXd& eigenvectors() const { return eigenvectors_; }

  Spectrum spectrum() const;  // uniform weights 1/p
  double lambda_min_plus() const;
  double operator_norm() const;
  double rank_threshold() const;

  Eigen::MatrixXd sqrt() const;                 // A^{1/2}
  Eigen::MatrixXd resolvent(double mu) const;   // (A + mu I)^{-1}
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;  // A * x

 private:
  PsdMatrix() = default;

  Eigen::MatrixXd matrix_;
  Eigen::VectorXd eigenvalues_;
  Eigen::MatrixXd eigenvectors_;
  bool diagonal_ = false;
};

}  // namespace skeq
