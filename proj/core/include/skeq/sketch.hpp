#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include <Eigen/Dense>

#include "skeq/psd_matrix.hpp"

namespace skeq {

// Description of a sketch family plus its parameters. All families are
// normalized so E[S S^H] = I_p (exact column orthogonality for Haar/SRHT).
struct SketchSpec {
  enum class Kind {
    IidGaussian,
    SparseIid,
    HaarOrthogonal,
    Srht,
    CountSketch,
    Fjlt,
    NonIsotropic,
  };

  Kind kind = Kind::IidGaussian;
  int p = 0;
  int q = 0;
  std::uint64_t seed = 0;
  // SparseIid: nonzero probability; defaults to q/p when < 0 (O(q^2) nonzeros).
  double density = -1.0;
  // Srht: zero-pad to the next power of two; pad = false requires p to be a
  // power of two already.
  bool pad = true;
  // NonIsotropic: S~ = R^{1/2} S_base.
  std::shared_ptr<const PsdMatrix> noniso_r;
  std::shared_ptr<const SketchSpec> base;

  SketchSpec with_dims(int p_, int q_) const;
  SketchSpec with_seed(std::uint64_t seed_) const;

  std::string to_json() const;
  static SketchSpec from_json(const std::string& text);

  static std::string kind_name(Kind k);
  static Kind kind_from_name(const std::string& name);
};

// Draws the sketch. Deterministic: identical spec (including seed) gives a
// bit-identical matrix.
Eigen::MatrixXd generate_sketch(const SketchSpec& spec);

// S (S^H A S + lambda I)^-1 S^H, evaluated exactly at finite p. lambda = 0
// uses the Moore-Penrose inverse of S^H A S with a 1e-10 relative rank
// threshold; lambda != 0 inverts with a condition-number guard of 1e14.
struct SketchedResolvent {
  Eigen::MatrixXd matrix;  // p x p, symmetric
  double lambda = 0.0;
};

SketchedResolvent sketched_pseudoinverse(const PsdMatrix& a,
                                         const Eigen::MatrixXd& s,
                                         double lambda);

// A^{1/2} S (S^H A S + lambda I)^-1 S^H. Finite for lambda = 0 even when
// q > rank(A).
Eigen::MatrixXd half_sketched_pseudoinverse(const PsdMatrix& a,
                                            const Eigen::MatrixXd& s,
                                            double lambda);

// Second-order sandwich S K S^H Psi S K S^H together with its analytic
// companion (A + mu I)^-1 (Psi + mu' I)(A + mu I)^-1. The general-Psi
// inflation routes through the eigenbasis of A. At mu = 0 (lambda = 0 with
// q >= rank) the companion uses the Moore-Penrose resolvent and the joint
// limit of mu'.
struct SecondOrderForm {
  Eigen::MatrixXd empirical;
  Eigen::MatrixXd theory;
  double mu = 0.0;
  double mu_prime = 0.0;
};

SecondOrderForm second_order_form(const PsdMatrix& a, const Eigen::MatrixXd& s,
                                  double lambda, const PsdMatrix& psi);

// Smallest eigenvalue above the rank threshold; +inf for the zero matrix.
double empirical_lambda_min_plus(const Eigen::MatrixXd& sym);

// (1/q) tr[(S^H A S + lambda I)^-1]; 1/v~ estimates mu.
double empirical_v_tilde(const PsdMatrix& a, const Eigen::MatrixXd& s,
                         double lambda);

// Inner inverse (S^H A S + lambda I)^-1 shared by the operations above.
Eigen::MatrixXd sketched_inner_inverse(const PsdMatrix& a,
                                       const Eigen::MatrixXd& s, double lambda);

}  // namespace skeq
