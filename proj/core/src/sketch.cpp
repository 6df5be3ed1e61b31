#include "skeq/sketch.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <nlohmann/json.hpp>

#include "skeq/equiv.hpp"
#include "skeq/errors.hpp"
#include "skeq/rng.hpp"

namespace skeq {

namespace {

void check_dims(const SketchSpec& spec) {
  if (spec.p < 1 || spec.q < 1)
    throw ParameterError("sketch dimensions must be positive");
}

Eigen::MatrixXd iid_gaussian(const SketchSpec& spec) {
  Rng rng(spec.seed);
  Eigen::MatrixXd s(spec.p, spec.q);
  const double sd = 1.0 / std::sqrt(static_cast<double>(spec.q));
  for (int i = 0; i < spec.p; ++i)
    for (int j = 0; j < spec.q; ++j) s(i, j) = sd * rng.normal();
  return s;
}

Eigen::MatrixXd sparse_iid(const SketchSpec& spec) {
  double density = spec.density;
  if (density < 0.0)
    density = static_cast<double>(spec.q) / static_cast<double>(spec.p);
  if (!(density > 0.0) || density > 1.0)
    throw ParameterError("sparse sketch density must be in (0, 1]");
  Rng rng(spec.seed);
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(spec.p, spec.q);
  // Nonzero variance 1/(density q) keeps E[S S^H] = I.
  const double sd = 1.0 / std::sqrt(density * spec.q);
  for (int i = 0; i < spec.p; ++i)
    for (int j = 0; j < spec.q; ++j)
      if (rng.uniform() < density) s(i, j) = sd * rng.normal();
  return s;
}

Eigen::MatrixXd haar_orthogonal(const SketchSpec& spec) {
  if (spec.q > spec.p)
    throw ParameterError("orthogonal sketch requires q <= p");
  Rng rng(spec.seed);
  Eigen::MatrixXd z(spec.p, spec.q);
  for (int i = 0; i < spec.p; ++i)
    for (int j = 0; j < spec.q; ++j) z(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(z);
  Eigen::MatrixXd q_thin =
      qr.householderQ() * Eigen::MatrixXd::Identity(spec.p, spec.q);
  // Fixing the R-diagonal signs makes Q Haar rather than QR-convention biased.
  Eigen::MatrixXd r = qr.matrixQR().topRows(spec.q).triangularView<Eigen::Upper>();
  for (int j = 0; j < spec.q; ++j)
    if (r(j, j) < 0.0) q_thin.col(j) = -q_thin.col(j);
  return std::sqrt(static_cast<double>(spec.p) / spec.q) * q_thin;
}

int next_pow2(int n) {
  int v = 1;
  while (v < n) v <<= 1;
  return v;
}

// Entry (r, c) of the unnormalized Walsh-Hadamard matrix of size 2^k.
inline double hadamard_entry(unsigned r, unsigned c) {
  return (std::popcount(r & c) & 1U) ? -1.0 : 1.0;
}

Eigen::MatrixXd srht(const SketchSpec& spec) {
  int p2 = spec.p;
  if (spec.pad) {
    p2 = next_pow2(spec.p);
  } else if (std::popcount(static_cast<unsigned>(spec.p)) != 1) {
    throw ParameterError("srht with pad=false requires p to be a power of 2");
  }
  if (spec.q > p2) throw ParameterError("srht requires q <= padded dimension");

  Rng rng(spec.seed);
  std::vector<double> signs(spec.p);
  for (double& v : signs) v = rng.sign();

  // q distinct rows of the padded transform, by partial Fisher-Yates.
  std::vector<int> idx(p2);
  std::iota(idx.begin(), idx.end(), 0);
  for (int j = 0; j < spec.q; ++j) {
    const int k = j + static_cast<int>(rng.below(p2 - j));
    std::swap(idx[j], idx[k]);
  }

  const double scale = std::sqrt(static_cast<double>(p2) / spec.q) /
                       std::sqrt(static_cast<double>(p2));
  Eigen::MatrixXd s(spec.p, spec.q);
  for (int j = 0; j < spec.q; ++j) {
    const unsigned row = static_cast<unsigned>(idx[j]);
    for (int i = 0; i < spec.p; ++i)
      s(i, j) = scale * signs[i] * hadamard_entry(row, static_cast<unsigned>(i));
  }
  return s;
}

Eigen::MatrixXd count_sketch(const SketchSpec& spec) {
  Rng rng(spec.seed);
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(spec.p, spec.q);
  for (int i = 0; i < spec.p; ++i)
    s(i, static_cast<int>(rng.below(spec.q))) = rng.sign();
  return s;
}

Eigen::MatrixXd fjlt(const SketchSpec& spec) {
  const int p2 = next_pow2(spec.p);
  Rng rng(spec.seed);
  std::vector<double> signs(spec.p);
  for (double& v : signs) v = rng.sign();

  double density = spec.density;
  if (density < 0.0) {
    const double lg = std::log2(static_cast<double>(p2));
    density = std::min(1.0, lg * lg / p2);
  }
  if (!(density > 0.0) || density > 1.0)
    throw ParameterError("fjlt density must be in (0, 1]");

  // S = T^H W with T the first p columns of Hadamard*D (orthonormal) and W
  // sparse i.i.d. with nonzero variance 1/(density q).
  const double sd = 1.0 / std::sqrt(density * spec.q);
  const double hscale = 1.0 / std::sqrt(static_cast<double>(p2));
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(spec.p, spec.q);
  for (int r = 0; r < p2; ++r) {
    for (int j = 0; j < spec.q; ++j) {
      if (rng.uniform() >= density) continue;
      const double w = sd * rng.normal();
      for (int i = 0; i < spec.p; ++i)
        s(i, j) += w * hscale *
                   hadamard_entry(static_cast<unsigned>(r),
                                  static_cast<unsigned>(i));
    }
  }
  for (int i = 0; i < spec.p; ++i) s.row(i) *= signs[i];
  return s;
}

}  // namespace

SketchSpec SketchSpec::with_dims(int p_, int q_) const {
  SketchSpec out = *this;
  out.p = p_;
  out.q = q_;
  if (out.base) out.base = std::make_shared<SketchSpec>(out.base->with_dims(p_, q_));
  return out;
}

SketchSpec SketchSpec::with_seed(std::uint64_t seed_) const {
  SketchSpec out = *this;
  out.seed = seed_;
  if (out.base) out.base = std::make_shared<SketchSpec>(out.base->with_seed(seed_));
  return out;
}

std::string SketchSpec::kind_name(Kind k) {
  switch (k) {
    case Kind::IidGaussian: return "iid-gaussian";
    case Kind::SparseIid: return "sparse-iid";
    case Kind::HaarOrthogonal: return "haar-orthogonal";
    case Kind::Srht: return "srht";
    case Kind::CountSketch: return "count-sketch";
    case Kind::Fjlt: return "fjlt";
    case Kind::NonIsotropic: return "non-isotropic";
  }
  throw ParameterError("unknown sketch kind");
}

SketchSpec::Kind SketchSpec::kind_from_name(const std::string& name) {
  for (Kind k : {Kind::IidGaussian, Kind::SparseIid, Kind::HaarOrthogonal,
                 Kind::Srht, Kind::CountSketch, Kind::Fjlt, Kind::NonIsotropic})
    if (kind_name(k) == name) return k;
  throw ParameterError("unknown sketch kind: " + name);
}

std::string SketchSpec::to_json() const {
  nlohmann::json j;
  j["kind"] = kind_name(kind);
  j["p"] = p;
  j["q"] = q;
  j["seed"] = seed;
  if (kind == Kind::SparseIid || kind == Kind::Fjlt) j["density"] = density;
  if (kind == Kind::Srht) j["pad"] = pad;
  if (kind == Kind::NonIsotropic && base) j["base"] = nlohmann::json::parse(base->to_json());
  return j.dump();
}

SketchSpec SketchSpec::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  SketchSpec spec;
  spec.kind = kind_from_name(j.at("kind").get<std::string>());
  spec.p = j.value("p", 0);
  spec.q = j.value("q", 0);
  spec.seed = j.value("seed", std::uint64_t{0});
  spec.density = j.value("density", -1.0);
  spec.pad = j.value("pad", true);
  if (j.contains("base"))
    spec.base = std::make_shared<SketchSpec>(from_json(j["base"].dump()));
  return spec;
}

Eigen::MatrixXd generate_sketch(const SketchSpec& spec) {
  check_dims(spec);
  switch (spec.kind) {
    case SketchSpec::Kind::IidGaussian: return iid_gaussian(spec);
    case SketchSpec::Kind::SparseIid: return sparse_iid(spec);
    case SketchSpec::Kind::HaarOrthogonal: return haar_orthogonal(spec);
    case SketchSpec::Kind::Srht: return srht(spec);
    case SketchSpec::Kind::CountSketch: return count_sketch(spec);
    case SketchSpec::Kind::Fjlt: return fjlt(spec);
    case SketchSpec::Kind::NonIsotropic: {
      if (!spec.noniso_r)
        throw ParameterError("non-isotropic sketch needs the R matrix");
      if (spec.noniso_r->dim() != spec.p)
        throw ParameterError("non-isotropic R dimension must equal p");
      SketchSpec inner = spec.base ? *spec.base : SketchSpec{};
      inner.p = spec.p;
      inner.q = spec.q;
      inner.seed = spec.seed;
      if (inner.kind == SketchSpec::Kind::NonIsotropic)
        throw ParameterError("non-isotropic base must be a plain family");
      return spec.noniso_r->sqrt() * generate_sketch(inner);
    }
  }
  throw ParameterError("unknown sketch kind");
}

namespace {

// (G + lambda I)^-1 for G = S^H A S, with pseudoinverse semantics at
// lambda = 0 and a cond <= 1e14 guard otherwise.
Eigen::MatrixXd inner_inverse(Eigen::MatrixXd g, double lambda) {
  const int q = static_cast<int>(g.rows());
  if (lambda > 0.0) {
    Eigen::MatrixXd shifted = g;
    shifted.diagonal().array() += lambda;
    Eigen::LLT<Eigen::MatrixXd> llt(shifted);
    if (llt.info() == Eigen::Success) {
      if (llt.rcond() < 1e-14)
        throw IllConditionedError("sketched inner matrix condition > 1e14");
      return llt.solve(Eigen::MatrixXd::Identity(q, q));
    }
    // fall through to the eigen path (lambda below -lambda_min(G))
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g);
  if (eig.info() != Eigen::Success)
    throw SingularError("inner eigendecomposition failed");
  Eigen::VectorXd d = eig.eigenvalues();
  Eigen::VectorXd inv(d.size());
  if (lambda == 0.0) {
    const double tol = 1e-10 * std::max(d.cwiseAbs().maxCoeff(), 1.0);
    for (Eigen::Index i = 0; i < d.size(); ++i)
      inv[i] = std::abs(d[i]) > tol ? 1.0 / d[i] : 0.0;
  } else {
    Eigen::VectorXd shifted = d.array() + lambda;
    const double top = shifted.cwiseAbs().maxCoeff();
    const double bottom = shifted.cwiseAbs().minCoeff();
    if (!(bottom > 0.0) || top / bottom > 1e14)
      throw IllConditionedError("sketched inner matrix condition > 1e14");
    inv = shifted.cwiseInverse();
  }
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

Eigen::MatrixXd gram(const PsdMatrix& a, const Eigen::MatrixXd& s) {
  if (s.rows() != a.dim())
    throw ParameterError("sketch row count must equal the matrix dimension");
  Eigen::MatrixXd g = s.transpose() * a.apply(s);
  return 0.5 * (g + g.transpose());
}

// Per-eigenvalue values of Psi in the eigenbasis of A, aligned with
// a.eigenvalues() (ascending).
Eigen::VectorXd psi_in_eigenbasis(const PsdMatrix& a, const PsdMatrix& psi) {
  const Eigen::MatrixXd& v = a.eigenvectors();
  if (a.is_diagonal()) {
    Eigen::VectorXd out(a.dim());
    for (int k = 0; k < a.dim(); ++k) {
      Eigen::Index row;
      v.col(k).cwiseAbs().maxCoeff(&row);
      out[k] = psi.matrix()(row, row);
    }
    if (psi.is_diagonal()) return out;
    // off-diagonal psi entries do not contribute to the diagonal of V^T Psi V
    // only when V is a permutation, which holds for diagonal a
    return out;
  }
  Eigen::MatrixXd w = psi.apply(v);
  Eigen::VectorXd out(a.dim());
  for (int k = 0; k < a.dim(); ++k) out[k] = v.col(k).dot(w.col(k));
  return out;
}

}  // namespace

Eigen::MatrixXd sketched_inner_inverse(const PsdMatrix& a,
                                       const Eigen::MatrixXd& s,
                                       double lambda) {
  return inner_inverse(gram(a, s), lambda);
}

SketchedResolvent sketched_pseudoinverse(const PsdMatrix& a,
                                         const Eigen::MatrixXd& s,
                                         double lambda) {
  Eigen::MatrixXd k = sketched_inner_inverse(a, s, lambda);
  Eigen::MatrixXd r = s * k * s.transpose();
  SketchedResolvent out;
  out.matrix = 0.5 * (r + r.transpose());
  out.lambda = lambda;
  return out;
}

Eigen::MatrixXd half_sketched_pseudoinverse(const PsdMatrix& a,
                                            const Eigen::MatrixXd& s,
                                            double lambda) {
  if (lambda < 0.0)
    throw DomainError("half-sketched form requires lambda >= 0");
  Eigen::MatrixXd k = sketched_inner_inverse(a, s, lambda);
  if (a.is_diagonal()) {
    Eigen::VectorXd d = a.matrix().diagonal().cwiseSqrt();
    return d.asDiagonal() * (s * k * s.transpose());
  }
  return a.sqrt() * (s * k * s.transpose());
}

SecondOrderForm second_order_form(const PsdMatrix& a, const Eigen::MatrixXd& s,
                                  double lambda, const PsdMatrix& psi) {
  if (psi.dim() != a.dim())
    throw ParameterError("psi dimension must match the matrix");
  const int q = static_cast<int>(s.cols());
  Eigen::MatrixXd k = sketched_inner_inverse(a, s, lambda);
  Eigen::MatrixXd t = s.transpose() * psi.apply(s);
  Eigen::MatrixXd mid = k * (0.5 * (t + t.transpose())) * k;
  Eigen::MatrixXd emp = s * mid * s.transpose();

  SecondOrderForm out;
  out.empirical = 0.5 * (emp + emp.transpose());

  const double alpha = static_cast<double>(q) / a.dim();
  Spectrum spec = a.spectrum();
  Eigen::VectorXd psi_vals = psi_in_eigenbasis(a, psi);
  EquivalenceSolution sol = solve_mu(spec, alpha, lambda);
  out.mu = sol.mu;
  out.mu_prime = solve_mu_prime(
      spec, alpha, lambda,
      std::span<const double>(psi_vals.data(),
                              static_cast<std::size_t>(psi_vals.size())));

  // Companion (A + mu I)^-1 (Psi + mu' I)(A + mu I)^-1; Moore-Penrose
  // resolvent at mu = 0.
  Eigen::VectorXd d = a.eigenvalues().array() + out.mu;
  Eigen::VectorXd dinv(d.size());
  const double tol = a.rank_threshold();
  for (Eigen::Index i = 0; i < d.size(); ++i)
    dinv[i] = std::abs(d[i]) > tol ? 1.0 / d[i] : 0.0;
  const Eigen::MatrixXd& v = a.eigenvectors();
  Eigen::MatrixXd res = v * dinv.asDiagonal() * v.transpose();
  Eigen::MatrixXd center = psi.matrix();
  center.diagonal().array() += out.mu_prime;
  out.theory = res * center * res;
  return out;
}

double empirical_lambda_min_plus(const Eigen::MatrixXd& sym) {
  if (sym.rows() != sym.cols())
    throw ParameterError("lambda_min_plus needs a square matrix");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
      0.5 * (sym + sym.transpose()), Eigen::EigenvaluesOnly);
  const Eigen::VectorXd& d = eig.eigenvalues();
  const double tol = kRankTol * std::max(d.cwiseAbs().maxCoeff(), 1.0);
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < d.size(); ++i)
    if (d[i] > tol) best = std::min(best, d[i]);
  return best;
}

double empirical_v_tilde(const PsdMatrix& a, const Eigen::MatrixXd& s,
                         double lambda) {
  Eigen::MatrixXd k = sketched_inner_inverse(a, s, lambda);
  return k.trace() / static_cast<double>(s.cols());
}

}  // namespace skeq
