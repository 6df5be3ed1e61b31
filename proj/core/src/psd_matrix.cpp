#include "skeq/psd_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <vector>

#include "skeq/errors.hpp"

namespace skeq {

PsdMatrix::PsdMatrix(Eigen::MatrixXd m) {
  if (m.rows() != m.cols()) throw ParameterError("PsdMatrix must be square");
  const double scale = std::max(m.cwiseAbs().maxCoeff(), 1.0);
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw ParameterError("PsdMatrix input is not symmetric within tolerance");
  matrix_ = 0.5 * (m + m.transpose());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(matrix_);
  if (eig.info() != Eigen::Success)
    throw SingularError("eigendecomposition failed");
  eigenvalues_ = eig.eigenvalues();
  eigenvectors_ = eig.eigenvectors();
  const double tol = 1e-10 * std::max(std::abs(eigenvalues_.maxCoeff()), 1.0);
  for (Eigen::Index i = 0; i < eigenvalues_.size(); ++i) {
    if (eigenvalues_[i] < -tol)
      throw ParameterError("matrix has a negative eigenvalue beyond tolerance");
    if (eigenvalues_[i] < tol) eigenvalues_[i] = 0.0;
  }
}

PsdMatrix PsdMatrix::diagonal(Eigen::VectorXd values) {
  const double tol = 1e-10 * std::max(values.cwiseAbs().maxCoeff(), 1.0);
  PsdMatrix out;
  out.diagonal_ = true;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values[i] < -tol)
      throw ParameterError("diagonal has a negative entry beyond tolerance");
    if (values[i] < tol) values[i] = 0.0;
  }
  out.matrix_ = values.asDiagonal();
  // Sort eigenpairs ascending; eigenvectors are the matching unit vectors.
  std::vector<Eigen::Index> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return values[a] < values[b]; });
  out.eigenvalues_.resize(values.size());
  out.eigenvectors_ = Eigen::MatrixXd::Zero(values.size(), values.size());
  for (Eigen::Index k = 0; k < values.size(); ++k) {
    out.eigenvalues_[k] = values[order[k]];
    out.eigenvectors_(order[k], k) = 1.0;
  }
  return out;
}

PsdMatrix PsdMatrix::from_spectrum(const Spectrum& s, int p) {
  if (p < static_cast<int>(s.size()))
    throw ParameterError("dimension too small to realize the spectrum");
  // Largest-remainder apportionment of p slots over the atoms.
  const auto& w = s.weights();
  const auto& ev = s.eigenvalues();
  std::vector<int> counts(w.size());
  std::vector<std::pair<double, std::size_t>> rema(w.size());
  int used = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double exact = w[i] * p;
    counts[i] = static_cast<int>(std::floor(exact));
    rema[i] = {exact - counts[i], i};
    used += counts[i];
  }
  std::sort(rema.begin(), rema.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int k = 0; used < p; ++k, ++used) counts[rema[k].second] += 1;

  Eigen::VectorXd diag(p);
  int at = 0;
  for (std::size_t i = 0; i < ev.size(); ++i)
    for (int c = 0; c < counts[i]; ++c) diag[at++] = ev[i];
  return PsdMatrix::diagonal(std::move(diag));
}

PsdMatrix PsdMatrix::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot open matrix file: " + path);
  std::string header;
  std::getline(in, header);
  if (header.rfind("p=", 0) != 0)
    throw ParameterError("matrix CSV must start with a \"p=<n>\" header");
  const int p = std::stoi(header.substr(2));
  if (p <= 0) throw ParameterError("bad matrix dimension in header");
  Eigen::MatrixXd m(p, p);
  std::string line;
  for (int i = 0; i < p; ++i) {
    if (!std::getline(in, line))
      throw ParameterError("matrix CSV truncated");
    std::stringstream row(line);
    std::string cell;
    for (int j = 0; j < p; ++j) {
      if (!std::getline(row, cell, ','))
        throw ParameterError("matrix CSV row too short");
      m(i, j) = std::stod(cell);
    }
  }
  return PsdMatrix(std::move(m));
}

void PsdMatrix::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ParameterError("cannot write matrix file: " + path);
  out << "p=" << dim() << "\n";
  char buf[32];
  for (int i = 0; i < dim(); ++i) {
    for (int j = 0; j < dim(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", matrix_(i, j));
      out << buf << (j + 1 == dim() ? '\n' : ',');
    }
  }
}

Spectrum PsdMatrix::spectrum() const {
  return Spectrum(std::vector<double>(eigenvalues_.data(),
                                      eigenvalues_.data() + eigenvalues_.size()));
}

double PsdMatrix::lambda_min_plus() const {
  const double tol = rank_threshold();
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < eigenvalues_.size(); ++i)
    if (eigenvalues_[i] > tol) best = std::min(best, eigenvalues_[i]);
  return best;
}

double PsdMatrix::operator_norm() const {
  return eigenvalues_.size() ? eigenvalues_.maxCoeff() : 0.0;
}

double PsdMatrix::rank_threshold() const {
  return kRankTol * std::max(operator_norm(), 1.0);
}

Eigen::MatrixXd PsdMatrix::sqrt() const {
  if (diagonal_)
    return matrix_.diagonal().cwiseSqrt().asDiagonal();
  return eigenvectors_ * eigenvalues_.cwiseSqrt().asDiagonal() *
         eigenvectors_.transpose();
}

Eigen::MatrixXd PsdMatrix::resolvent(double mu) const {
  Eigen::VectorXd shifted = eigenvalues_.array() + mu;
  const double tol = kRankTol * std::max({operator_norm(), std::abs(mu), 1.0});
  for (Eigen::Index i = 0; i < shifted.size(); ++i)
    if (std::abs(shifted[i]) < tol)
      throw PoleError("resolvent shift collides with an eigenvalue");
  if (diagonal_)
    return (matrix_.diagonal().array() + mu).inverse().matrix().asDiagonal();
  return eigenvectors_ * shifted.cwiseInverse().asDiagonal() *
         eigenvectors_.transpose();
}

Eigen::MatrixXd PsdMatrix::apply(const Eigen::MatrixXd& x) const {
  if (diagonal_) return matrix_.diagonal().asDiagonal() * x;
  return matrix_ * x;
}

}  // namespace skeq
