#include "skeq/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "skeq/errors.hpp"

namespace skeq {

Spectrum::Spectrum(std::vector<double> eigenvalues, std::vector<double> weights)
    : eigenvalues_(std::move(eigenvalues)), weights_(std::move(weights)) {
  if (eigenvalues_.empty())
    throw ParameterError("spectrum needs at least one eigenvalue");
  if (weights_.empty())
    weights_.assign(eigenvalues_.size(), 1.0 / eigenvalues_.size());
  if (weights_.size() != eigenvalues_.size())
    throw ParameterError("spectrum weights/eigenvalues size mismatch");

  double wsum = 0.0;
  for (double w : weights_) {
    if (!(w > 0.0)) throw ParameterError("spectrum weights must be positive");
    wsum += w;
  }
  if (std::abs(wsum - 1.0) > 1e-12 * std::max(1.0, std::abs(wsum)))
    throw ParameterError("spectrum weights must sum to 1 (within 1e-12)");
  for (double& w : weights_) w /= wsum;

  max_eigenvalue_ = *std::max_element(eigenvalues_.begin(), eigenvalues_.end());
  const double tol = rank_threshold();
  for (double& a : eigenvalues_) {
    if (a < -tol) throw ParameterError("spectrum eigenvalues must be >= 0");
    if (a < tol) a = 0.0;
  }
  max_eigenvalue_ = *std::max_element(eigenvalues_.begin(), eigenvalues_.end());

  for (std::size_t i = 0; i < eigenvalues_.size(); ++i) {
    mean_ += weights_[i] * eigenvalues_[i];
    if (eigenvalues_[i] > 0.0) relative_rank_ += weights_[i];
  }
}

double Spectrum::rank_threshold() const {
  return kRankTol * std::max(max_eigenvalue_, 1.0);
}

double Spectrum::lambda_min_plus() const {
  double best = std::numeric_limits<double>::infinity();
  for (double a : eigenvalues_)
    if (a > 0.0) best = std::min(best, a);
  return best;
}

void Spectrum::check_pole(double mu, bool include_zeros) const {
  // Near-machine relative tolerance: a + mu is meaningful down to the
  // rounding of the larger operand (mu0 legitimately approaches the pole as
  // alpha grows).
  for (double a : eigenvalues_) {
    if (a == 0.0 && !include_zeros) continue;
    const double tol = 1e-14 * std::max(a, std::abs(mu));
    if (std::abs(a + mu) <= tol) {
      std::ostringstream msg;
      msg << "resolvent pole: eigenvalue " << a << " at shift mu = " << mu;
      throw PoleError(msg.str());
    }
  }
}

double Spectrum::t1(double mu) const {
  check_pole(mu, /*include_zeros=*/false);
  double s = 0.0;
  for (std::size_t i = 0; i < eigenvalues_.size(); ++i) {
    const double a = eigenvalues_[i];
    if (a > 0.0) s += weights_[i] * a / (a + mu);
  }
  return s;
}

double Spectrum::t2(double mu) const {
  check_pole(mu, /*include_zeros=*/false);
  double s = 0.0;
  for (std::size_t i = 0; i < eigenvalues_.size(); ++i) {
    const double a = eigenvalues_[i];
    if (a > 0.0) {
      const double f = a / (a + mu);
      s += weights_[i] * f * f;
    }
  }
  return s;
}

double Spectrum::g_inv(double mu) const {
  check_pole(mu, /*include_zeros=*/true);
  double s = 0.0;
  for (std::size_t i = 0; i < eigenvalues_.size(); ++i) {
    if (!(eigenvalues_[i] + mu > 0.0))
      throw PoleError("g_inv requires a + mu > 0 for every eigenvalue");
    s += weights_[i] / (eigenvalues_[i] + mu);
  }
  return s;
}

double Spectrum::resolvent2_a(double mu) const {
  check_pole(mu, /*include_zeros=*/false);
  double s = 0.0;
  for (std::size_t i = 0; i < eigenvalues_.size(); ++i) {
    const double a = eigenvalues_[i];
    if (a > 0.0) {
      const double d = a + mu;
      s += weights_[i] * a / (d * d);
    }
  }
  return s;
}

double Spectrum::resolvent2(std::span<const double> psi, double mu) const {
  if (psi.size() != eigenvalues_.size())
    throw ParameterError("psi values must align with the spectrum");
  check_pole(mu, /*include_zeros=*/true);
  double s = 0.0;
  for (std::size_t i = 0; i < eigenvalues_.size(); ++i) {
    const double d = eigenvalues_[i] + mu;
    s += weights_[i] * psi[i] / (d * d);
  }
  return s;
}

Spectrum Spectrum::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (!j.contains("eigenvalues"))
    throw ParameterError("spectrum JSON needs an \"eigenvalues\" array");
  std::vector<double> ev = j["eigenvalues"].get<std::vector<double>>();
  std::vector<double> w;
  if (j.contains("weights")) w = j["weights"].get<std::vector<double>>();
  return Spectrum(std::move(ev), std::move(w));
}

Spectrum Spectrum::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot open spectrum file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

std::string Spectrum::to_json() const {
  nlohmann::json j;
  j["eigenvalues"] = eigenvalues_;
  j["weights"] = weights_;
  return j.dump();
}

void Spectrum::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ParameterError("cannot write spectrum file: " + path);
  out << to_json() << "\n";
}

double relative_rank(const Spectrum& s) { return s.relative_rank(); }

namespace {

double parse_value(const std::string& item, const std::string& key) {
  auto pos = item.find('=');
  if (pos == std::string::npos || item.substr(0, pos) != key)
    throw ParameterError("bad preset parameter: " + item);
  try {
    return std::stod(item.substr(pos + 1));
  } catch (const std::exception&) {
    throw ParameterError("bad preset value in: " + item);
  }
}

}  // namespace

SpectrumPreset SpectrumPreset::parse(const std::string& text) {
  auto colon = text.find(':');
  if (colon == std::string::npos)
    throw ParameterError("preset must look like \"iso:r=0.5\" or \"mp:ratio=0.2\"");
  const std::string head = text.substr(0, colon);
  std::vector<std::string> items;
  std::stringstream body(text.substr(colon + 1));
  for (std::string item; std::getline(body, item, ',');) items.push_back(item);
  if (items.empty()) throw ParameterError("preset has no parameters: " + text);

  SpectrumPreset preset;
  if (head == "iso") {
    preset.kind = Kind::IsotropicRankDeficient;
    preset.r = parse_value(items[0], "r");
    if (items.size() > 1) throw ParameterError("iso preset takes only r");
  } else if (head == "mp") {
    preset.kind = Kind::MarchenkoPastur;
    preset.ratio = parse_value(items[0], "ratio");
    for (std::size_t i = 1; i < items.size(); ++i) {
      if (items[i].rfind("scale=", 0) == 0)
        preset.scale = parse_value(items[i], "scale");
      else if (items[i].rfind("nodes=", 0) == 0)
        preset.resolution = static_cast<int>(parse_value(items[i], "nodes"));
      else
        throw ParameterError("unknown mp preset parameter: " + items[i]);
    }
  } else {
    throw ParameterError("unknown preset family: " + head);
  }
  return preset;
}

std::string SpectrumPreset::to_string() const {
  std::ostringstream out;
  switch (kind) {
    case Kind::IsotropicRankDeficient:
      out << "iso:r=" << r;
      break;
    case Kind::MarchenkoPastur:
      out << "mp:ratio=" << ratio;
      if (scale != 1.0) out << ",scale=" << scale;
      break;
    case Kind::ExplicitList:
      out << "explicit[" << eigenvalues.size() << "]";
      break;
  }
  return out.str();
}

void gauss_legendre(int n, std::vector<double>& nodes,
                    std::vector<double>& weights) {
  if (n < 1) throw ParameterError("quadrature needs at least one node");
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // Chebyshev-based initial guess, then Newton on P_n.
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    weights[i] = w;
    weights[n - 1 - i] = w;
  }
}

namespace {

Spectrum realize_marchenko_pastur(double ratio, double scale, int nodes_n) {
  if (!(ratio > 0.0)) throw ParameterError("mp ratio must be > 0");
  if (!(scale > 0.0)) throw ParameterError("mp scale must be > 0");
  if (nodes_n < 2) throw ParameterError("mp resolution must be >= 2");

  // Substituting x = (1+ratio) + 2*sqrt(ratio)*sin(t) removes the square-root
  // edge factor; Gauss-Legendre in t then converges spectrally.
  std::vector<double> t, gw;
  gauss_legendre(nodes_n, t, gw);
  const double half_pi = std::numbers::pi / 2.0;
  const double xc = 1.0 + ratio;
  const double xh = 2.0 * std::sqrt(ratio);

  std::vector<double> ev, w;
  ev.reserve(nodes_n + 1);
  w.reserve(nodes_n + 1);
  const double zero_mass = std::max(0.0, 1.0 - 1.0 / ratio);
  if (zero_mass > 0.0) {
    ev.push_back(0.0);
    w.push_back(zero_mass);
  }
  double cont = 0.0;
  for (int i = 0; i < nodes_n; ++i) {
    const double ti = half_pi * t[i];
    const double x = xc + xh * std::sin(ti);
    const double c = std::cos(ti);
    const double wi =
        half_pi * gw[i] * xh * xh * c * c /
        (2.0 * std::numbers::pi * ratio * x);
    ev.push_back(x);
    w.push_back(wi);
    cont += wi;
  }
  // Quadrature mass lands on min(1, 1/ratio) to near machine precision;
  // renormalize the continuous part so total weight is exactly 1.
  const double target = 1.0 - zero_mass;
  const std::size_t first = zero_mass > 0.0 ? 1 : 0;
  for (std::size_t i = first; i < w.size(); ++i) w[i] *= target / cont;
  if (scale != 1.0)
    for (double& x : ev) x *= scale;
  return Spectrum(std::move(ev), std::move(w));
}

}  // namespace

Spectrum realize_preset(const SpectrumPreset& preset) {
  switch (preset.kind) {
    case SpectrumPreset::Kind::IsotropicRankDeficient: {
      if (!(preset.r > 0.0) || preset.r > 1.0)
        throw ParameterError("iso preset needs r in (0, 1]");
      if (preset.r == 1.0) return Spectrum({1.0}, {1.0});
      return Spectrum({0.0, 1.0}, {1.0 - preset.r, preset.r});
    }
    case SpectrumPreset::Kind::MarchenkoPastur:
      return realize_marchenko_pastur(preset.ratio, preset.scale,
                                      preset.resolution);
    case SpectrumPreset::Kind::ExplicitList:
      return Spectrum(preset.eigenvalues, preset.weights);
  }
  throw ParameterError("unknown preset kind");
}

}  // namespace skeq
