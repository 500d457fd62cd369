#include "deeplin/config.hpp"
#include "deeplin/kernel.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace deeplin {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ContractError(what);
}

bool positive_or_inf(double x) { return x > 0.0 && !std::isnan(x); }

}  // namespace

void NetworkParams::validate_common() const {
  require(L >= 1, "L must be >= 1");
  require(gamma0 > 0.0 && std::isfinite(gamma0), "gamma0 must be positive");
  require(eta >= 0.0 && std::isfinite(eta), "eta must be non-negative");
  require(sigma >= 0.0 && std::isfinite(sigma), "sigma must be non-negative");
  require(T >= 1, "T must be >= 1");
  require(target_variance >= 0.0 && std::isfinite(target_variance), "target_variance must be >= 0");
}

double MlpGdConfig::effective_gamma0() const {
  return parameterization == Parameterization::NTK ? gamma0 / std::sqrt(nu) : gamma0;
}

void MlpGdConfig::validate() const {
  validate_common();
  require(positive_or_inf(nu), "nu must be positive (inf allowed)");
  require(positive_or_inf(alpha), "alpha must be positive (inf allowed)");
  require(!(parameterization == Parameterization::NTK && std::isinf(nu)),
          "NTK parameterization needs finite nu");
}

double SgdConfig::effective_gamma0() const {
  return parameterization == Parameterization::NTK ? gamma0 / std::sqrt(nu) : gamma0;
}

void SgdConfig::validate() const {
  validate_common();
  require(positive_or_inf(nu), "nu must be positive (inf allowed)");
  require(positive_or_inf(alpha_b), "alpha_b must be positive (inf allowed)");
  require(!(parameterization == Parameterization::NTK && std::isinf(nu)),
          "NTK parameterization needs finite nu");
}

double ResnetConfig::beta() const {
  if (beta_raw) return *beta_raw;
  return scaled ? *beta0 / std::sqrt(static_cast<double>(L)) : *beta0;
}

double ResnetConfig::effective_gamma0() const {
  return parameterization == Parameterization::NTK ? gamma0 / std::sqrt(nu) : gamma0;
}

void ResnetConfig::validate() const {
  validate_common();
  require(positive_or_inf(nu), "nu must be positive (inf allowed)");
  require(beta_raw.has_value() != beta0.has_value(), "set exactly one of beta and beta0");
  require(beta() >= 0.0 && std::isfinite(beta()), "beta must be non-negative");
  require(!(parameterization == Parameterization::NTK && std::isinf(nu)),
          "NTK parameterization needs finite nu");
}

int SpectrumSpec::modes() const { return lambda.empty() ? K : static_cast<int>(lambda.size()); }

std::vector<double> SpectrumSpec::eigenvalues() const {
  if (!lambda.empty()) return lambda;
  std::vector<double> l(K);
  for (int k = 0; k < K; ++k) l[k] = std::pow(k + 1.0, -a);
  return l;
}

std::vector<double> SpectrumSpec::target() const {
  if (!wstar.empty()) return wstar;
  const auto l = eigenvalues();
  std::vector<double> w(l.size());
  for (std::size_t k = 0; k < l.size(); ++k)
    w[k] = std::sqrt(std::pow(k + 1.0, -a * b - 1.0) / l[k]);
  return w;
}

void SpectrumSpec::validate() const {
  if (!lambda.empty()) {
    require(lambda.size() == wstar.size(), "spectrum: lambda and wstar must have equal length");
    for (std::size_t k = 0; k < lambda.size(); ++k) {
      require(lambda[k] > 0.0, "spectrum: eigenvalues must be positive");
      require(k == 0 || lambda[k] <= lambda[k - 1], "spectrum: eigenvalues must be non-increasing");
    }
    return;
  }
  require(K >= 1, "spectrum: K must be >= 1");
  require(a > 1.0, "spectrum: capacity exponent a must be > 1");
  require(b > 0.0, "spectrum: source exponent b must be > 0");
}

SpectrumSpec SpectrumSpec::from_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read spectrum file " + path);
  SpectrumSpec s;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    double l, w;
    if (!(ls >> l >> w)) throw std::runtime_error("spectrum file: expected 'lambda wstar' in " + path);
    s.lambda.push_back(l);
    s.wstar.push_back(w);
  }
  s.K = static_cast<int>(s.lambda.size());
  s.validate();
  return s;
}

double StructuredConfig::effective_gamma0() const {
  return parameterization == Parameterization::NTK ? gamma0 / std::sqrt(N) : gamma0;
}

void StructuredConfig::validate() const {
  validate_common();
  spectrum.validate();
  require(N >= 1.0, "N must be >= 1 (inf allowed)");
  require(B >= 1.0, "B must be >= 1 (inf allowed)");
  require(!(parameterization == Parameterization::NTK && std::isinf(N)),
          "NTK parameterization needs finite N");
}

}  // namespace deeplin
