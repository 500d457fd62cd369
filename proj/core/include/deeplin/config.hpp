#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace deeplin {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Parameterization { MuP, NTK };

// Coefficient of C_g^1 in the memory of the error field v.
enum class MemoryCoefficient { Eta, EtaGamma0 };

struct NetworkParams {
  int L = 2;
  double gamma0 = 1.0;
  double eta = 0.05;
  double sigma = 0.0;
  int T = 10;
  bool centering = true;
  Parameterization parameterization = Parameterization::MuP;
  MemoryCoefficient memory = MemoryCoefficient::Eta;
  double target_variance = 1.0;

  void validate_common() const;
};

struct MlpGdConfig : NetworkParams {
  double nu = kInf;     // N / D
  double alpha = kInf;  // P / D

  double effective_gamma0() const;
  void validate() const;
};

struct SgdConfig : NetworkParams {
  double nu = kInf;
  double alpha_b = kInf;  // B / D

  double effective_gamma0() const;
  void validate() const;
};

struct ResnetConfig : NetworkParams {
  double nu = kInf;
  std::optional<double> beta_raw;
  std::optional<double> beta0;
  bool scaled = true;

  double beta() const;  // beta_raw, or beta0/sqrt(L) when scaled
  double effective_gamma0() const;
  void validate() const;
};

struct SpectrumSpec {
  int K = 4096;
  double a = 2.0;  // capacity: lambda_k = k^-a
  double b = 0.5;  // source: lambda_k wstar_k^2 = k^(-a b - 1)
  std::vector<double> lambda;  // explicit arrays override (a, b, K)
  std::vector<double> wstar;

  int modes() const;
  std::vector<double> eigenvalues() const;
  std::vector<double> target() const;  // wstar_k
  void validate() const;
  static SpectrumSpec from_file(const std::string& path);
};

struct StructuredConfig : NetworkParams {
  SpectrumSpec spectrum;
  double N = kInf;
  double B = kInf;
  std::size_t memory_cap_bytes = std::size_t(2) << 30;

  double effective_gamma0() const;
  void validate() const;
};

}  // namespace deeplin
