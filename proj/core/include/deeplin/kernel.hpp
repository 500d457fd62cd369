#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <stdexcept>
#include <string>

namespace deeplin {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct TimeGrid {
  int steps = 1;

  explicit TimeGrid(int T) : steps(T) {
    if (T < 1) throw ContractError("TimeGrid: T must be >= 1");
  }
  bool operator==(const TimeGrid&) const = default;
};

enum class KernelKind { Correlation, Response };

// Equal-time convention of a response kernel.
enum class Diagonal { Strict, Unit, Free };

const char* to_string(KernelKind kind);
const char* to_string(Diagonal diag);

class Kernel {
 public:
  Kernel(std::string name, KernelKind kind, Matrix values, Diagonal diag = Diagonal::Free);

  const std::string& name() const { return name_; }
  KernelKind kind() const { return kind_; }
  Diagonal diagonal() const { return diag_; }
  TimeGrid grid() const { return TimeGrid(static_cast<int>(values_.rows())); }
  int steps() const { return static_cast<int>(values_.rows()); }
  const Matrix& values() const { return values_; }
  double operator()(int t, int s) const { return values_(t, s); }

 private:
  std::string name_;
  KernelKind kind_;
  Diagonal diag_;
  Matrix values_;
};

struct KernelTolerances {
  double asymmetry = 1e-12;
  double psd = 1e-8;  // relative to trace
  double causality = 1e-12;
  double diagonal = 1e-12;
};

struct KernelDiagnostics {
  double max_asymmetry = 0.0;
  double min_eigenvalue = 0.0;
  double trace = 0.0;
  double min_diagonal = 0.0;
  double max_above_diagonal = 0.0;
  double max_diagonal_error = 0.0;
  bool pass = true;
  std::string message;
};

KernelDiagnostics check_kernel(const Kernel& k, const KernelTolerances& tol = {});

// x(t) = forcing(t) + sum_{t'<t} memory(t,t') x(t'); entries of memory on or
// above the diagonal are ignored.
Matrix causal_propagate(const Matrix& memory, const Matrix& forcing);

// A cov A^T, symmetrized.
Kernel congruence(const Matrix& coeff, const Kernel& cov, std::string name = "congruence");

void write_kernel(std::ostream& os, const Kernel& k);
Kernel read_kernel(std::istream& is);
void save_kernel(const std::string& path, const Kernel& k);
Kernel load_kernel(const std::string& path);

}  // namespace deeplin
