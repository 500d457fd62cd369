#include "deeplin/kernel.hpp"

#include "deeplin/csv.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace deeplin {

const char* to_string(KernelKind kind) {
  return kind == KernelKind::Correlation ? "correlation" : "response";
}

const char* to_string(Diagonal diag) {
  switch (diag) {
    case Diagonal::Strict: return "strict";
    case Diagonal::Unit: return "unit";
    case Diagonal::Free: return "free";
  }
  return "free";
}

Kernel::Kernel(std::string name, KernelKind kind, Matrix values, Diagonal diag)
    : name_(std::move(name)), kind_(kind), diag_(diag), values_(std::move(values)) {
  if (values_.rows() != values_.cols() || values_.rows() < 1)
    throw ContractError("Kernel '" + name_ + "': values must be a non-empty square matrix");
}

KernelDiagnostics check_kernel(const Kernel& k, const KernelTolerances& tol) {
  KernelDiagnostics d;
  const Matrix& m = k.values();
  const int T = k.steps();
  if (!m.allFinite()) {
    d.pass = false;
    d.message = "non-finite entries";
    return d;
  }
  std::ostringstream msg;
  if (k.kind() == KernelKind::Correlation) {
    d.max_asymmetry = (m - m.transpose()).cwiseAbs().maxCoeff();
    d.trace = m.trace();
    d.min_diagonal = m.diagonal().minCoeff();
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
    d.min_eigenvalue = es.eigenvalues().minCoeff();
    if (d.max_asymmetry > tol.asymmetry) {
      d.pass = false;
      msg << "asymmetry " << d.max_asymmetry << "; ";
    }
    if (d.min_diagonal < 0.0) {
      d.pass = false;
      msg << "negative diagonal " << d.min_diagonal << "; ";
    }
    if (d.min_eigenvalue < -tol.psd * std::max(d.trace, 0.0)) {
      d.pass = false;
      msg << "min eigenvalue " << d.min_eigenvalue << "; ";
    }
  } else {
    for (int t = 0; t < T; ++t)
      for (int s = t + 1; s < T; ++s)
        d.max_above_diagonal = std::max(d.max_above_diagonal, std::abs(m(t, s)));
    if (d.max_above_diagonal > tol.causality) {
      d.pass = false;
      msg << "acausal entry " << d.max_above_diagonal << "; ";
    }
    if (k.diagonal() != Diagonal::Free) {
      const double target = k.diagonal() == Diagonal::Unit ? 1.0 : 0.0;
      for (int t = 0; t < T; ++t)
        d.max_diagonal_error = std::max(d.max_diagonal_error, std::abs(m(t, t) - target));
      if (d.max_diagonal_error > tol.diagonal) {
        d.pass = false;
        msg << "diagonal off by " << d.max_diagonal_error << "; ";
      }
    }
  }
  d.message = msg.str();
  return d;
}

Matrix causal_propagate(const Matrix& memory, const Matrix& forcing) {
  if (memory.rows() != memory.cols())
    throw ContractError("causal_propagate: memory must be square");
  if (forcing.rows() != memory.rows())
    throw ContractError("causal_propagate: forcing must have T rows");
  const Eigen::Index T = memory.rows();
  Matrix x = forcing;
  for (Eigen::Index t = 1; t < T; ++t)
    x.row(t).noalias() += memory.row(t).head(t) * x.topRows(t);
  return x;
}

Kernel congruence(const Matrix& coeff, const Kernel& cov, std::string name) {
  if (coeff.cols() != cov.steps())
    throw ContractError("congruence: coefficient columns must match covariance size");
  if (coeff.rows() != coeff.cols())
    throw ContractError("congruence: coefficient block must be square");
  Matrix c = coeff * cov.values() * coeff.transpose();
  Matrix sym = 0.5 * (c + c.transpose());
  return Kernel(std::move(name), KernelKind::Correlation, std::move(sym));
}

void write_kernel(std::ostream& os, const Kernel& k) {
  const int T = k.steps();
  os << T << ' ' << to_string(k.kind()) << ' ' << k.name() << '\n';
  os << std::setprecision(17);
  for (int t = 0; t < T; ++t) {
    for (int s = 0; s < T; ++s) {
      if (s) os << ' ';
      os << k(t, s);
    }
    os << '\n';
  }
}

Kernel read_kernel(std::istream& is) {
  int T = 0;
  std::string kind, name;
  if (!(is >> T >> kind >> name) || T < 1) throw std::runtime_error("read_kernel: bad header");
  KernelKind kk;
  if (kind == "correlation") kk = KernelKind::Correlation;
  else if (kind == "response") kk = KernelKind::Response;
  else throw std::runtime_error("read_kernel: unknown kind '" + kind + "'");
  Matrix m(T, T);
  for (int t = 0; t < T; ++t)
    for (int s = 0; s < T; ++s)
      if (!(is >> m(t, s))) throw std::runtime_error("read_kernel: truncated matrix");
  return Kernel(name, kk, std::move(m));
}

void save_kernel(const std::string& path, const Kernel& k) {
  std::ostringstream os;
  write_kernel(os, k);
  write_file_atomic(path, os.str());
}

Kernel load_kernel(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  return read_kernel(is);
}

}  // namespace deeplin
