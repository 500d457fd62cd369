#include "upper_stack.hpp"

#include <cmath>
#include <string>

namespace deeplin::detail {

void fill_symmetric_row(Matrix& c, int t, const std::vector<double>& row) {
  for (int u = 0; u <= t; ++u) {
    c(t, u) = row[u];
    c(u, t) = row[u];
  }
}

Kernel truncated(const std::string& name, KernelKind kind, const Matrix& m, int rows, Diagonal diag) {
  return Kernel(name, kind, m.topLeftCorner(rows, rows), diag);
}

UpperStack::UpperStack(const Params& p, const Matrix* C_h0, const CausalBlock* R_hr0)
    : p_(p), Ch0_(C_h0), Rhr0_(R_hr0) {
  const int L = p.L, T = p.T;
  Hu_.resize(L + 1);
  Hr_.resize(L + 1);
  Gu_.resize(L + 1);
  Gr_.resize(L + 1);
  Ch_.resize(L + 1);
  Cg_.resize(L + 2);
  for (int l = 1; l <= L; ++l) {
    Hu_[l] = CausalBlock(T);
    Hr_[l] = CausalBlock(T);
    Gu_[l] = CausalBlock(T);
    Gr_[l] = CausalBlock(T);
    Ch_[l] = Matrix::Zero(T, T);
    Cg_[l] = Matrix::Zero(T, T);
  }
  u_.resize(L + 1);
  r_.resize(L + 1);
  for (int l = 1; l <= L; ++l) {
    u_[l] = NoiseFamily::proportional("u" + std::to_string(l), 1.0, l == 1 ? Ch0_ : &Ch_[l - 1]);
    r_[l] = l == L ? NoiseFamily::constant("r" + std::to_string(l), 1.0)
                   : NoiseFamily::proportional("r" + std::to_string(l), 1.0, &Cg_[l + 1]);
  }
  k_.resize(T);
  row_.resize(T);
}

void UpperStack::fill_row(Matrix& c, int t, const std::vector<double>& row) const {
  fill_symmetric_row(c, t, row);
}

void UpperStack::backward(int t) {
  const int L = p_.L;
  const double eg = p_.eta * p_.gamma0;
  // Readout layer: g^L(t) = r^L + eta gamma0 sum_{t'<t} h^L(t').
  if (t == 0) {
    Gr_[L].at(0, 0) = 1.0;
  } else {
    Gu_[L].row_map(t).head(t) = Gu_[L].row_map(t - 1) + eg * Hu_[L].row_map(t - 1);
    Gr_[L].row_map(t).head(t) = Gr_[L].row_map(t - 1) + eg * Hr_[L].row_map(t - 1);
  }
  std::fill(row_.begin(), row_.begin() + t + 1, 0.0);
  add_row_congruence(row_, t, Gu_[L], u_[L]);
  add_row_congruence(row_, t, Gr_[L], r_[L]);
  fill_row(Cg_[L], t, row_);

  for (int l = L - 1; l >= 1; --l) {
    for (int u = 0; u < t; ++u) k_[u] = Gu_[l + 1](t, u) + eg * Cg_[l + 1](t, u);
    Gr_[l].at(t, t) = 1.0;
    add_history(Gr_[l], t, k_, 1.0, Hr_[l]);
    add_history(Gu_[l], t, k_, 1.0, Hu_[l]);
    std::fill(row_.begin(), row_.begin() + t + 1, 0.0);
    add_row_congruence(row_, t, Gu_[l], u_[l]);
    add_row_congruence(row_, t, Gr_[l], r_[l]);
    fill_row(Cg_[l], t, row_);
  }
}

void UpperStack::forward(int t) {
  const int L = p_.L;
  const double eg = p_.eta * p_.gamma0;
  for (int l = 1; l <= L; ++l) {
    // h0(t) sees g^1(t) through the current predictor, hence every h^l(t)
    // sees g^l(t): the response part of the memory keeps its equal-time entry.
    if (l == 1) {
      for (int u = 0; u < t; ++u) k_[u] = p_.width_response * (*Rhr0_)(t, u) + eg * (*Ch0_)(t, u);
      k_[t] = p_.width_response * (*Rhr0_)(t, t);
    } else {
      for (int u = 0; u < t; ++u) k_[u] = Hr_[l - 1](t, u) + eg * Ch_[l - 1](t, u);
      k_[t] = Hr_[l - 1](t, t);
    }
    Hu_[l].at(t, t) = 1.0;
    add_history_inclusive(Hu_[l], t, k_, 1.0, Gu_[l]);
    add_history_inclusive(Hr_[l], t, k_, 1.0, Gr_[l]);
    std::fill(row_.begin(), row_.begin() + t + 1, 0.0);
    add_row_congruence(row_, t, Hu_[l], u_[l]);
    add_row_congruence(row_, t, Hr_[l], r_[l]);
    fill_row(Ch_[l], t, row_);
  }
}

double UpperStack::max_diagonal(int t) const {
  double m = 0.0;
  for (int l = 1; l <= p_.L; ++l) {
    const double a = Ch_[l](t, t), b = Cg_[l](t, t);
    if (!std::isfinite(a) || !std::isfinite(b)) return INFINITY;
    m = std::max({m, a, b});
  }
  return m;
}

void UpperStack::export_kernels(DmftSolution& sol, int rows) const {
  const int L = p_.L;
  for (int l = 1; l <= L; ++l)
    sol.correlations.push_back(truncated("C_h" + std::to_string(l), KernelKind::Correlation, Ch_[l], rows));
  for (int l = 1; l <= L; ++l)
    sol.correlations.push_back(truncated("C_g" + std::to_string(l), KernelKind::Correlation, Cg_[l], rows));
  for (int l = 1; l < L; ++l)
    sol.responses.push_back(
        truncated("R_hr" + std::to_string(l), KernelKind::Response, Hr_[l].dense(), rows, Diagonal::Free));
  for (int l = 1; l <= L; ++l)
    sol.responses.push_back(
        truncated("R_gu" + std::to_string(l), KernelKind::Response, Gu_[l].dense(), rows, Diagonal::Strict));
}

}  // namespace deeplin::detail
