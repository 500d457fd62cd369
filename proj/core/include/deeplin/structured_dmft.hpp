#pragma once

#include "deeplin/causal_block.hpp"
#include "deeplin/config.hpp"
#include "deeplin/solution.hpp"

#include <string>
#include <vector>

namespace deeplin {

// Per-mode state of a structured solve. v_k is linear in w*_k, r0_k and u0_k;
// the coefficient blocks are kept only for the noise sources that are present
// (finite N for r0, finite B for u0).
struct ModeState {
  int K = 0;
  int T = 0;
  Vector lambda, wstar;
  double r_scale = 0.0;  // variance of r0_k is r_scale * C_g1
  double u_scale = 0.0;  // variance of u0_k is u_scale * lambda_k * C_Delta(t,t)
  Matrix memory;         // k(t,t') = R_gu1/gamma0 + c C_g1, strictly lower
  Matrix C_g1;
  Vector C_delta;         // diagonal of C_Delta
  Matrix target;          // K x T, coefficient of w*_k in v_k(t)
  std::vector<CausalBlock> width, batch;  // d v_k / d r0_k, d v_k / d u0_k
  Matrix diag;            // K x T, M_k(t,t)

  Matrix M(int k) const;         // <v_k(t) v_k(t')>
  Matrix transfer(int k) const;  // causal, unit diagonal
  double final_M(int k) const { return diag(k, T - 1); }
  std::size_t bytes() const;
};

struct StructuredSolution {
  DmftSolution solution;
  ModeState modes;
};

// Online SGD on x ~ N(0, diag(lambda)). The memory estimate is checked against
// config.memory_cap_bytes before anything is allocated.
StructuredSolution solve_structured_sgd(const StructuredConfig& config);

std::size_t structured_memory_estimate(const StructuredConfig& config);

// 2b/(1+b) below b = 1, b above.
double theoretical_exponent(double b);

struct PowerLawFit {
  double exponent = 0.0;  // loss ~ t^-exponent
  double r_squared = 1.0;
  int points = 0;
};

// Least squares on log loss vs log t over steps [t_min, t_max], using a
// log-spaced subsample of at most `samples` distinct steps.
PowerLawFit fit_powerlaw(const std::vector<double>& loss, int t_min, int t_max, int samples = 64);

struct NtkDiagnostic {
  std::vector<double> K;  // K(t), t = 0..T-2
  double growth = 0.0;    // fitted slope of log(K(t) - K(0)) vs log t, i.e. chi - 1
  double chi = 1.0;
  double r_squared = 0.0;
};

// K(t) = C_g1(t,t) + R_gu1(t+1,t)/(eta gamma0). The equal-time R_gu1 vanishes
// in discrete time, so the one-step response stands in for it. The growth fit
// runs over [t_min, t_max] (defaults to the second half of the run on a log
// grid) and is skipped when K(t) - K(0) is not positive there.
NtkDiagnostic ntk_diagnostic(const DmftSolution& sol, double eta, double gamma0, int t_min = 0, int t_max = -1);

void write_modes_csv(const std::string& path, const ModeState& modes);

}  // namespace deeplin
