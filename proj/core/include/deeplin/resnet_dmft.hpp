#pragma once

#include "deeplin/causal_block.hpp"
#include "deeplin/config.hpp"
#include "deeplin/solution.hpp"

#include <cstddef>
#include <vector>

namespace deeplin {

// d(field at layer l)/d(source k). Sources are u^1..u^L then r^1..r^L.
struct CrossLayerJacobians {
  int L = 0;
  std::vector<CausalBlock> h, g;  // index (l-1) * 2L + source

  int source_u(int k) const { return k - 1; }
  int source_r(int k) const { return L + k - 1; }
  const CausalBlock& dh(int l, int source) const { return h[(l - 1) * 2 * L + source]; }
  const CausalBlock& dg(int l, int source) const { return g[(l - 1) * 2 * L + source]; }
};

struct ResnetDiagnostics {
  std::size_t jacobian_bytes = 0;
  bool keep_jacobians = false;
  CrossLayerJacobians jacobians;  // filled when keep_jacobians
};

// Residual linear network on the population risk. Kernels C_h1..C_hL,
// C_g1..C_gL, R_hr1..R_hr{L-1}, R_gu1..R_guL, plus C_v (= C_h0), R_vr0.
DmftSolution solve_resnet_gd(const ResnetConfig& config, ResnetDiagnostics* diag = nullptr);

// Boundary kernel C_h0 through the error transfer function H(t,s):
// C_h0 = H [w* + r0 covariance] H^T with r0 centered. Used as a check on the
// forward-substituted C_v.
Matrix transfer_function(const DmftSolution& sol, double gamma0, double eta_memory);
Matrix boundary_correlation(const DmftSolution& sol, double gamma0, double eta_memory, double nu,
                            double target_variance, bool centering);

struct LayerTimeGrid {
  int S = 128;
};

// Infinite-depth limit in layer time tau in [0, 1], explicit Euler with
// dtau = 1/S. Kernels are reported at tau_j = j/S as C_h_tau<j/S>, C_g_tau<j/S>,
// responses rescaled by 1/beta. When doubling_check is set, also solves at 2S
// and adds a warning if sup_t of the loss gap exceeds 1% of sup_t of the loss.
DmftSolution solve_infinite_depth(const ResnetConfig& config, LayerTimeGrid grid, bool doubling_check = false);

struct DepthGap {
  int L = 0;
  int next_L = 0;
  double gap = 0.0;
};

struct DepthReport {
  std::vector<DepthGap> gaps;
  bool monotone_decrease = true;
};

// gaps between consecutive entries of configs (sup norm of the test loss).
DepthReport depth_convergence_report(const std::vector<ResnetConfig>& configs);

}  // namespace deeplin
