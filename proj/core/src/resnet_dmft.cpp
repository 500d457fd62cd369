#include "deeplin/resnet_dmft.hpp"

#include "upper_stack.hpp"

#include <cmath>
#include <cstdio>
#include <string>

namespace deeplin {
namespace {

constexpr double kDivergence = 1e12;

struct StreamParams {
  int L = 1;  // hidden layers
  int T = 1;
  double beta = 0.0;
  double gamma0 = 1.0;
  double eta = 0.0;
  double mem = 0.0;  // coefficient of C_g1 in the v memory
  double nu = kInf;
  double target_variance = 1.0;
  double sigma = 0.0;
  bool centering = true;
};

// Residual stream h^1 -> h^L with branches beta W^l / sqrt(N). Sources u^k
// (k = 1..L) enter h^k, sources r^k enter g^k; r^L is the readout init.
// A source perturbs the branch output itself, so d(field)/d(source) is the
// response to the branch and picks up another beta where the branch is added.
class ResidualEngine {
 public:
  explicit ResidualEngine(const StreamParams& p) : p_(p), T_(p.T), L_(p.L), F_(2 * p.L) {
    Cv_ = Matrix::Zero(T_, T_);
    Ch_.assign(L_ + 1, Matrix());
    Cg_.assign(L_ + 2, Matrix());
    for (int l = 1; l <= L_; ++l) {
      Ch_[l] = Matrix::Zero(T_, T_);
      Cg_[l] = Matrix::Zero(T_, T_);
    }
    H_.resize(L_ * F_);
    G_.resize(L_ * F_);
    for (auto& b : H_) b = CausalBlock(T_);
    for (auto& b : G_) b = CausalBlock(T_);
    Vw_ = CausalBlock(T_);
    Vr_ = CausalBlock(T_);
    families_.resize(F_);
    for (int k = 1; k <= L_; ++k) {
      families_[k - 1] = NoiseFamily::proportional("u" + std::to_string(k), 1.0, k == 1 ? &Cv_ : &Ch_[k - 1]);
      families_[L_ + k - 1] = k == L_ ? NoiseFamily::constant("r" + std::to_string(k), 1.0)
                                      : NoiseFamily::proportional("r" + std::to_string(k), 1.0, &Cg_[k + 1]);
    }
    wstar_ = NoiseFamily::constant("wstar", p.target_variance);
    r0_ = NoiseFamily::proportional("r0", 1.0 / (p.nu * p.gamma0 * p.gamma0), &Cg_[1]);
    k_.resize(T_);
    row_.resize(T_);
  }

  std::size_t jacobian_bytes() const {
    std::size_t b = 0;
    for (const auto& x : H_) b += x.bytes();
    for (const auto& x : G_) b += x.bytes();
    return b;
  }

  void run() {
    for (int t = 0; t < T_; ++t) {
      step(t);
      if (!finite_step(t)) {
        diverged_at_ = t;
        return;
      }
    }
  }

  int diverged_at() const { return diverged_at_; }
  int completed() const { return diverged_at_ < 0 ? T_ : diverged_at_; }
  const Matrix& Cv() const { return Cv_; }
  const Matrix& Ch(int l) const { return Ch_[l]; }
  const Matrix& Cg(int l) const { return Cg_[l]; }
  const CausalBlock& Vr() const { return Vr_; }
  const CausalBlock& Vw() const { return Vw_; }
  const CausalBlock& dh(int l, int f) const { return H_[(l - 1) * F_ + f]; }
  const CausalBlock& dg(int l, int f) const { return G_[(l - 1) * F_ + f]; }
  int u(int k) const { return k - 1; }
  int r(int k) const { return L_ + k - 1; }
  const NoiseFamily& r0() const { return r0_; }

  CrossLayerJacobians take_jacobians() {
    CrossLayerJacobians j;
    j.L = L_;
    j.h = std::move(H_);
    j.g = std::move(G_);
    return j;
  }

 private:
  CausalBlock& H(int l, int f) { return H_[(l - 1) * F_ + f]; }
  CausalBlock& G(int l, int f) { return G_[(l - 1) * F_ + f]; }

  void correlation_row(Matrix& c, int t, std::vector<CausalBlock>& blocks, int l) {
    std::fill(row_.begin(), row_.begin() + t + 1, 0.0);
    for (int f = 0; f < F_; ++f) add_row_congruence(row_, t, blocks[(l - 1) * F_ + f], families_[f]);
    detail::fill_symmetric_row(c, t, row_);
  }

  void step(int t) {
    const double b = p_.beta, eg = p_.eta * p_.gamma0;
    // Readout and backward stream, top-down.
    for (int f = 0; f < F_; ++f) {
      CausalBlock& g = G(L_, f);
      if (t > 0) g.row_map(t).head(t) = G(L_, f).row_map(t - 1) + eg * H(L_, f).row_map(t - 1);
    }
    if (t == 0) G(L_, r(L_)).at(0, 0) = 1.0;
    correlation_row(Cg_[L_], t, G_, L_);
    for (int l = L_ - 1; l >= 1; --l) {
      for (int s = 0; s < t; ++s) k_[s] = b * (dg(l + 1, u(l + 1))(t, s) + eg * b * Cg_[l + 1](t, s));
      for (int f = 0; f < F_; ++f) {
        CausalBlock& g = G(l, f);
        g.row_map(t) = G(l + 1, f).row_map(t);
        add_history(g, t, k_, 1.0, H(l, f));
      }
      G(l, r(l)).at(t, t) += b;
      correlation_row(Cg_[l], t, G_, l);
    }

    // Error field v = h0 on the population risk.
    const CausalBlock& Rgu1 = dg(1, u(1));
    for (int s = 0; s < t; ++s) k_[s] = Rgu1(t, s) / p_.gamma0 + p_.mem * Cg_[1](t, s);
    Vw_.at(t, 0) = 1.0;
    if (t > 0) {
      Vr_.at(t, t) = -1.0;
      if (p_.centering) Vr_.at(t, 0) += 1.0;
    } else if (!p_.centering) {
      Vr_.at(0, 0) = -1.0;
    }
    add_history(Vw_, t, k_, -1.0, Vw_);
    add_history(Vr_, t, k_, -1.0, Vr_);
    std::fill(row_.begin(), row_.begin() + t + 1, 0.0);
    add_row_congruence(row_, t, Vw_, wstar_);
    add_row_congruence(row_, t, Vr_, r0_);
    detail::fill_symmetric_row(Cv_, t, row_);

    // Forward stream, bottom-up. Response parts keep their equal-time entry.
    const double wr = 1.0 / (p_.nu * p_.gamma0);
    for (int s = 0; s < t; ++s) k_[s] = wr * Vr_(t, s) + eg * Cv_(t, s);
    k_[t] = wr * Vr_(t, t);
    for (int f = 0; f < F_; ++f) add_history_inclusive(H(1, f), t, k_, 1.0, G(1, f));
    H(1, u(1)).at(t, t) += 1.0;
    correlation_row(Ch_[1], t, H_, 1);
    for (int l = 1; l < L_; ++l) {
      const CausalBlock& Rhr = dh(l, r(l));
      for (int s = 0; s < t; ++s) k_[s] = b * (Rhr(t, s) + eg * b * Ch_[l](t, s));
      k_[t] = b * Rhr(t, t);
      for (int f = 0; f < F_; ++f) {
        CausalBlock& h = H(l + 1, f);
        h.row_map(t) = H(l, f).row_map(t);
        add_history_inclusive(h, t, k_, 1.0, G(l + 1, f));
      }
      H(l + 1, u(l + 1)).at(t, t) += b;
      correlation_row(Ch_[l + 1], t, H_, l + 1);
    }
  }

  bool finite_step(int t) const {
    // relative to t = 0: unscaled branches start at (1 + beta^2)^L
    auto bad = [&](double d, double d0) { return !std::isfinite(d) || d > kDivergence * std::max(1.0, d0); };
    if (bad(Cv_(t, t), Cv_(0, 0))) return false;
    for (int l = 1; l <= L_; ++l)
      if (bad(Ch_[l](t, t), Ch_[l](0, 0)) || bad(Cg_[l](t, t), Cg_[l](0, 0))) return false;
    return true;
  }

  StreamParams p_;
  int T_, L_, F_;
  Matrix Cv_;
  std::vector<Matrix> Ch_, Cg_;
  std::vector<CausalBlock> H_, G_;
  CausalBlock Vw_, Vr_;
  std::vector<NoiseFamily> families_;
  NoiseFamily wstar_, r0_;
  std::vector<double> k_, row_;
  int diverged_at_ = -1;
};

StreamParams stream_params(const ResnetConfig& c) {
  StreamParams p;
  p.L = c.L;
  p.T = c.T;
  p.beta = c.beta();
  p.gamma0 = c.effective_gamma0();
  p.eta = c.eta;
  p.mem = c.memory == MemoryCoefficient::Eta ? c.eta : c.eta * p.gamma0;
  p.nu = c.nu;
  p.target_variance = c.target_variance;
  p.sigma = c.sigma;
  p.centering = c.centering;
  return p;
}

void fill_common(DmftSolution& sol, const ResidualEngine& e, const StreamParams& p, int rows) {
  sol.T = rows;
  sol.sigma = p.sigma;
  sol.target_variance = p.target_variance;
  sol.width_coefficient = e.r0().scale;
  sol.data_coefficient = 0.0;
  const double s2 = p.sigma * p.sigma;
  sol.target_transfer.resize(rows);
  for (int t = 0; t < rows; ++t) {
    sol.target_transfer(t) = e.Vw()(t, 0);
    sol.test_loss.push_back(e.Cv()(t, t) + s2);
    sol.train_loss.push_back(e.Cv()(t, t) + s2);
  }
  if (rows == 0) return;
  using detail::truncated;
  sol.correlations.push_back(truncated("C_v", KernelKind::Correlation, e.Cv(), rows));
  sol.correlations.push_back(truncated("C_h0", KernelKind::Correlation, e.Cv(), rows));
  sol.responses.push_back(truncated("R_vr0", KernelKind::Response, e.Vr().dense(), rows));
  sol.responses.push_back(truncated("R_hr0", KernelKind::Response, e.Vr().dense(), rows));
}

std::string tau_name(const char* prefix, int j, int S) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_tau%.4f", prefix, static_cast<double>(j) / S);
  return buf;
}

}  // namespace

DmftSolution solve_resnet_gd(const ResnetConfig& config, ResnetDiagnostics* diag) {
  config.validate();
  const StreamParams p = stream_params(config);
  ResidualEngine e(p);
  e.run();
  const int rows = e.completed();
  DmftSolution sol;
  fill_common(sol, e, p, rows);
  if (rows > 0) {
    using detail::truncated;
    for (int l = 1; l <= p.L; ++l)
      sol.correlations.push_back(truncated("C_h" + std::to_string(l), KernelKind::Correlation, e.Ch(l), rows));
    for (int l = 1; l <= p.L; ++l)
      sol.correlations.push_back(truncated("C_g" + std::to_string(l), KernelKind::Correlation, e.Cg(l), rows));
    for (int l = 1; l < p.L; ++l)
      sol.responses.push_back(truncated("R_hr" + std::to_string(l), KernelKind::Response,
                                        e.dh(l, e.r(l)).dense(), rows));
    for (int l = 1; l <= p.L; ++l)
      sol.responses.push_back(truncated("R_gu" + std::to_string(l), KernelKind::Response,
                                        e.dg(l, e.u(l)).dense(), rows, Diagonal::Strict));
  }
  if (diag) {
    diag->jacobian_bytes = e.jacobian_bytes();
    if (diag->keep_jacobians) diag->jacobians = e.take_jacobians();
  }
  if (e.diverged_at() >= 0) throw DivergedError(e.diverged_at(), std::move(sol));
  return sol;
}

Matrix transfer_function(const DmftSolution& sol, double gamma0, double eta_memory) {
  const Matrix m = sol.get("R_gu1").values() / gamma0 + eta_memory * sol.get("C_g1").values();
  return causal_propagate(-m, Matrix::Identity(sol.T, sol.T));
}

Matrix boundary_correlation(const DmftSolution& sol, double gamma0, double eta_memory, double nu,
                            double target_variance, bool centering) {
  const int T = sol.T;
  const Matrix H = transfer_function(sol, gamma0, eta_memory);
  // Forcing w* - r0(t) + r0(0).
  Matrix P = -Matrix::Identity(T, T);
  if (centering) P.col(0).setOnes(), P(0, 0) = 0.0;
  const Matrix F = target_variance * Matrix::Ones(T, T) +
                   (1.0 / (nu * gamma0 * gamma0)) * P * sol.get("C_g1").values() * P.transpose();
  Matrix c = H * F * H.transpose();
  return 0.5 * (c + c.transpose());
}

DmftSolution solve_infinite_depth(const ResnetConfig& config, LayerTimeGrid grid, bool doubling_check) {
  if (!config.beta0 || !config.scaled) throw ContractError("solve_infinite_depth: needs beta0 in scaled mode");
  if (grid.S < 1) throw ContractError("solve_infinite_depth: S must be >= 1");
  config.validate();
  const int S = grid.S;
  // Euler step dtau = 1/S on the layer-time flow: S residual increments with
  // branch scale beta0 sqrt(dtau), grid points tau_j = j/S for j = 0..S.
  StreamParams p = stream_params(config);
  p.L = S + 1;
  p.beta = *config.beta0 / std::sqrt(static_cast<double>(S));
  ResidualEngine e(p);
  e.run();
  const int rows = e.completed();
  DmftSolution sol;
  fill_common(sol, e, p, rows);
  if (rows > 0) {
    using detail::truncated;
    for (int j = 0; j <= S; ++j)
      sol.correlations.push_back(truncated(tau_name("C_h", j, S), KernelKind::Correlation, e.Ch(j + 1), rows));
    for (int j = 0; j <= S; ++j)
      sol.correlations.push_back(truncated(tau_name("C_g", j, S), KernelKind::Correlation, e.Cg(j + 1), rows));
    const double inv_beta = p.beta > 0.0 ? 1.0 / p.beta : 0.0;
    for (int j = 0; j < S; ++j)
      sol.responses.push_back(truncated(tau_name("R_hr", j, S), KernelKind::Response,
                                        inv_beta * e.dh(j + 1, e.r(j + 1)).dense(), rows));
    for (int j = 1; j <= S; ++j)
      sol.responses.push_back(truncated(tau_name("R_gu", j, S), KernelKind::Response,
                                        inv_beta * e.dg(j + 1, e.u(j + 1)).dense(), rows, Diagonal::Strict));
    sol.responses.push_back(truncated("R_gu1", KernelKind::Response, e.dg(1, e.u(1)).dense(), rows, Diagonal::Strict));
    sol.correlations.push_back(truncated("C_g1", KernelKind::Correlation, e.Cg(1), rows));
  }
  if (e.diverged_at() >= 0) throw DivergedError(e.diverged_at(), std::move(sol));
  if (doubling_check) {
    const DmftSolution fine = solve_infinite_depth(config, {2 * S}, false);
    // sup-norm gap relative to the sup of the loss; per-step ratios blow up
    // once the loss has decayed by orders of magnitude
    double gap = 0.0, scale = 0.0;
    for (int t = 0; t < rows; ++t) {
      gap = std::max(gap, std::abs(fine.test_loss[t] - sol.test_loss[t]));
      scale = std::max(scale, std::abs(fine.test_loss[t]));
    }
    gap /= scale;
    if (gap > 0.01)
      sol.warnings.push_back("layer-time grid S=" + std::to_string(S) + " too coarse: doubling S changes the loss by " +
                             std::to_string(100.0 * gap) + "%");
  }
  return sol;
}

DepthReport depth_convergence_report(const std::vector<ResnetConfig>& configs) {
  DepthReport r;
  std::vector<std::vector<double>> losses;
  for (const auto& c : configs) losses.push_back(solve_resnet_gd(c).test_loss);
  for (std::size_t i = 0; i + 1 < configs.size(); ++i) {
    DepthGap g;
    g.L = configs[i].L;
    g.next_L = configs[i + 1].L;
    const std::size_t n = std::min(losses[i].size(), losses[i + 1].size());
    for (std::size_t t = 0; t < n; ++t) g.gap = std::max(g.gap, std::abs(losses[i][t] - losses[i + 1][t]));
    if (!r.gaps.empty() && !(g.gap < r.gaps.back().gap)) r.monotone_decrease = false;
    r.gaps.push_back(g);
  }
  return r;
}

}  // namespace deeplin
