#include "deeplin/mlp_dmft.hpp"

#include "isotropic_engine.hpp"
#include "upper_stack.hpp"

#include <cmath>

namespace deeplin {
namespace detail {

namespace {

constexpr double kDivergence = 1e12;

class IsotropicEngine {
 public:
  explicit IsotropicEngine(const IsotropicProblem& p)
      : p_(p),
        T_(p.net.T),
        online_(p.setting == DataSetting::Online),
        Cv_(Matrix::Zero(T_, T_)),
        Cd_(Matrix::Zero(T_, T_)),
        Ch0_(Matrix::Zero(T_, T_)),
        Vw_(T_), Vr_(T_), Vu_(T_),
        Dud_(T_), Deps_(T_),
        Hw_(T_), Hr_(T_), Hu_(T_),
        stack_({p.net.L, T_, p.gamma0, p.net.eta, 1.0 / (p.nu * p.gamma0)}, &Ch0_, &Hr_),
        k_(T_), row_(T_) {
    const double g = p.gamma0;
    inv_data_ = 1.0 / p.data_ratio;
    wstar_ = NoiseFamily::constant("wstar", p.net.target_variance);
    r0_ = NoiseFamily::proportional("r0", 1.0 / (p.nu * g * g), &stack_.Cg(1));
    if (online_) {
      u0_ = NoiseFamily::local("u0", inv_data_, &Cd_);
      eps_ = NoiseFamily::white("eps", 1.0);
    } else {
      u0_ = NoiseFamily::proportional("u0", inv_data_, &Cd_);
      eps_ = NoiseFamily::constant("eps", 1.0);
    }
    ud_ = NoiseFamily::proportional("u_Delta", 1.0, &Cv_);
    mem_ = p.net.memory == MemoryCoefficient::Eta ? p.net.eta : p.net.eta * g;
  }

  DmftSolution run() {
    for (int t = 0; t < T_; ++t) {
      step(t);
      if (!finite_step(t)) throw DivergedError(t, collect(t));
    }
    return collect(T_);
  }

 private:
  void step(int t) {
    const double g = p_.gamma0;
    stack_.backward(t);

    // Error field v(t); memory k(t') = R_gu1(t,t')/gamma0 + c C_g1(t,t').
    const CausalBlock& Rgu1 = stack_.Rgu(1);
    const Matrix& Cg1 = stack_.Cg(1);
    for (int u = 0; u < t; ++u) k_[u] = Rgu1(t, u) / g + mem_ * Cg1(t, u);
    Vw_.at(t, 0) = 1.0;
    if (t > 0) {
      Vr_.at(t, t) = -1.0;
      if (p_.net.centering) Vr_.at(t, 0) += 1.0;
    } else if (!p_.net.centering) {
      Vr_.at(0, 0) = -1.0;
    }
    add_history(Vw_, t, k_, -1.0, Hw_);
    add_history(Vr_, t, k_, -1.0, Hr_);
    add_history(Vu_, t, k_, -1.0, Hu_);
    congruence_row(Cv_, t, {{&Vw_, &wstar_}, {&Vr_, &r0_}, {&Vu_, &u0_}});

    // Residual Delta(t) and the input-layer field h0(t).
    if (online_) {
      Dud_.at(t, t) = 1.0;
      Deps_.at(t, t) = p_.net.sigma;
      congruence_row(Cd_, t, {{&Dud_, &ud_}, {&Deps_, &eps_}});
      Hw_.row_map(t) = Vw_.row_map(t);
      Hr_.row_map(t) = Vr_.row_map(t);
      Hu_.row_map(t) = Vu_.row_map(t);
      Hu_.at(t, t) += 1.0;
    } else {
      for (int u = 0; u < t; ++u) k_[u] = Vu_(t, u);
      Dud_.at(t, t) = 1.0;
      Deps_.at(t, 0) = p_.net.sigma;
      add_history(Dud_, t, k_, inv_data_, Dud_);
      add_history(Deps_, t, k_, inv_data_, Deps_);
      congruence_row(Cd_, t, {{&Dud_, &ud_}, {&Deps_, &eps_}});
      // h0(t) = u0(t) + sum_{t'<=t} R_Delta(t,t') v(t')
      for (int u = 0; u <= t; ++u) k_[u] = Dud_(t, u);
      add_history_inclusive(Hw_, t, k_, 1.0, Vw_);
      add_history_inclusive(Hr_, t, k_, 1.0, Vr_);
      add_history_inclusive(Hu_, t, k_, 1.0, Vu_);
      Hu_.at(t, t) += 1.0;
    }
    congruence_row(Ch0_, t, {{&Hw_, &wstar_}, {&Hr_, &r0_}, {&Hu_, &u0_}});

    stack_.forward(t);
  }

  struct Term {
    const CausalBlock* block;
    const NoiseFamily* family;
  };

  void congruence_row(Matrix& c, int t, std::initializer_list<Term> terms) {
    std::fill(row_.begin(), row_.begin() + t + 1, 0.0);
    for (const auto& term : terms) add_row_congruence(row_, t, *term.block, *term.family);
    fill_symmetric_row(c, t, row_);
  }

  bool finite_step(int t) const {
    for (const Matrix* m : {&Cv_, &Cd_, &Ch0_}) {
      const double d = (*m)(t, t);
      if (!std::isfinite(d) || d > kDivergence) return false;
    }
    const double s = stack_.max_diagonal(t);
    return std::isfinite(s) && s <= kDivergence;
  }

  DmftSolution collect(int rows) const {
    DmftSolution sol;
    sol.T = rows;
    sol.sigma = p_.net.sigma;
    sol.target_variance = p_.net.target_variance;
    sol.width_coefficient = r0_.scale;
    sol.data_coefficient = inv_data_;
    sol.data_noise_time_local = online_;
    if (rows == 0) return sol;
    sol.correlations.push_back(truncated("C_v", KernelKind::Correlation, Cv_, rows));
    sol.correlations.push_back(truncated("C_Delta", KernelKind::Correlation, Cd_, rows));
    sol.correlations.push_back(truncated("C_h0", KernelKind::Correlation, Ch0_, rows));
    Matrix rdelta = online_ ? Matrix::Identity(T_, T_) : Dud_.dense();
    sol.responses.push_back(truncated("R_Delta", KernelKind::Response, rdelta, rows, Diagonal::Unit));
    sol.responses.push_back(truncated("R_vu0", KernelKind::Response, Vu_.dense(), rows, Diagonal::Strict));
    sol.responses.push_back(truncated("R_vr0", KernelKind::Response, Vr_.dense(), rows, Diagonal::Free));
    sol.responses.push_back(truncated("R_hr0", KernelKind::Response, Hr_.dense(), rows, Diagonal::Free));
    stack_.export_kernels(sol, rows);
    sol.target_transfer.resize(rows);
    const double s2 = p_.net.sigma * p_.net.sigma;
    for (int t = 0; t < rows; ++t) {
      sol.target_transfer(t) = Vw_(t, 0);
      sol.test_loss.push_back(Cv_(t, t) + s2);
      sol.train_loss.push_back(Cd_(t, t));
    }
    return sol;
  }

  IsotropicProblem p_;
  int T_;
  bool online_;
  double inv_data_ = 0.0;
  double mem_ = 0.0;
  Matrix Cv_, Cd_, Ch0_;
  CausalBlock Vw_, Vr_, Vu_;
  CausalBlock Dud_, Deps_;
  CausalBlock Hw_, Hr_, Hu_;
  UpperStack stack_;
  NoiseFamily wstar_, r0_, u0_, eps_, ud_;
  std::vector<double> k_, row_;
};

}  // namespace

DmftSolution solve_isotropic(const IsotropicProblem& p) {
  IsotropicEngine engine(p);
  return engine.run();
}

}  // namespace detail

DmftSolution solve_mlp_gd(const MlpGdConfig& config) {
  config.validate();
  detail::IsotropicProblem p;
  p.net = config;
  p.gamma0 = config.effective_gamma0();
  p.nu = config.nu;
  p.data_ratio = config.alpha;
  p.setting = detail::DataSetting::FullBatch;
  return detail::solve_isotropic(p);
}

DmftSolution population_gd_reference(const MlpGdConfig& config, bool infinite_width) {
  MlpGdConfig c = config;
  c.alpha = kInf;
  if (infinite_width) {
    c.nu = kInf;
    c.parameterization = Parameterization::MuP;
  }
  return solve_mlp_gd(c);
}

}  // namespace deeplin
