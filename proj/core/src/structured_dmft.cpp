#include "deeplin/structured_dmft.hpp"

#include "upper_stack.hpp"

#include "deeplin/csv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <numeric>

namespace deeplin {
namespace {

constexpr double kDivergence = 1e12;
constexpr int kBlock = 256;  // modes per partial sum

// Fixed-order reduction: contiguous blocks of kBlock modes, then pairwise over
// the block partials. Deterministic for a given K.
class PairwiseRows {
 public:
  PairwiseRows(int K, int T) : blocks_((K + kBlock - 1) / kBlock), part_(blocks_, std::vector<double>(T)) {}

  void clear(int n) {
    for (auto& p : part_) std::fill(p.begin(), p.begin() + n, 0.0);
  }
  std::vector<double>& block(int k) { return part_[k / kBlock]; }

  void reduce(int n, std::vector<double>& out) {
    for (int width = 1; width < blocks_; width *= 2)
      for (int i = 0; i + width < blocks_; i += 2 * width)
        for (int s = 0; s < n; ++s) part_[i][s] += part_[i + width][s];
    std::copy(part_[0].begin(), part_[0].begin() + n, out.begin());
  }

 private:
  int blocks_;
  std::vector<std::vector<double>> part_;
};

class StructuredEngine {
 public:
  StructuredEngine(const StructuredConfig& c, ModeState& m)
      : c_(c),
        m_(m),
        T_(c.T),
        K_(c.spectrum.modes()),
        gamma_(c.effective_gamma0()),
        finite_N_(std::isfinite(c.N)),
        finite_B_(std::isfinite(c.B)),
        Cv_(Matrix::Zero(T_, T_)),
        Cd_(Matrix::Zero(T_, T_)),
        Ch0_(Matrix::Zero(T_, T_)),
        Rhr0_(T_),
        Rvu_(T_),
        stack_({c.L, T_, gamma_, c.eta, finite_N_ ? 1.0 / (c.N * gamma_) : 0.0}, &Ch0_, &Rhr0_),
        vsum_(K_, T_),
        hsum_(K_, T_),
        k_(T_), row_(T_), rv_(T_), a_(T_), wv_(T_), wh_(T_) {
    const auto lam = c.spectrum.eigenvalues();
    const auto w = c.spectrum.target();
    m_.K = K_;
    m_.T = T_;
    m_.lambda = Eigen::Map<const Vector>(lam.data(), K_);
    m_.wstar = Eigen::Map<const Vector>(w.data(), K_);
    m_.r_scale = finite_N_ ? 1.0 / (c.N * gamma_ * gamma_) : 0.0;
    m_.u_scale = finite_B_ ? 1.0 / c.B : 0.0;
    m_.memory = Matrix::Zero(T_, T_);
    m_.C_delta = Vector::Zero(T_);
    m_.target = Matrix::Zero(K_, T_);
    m_.diag = Matrix::Zero(K_, T_);
    if (finite_N_) m_.width.assign(K_, CausalBlock(T_));
    if (finite_B_) m_.batch.assign(K_, CausalBlock(T_));
    mem_ = c.memory == MemoryCoefficient::Eta ? c.eta : c.eta * gamma_;
  }

  void run() {
    for (int t = 0; t < T_; ++t) {
      step(t);
      if (!finite_step(t)) {
        diverged_at_ = t;
        break;
      }
    }
    m_.C_g1 = stack_.Cg(1);
  }

  int diverged_at() const { return diverged_at_; }

  DmftSolution collect() const {
    const int rows = diverged_at_ < 0 ? T_ : diverged_at_;
    DmftSolution sol;
    sol.T = rows;
    sol.sigma = c_.sigma;
    sol.target_variance = (m_.lambda.array() * m_.wstar.array().square()).sum();
    if (rows == 0) return sol;
    using detail::truncated;
    sol.correlations.push_back(truncated("C_v", KernelKind::Correlation, Cv_, rows));
    sol.correlations.push_back(truncated("C_Delta", KernelKind::Correlation, Cd_, rows));
    sol.correlations.push_back(truncated("C_h0", KernelKind::Correlation, Ch0_, rows));
    sol.responses.push_back(truncated("R_vu0", KernelKind::Response, Rvu_.dense(), rows, Diagonal::Strict));
    sol.responses.push_back(truncated("R_hr0", KernelKind::Response, Rhr0_.dense(), rows));
    stack_.export_kernels(sol, rows);
    const double s2 = c_.sigma * c_.sigma;
    for (int t = 0; t < rows; ++t) {
      sol.test_loss.push_back(Cv_(t, t) + s2);
      sol.train_loss.push_back(Cd_(t, t));
    }
    return sol;
  }

 private:
  void step(int t) {
    stack_.backward(t);
    const CausalBlock& Rgu1 = stack_.Rgu(1);
    const Matrix& Cg1 = stack_.Cg(1);
    for (int s = 0; s < t; ++s) {
      k_[s] = Rgu1(t, s) / gamma_ + mem_ * Cg1(t, s);
      m_.memory(t, s) = k_[s];
    }

    // v_k(t) = w*_k - [r0_k(t) - r0_k(0)] - sum_{t'<t} k(t,t') h0_k(t'),
    // h0_k = lambda_k v_k + u0_k.
    const int n = t + 1;
    vsum_.clear(n);
    hsum_.clear(n);
    std::fill(Rhr0_.row(t).begin(), Rhr0_.row(t).end(), 0.0);
    std::fill(Rvu_.row(t).begin(), Rvu_.row(t).end(), 0.0);

    // Target part, all modes at once: v_k(t) <- 1 - lambda_k sum_t' k(t,t') target_k(t').
    auto target = m_.target.leftCols(n);
    const Eigen::Map<const Vector> kt(k_.data(), t);
    if (t > 0)
      m_.target.col(t) = (1.0 - (m_.lambda.array() * (m_.target.leftCols(t) * kt).array())).matrix();
    else
      m_.target.col(0).setOnes();
    const Vector z = (m_.lambda.array() * m_.wstar.array().square() * m_.target.col(t).array()).matrix();
    wv_.head(n).noalias() = target.transpose() * z;
    wh_.head(n).noalias() = target.transpose() * (m_.lambda.array() * z.array()).matrix();
    m_.diag.col(t) = (m_.wstar.array() * m_.target.col(t).array()).square().matrix();

    const int noisy = finite_N_ || finite_B_ ? K_ : 0;
    for (int k = 0; k < noisy; ++k) {
      const double lam = m_.lambda(k);
      if (finite_N_) {
        CausalBlock& V = m_.width[k];
        if (t > 0) {
          V.at(t, t) = -1.0;
          if (c_.centering) V.at(t, 0) += 1.0;
        } else if (!c_.centering) {
          V.at(0, 0) = -1.0;
        }
        add_history(V, t, k_, -lam, V);
        auto r = V.row(t);
        auto out = Rhr0_.row(t);
        for (int s = 0; s <= t; ++s) out[s] += lam * r[s];
      }
      if (finite_B_) {
        CausalBlock& U = m_.batch[k];
        add_history(U, t, k_, -lam, U);
        for (int s = 0; s < t; ++s) U.at(t, s) -= k_[s];
        auto u = U.row(t);
        auto out = Rvu_.row(t);
        for (int s = 0; s < t; ++s) out[s] += lam * u[s];
      }
      noise_row(k, t);
      m_.diag(k, t) += rv_[t];
      auto& pv = vsum_.block(k);
      auto& ph = hsum_.block(k);
      for (int s = 0; s <= t; ++s) {
        pv[s] += lam * rv_[s];
        ph[s] += lam * lam * rv_[s];
      }
      if (finite_B_) {
        // <v_k(t) u0_k(s)> for s < t; the u0_k(t) variance is added below.
        const double us = m_.u_scale * lam;
        const auto u = m_.batch[k].row(t);
        for (int s = 0; s < t; ++s) ph[s] += lam * us * u[s] * m_.C_delta(s);
      }
    }
    vsum_.reduce(n, row_);
    for (int s = 0; s <= t; ++s) row_[s] += wv_(s);
    detail::fill_symmetric_row(Cv_, t, row_);

    // Online residual: fresh batch each step, so only the diagonal is shared.
    for (int s = 0; s < t; ++s) row_[s] = Cv_(t, s);
    row_[t] = Cv_(t, t) + c_.sigma * c_.sigma;
    detail::fill_symmetric_row(Cd_, t, row_);
    m_.C_delta(t) = Cd_(t, t);

    hsum_.reduce(n, row_);
    for (int s = 0; s <= t; ++s) row_[s] += wh_(s);
    if (finite_B_) row_[t] += m_.u_scale * m_.lambda.sum() * m_.C_delta(t);
    detail::fill_symmetric_row(Ch0_, t, row_);

    stack_.forward(t);
  }

  // Noise part of row t of M_k into rv_.
  void noise_row(int k, int t) {
    const double lam = m_.lambda(k);
    std::fill(rv_.begin(), rv_.begin() + t + 1, 0.0);
    if (finite_N_) {
      const CausalBlock& V = m_.width[k];
      const Matrix& C = stack_.Cg(1);
      const auto r = V.row(t);
      for (int b = 0; b <= t; ++b) {
        double acc = 0.0;
        for (int a = 0; a <= t; ++a) acc += r[a] * C(a, b);
        a_[b] = acc;
      }
      for (int s = 0; s <= t; ++s) {
        const auto q = V.row(s);
        double acc = 0.0;
        for (int b = 0; b <= s; ++b) acc += a_[b] * q[b];
        rv_[s] += m_.r_scale * acc;
      }
    }
    if (finite_B_) {
      const CausalBlock& U = m_.batch[k];
      const auto ut = U.row(t);
      const double us = m_.u_scale * lam;
      for (int s = 0; s <= t; ++s) {
        const auto q = U.row(s);
        double acc = 0.0;
        for (int a = 0; a < s; ++a) acc += ut[a] * q[a] * m_.C_delta(a);
        rv_[s] += us * acc;
      }
    }
  }

  bool finite_step(int t) const {
    for (const Matrix* m : {&Cv_, &Ch0_}) {
      const double d = (*m)(t, t);
      if (!std::isfinite(d) || d > kDivergence) return false;
    }
    const double s = stack_.max_diagonal(t);
    return std::isfinite(s) && s <= kDivergence;
  }

  const StructuredConfig& c_;
  ModeState& m_;
  int T_, K_;
  double gamma_, mem_ = 0.0;
  bool finite_N_, finite_B_;
  Matrix Cv_, Cd_, Ch0_;
  CausalBlock Rhr0_, Rvu_;
  detail::UpperStack stack_;
  PairwiseRows vsum_, hsum_;
  std::vector<double> k_, row_, rv_, a_;
  Vector wv_, wh_;
  int diverged_at_ = -1;
};

}  // namespace

Matrix ModeState::M(int k) const {
  Matrix m(T, T);
  for (int t = 0; t < T; ++t)
    for (int s = 0; s <= t; ++s) {
      double acc = wstar(k) * wstar(k) * target(k, t) * target(k, s);
      if (!width.empty()) {
        const CausalBlock& V = width[k];
        double w = 0.0;
        for (int a = 0; a <= t; ++a)
          for (int b = 0; b <= s; ++b) w += V(t, a) * C_g1(a, b) * V(s, b);
        acc += r_scale * w;
      }
      if (!batch.empty()) {
        const CausalBlock& U = batch[k];
        double u = 0.0;
        for (int a = 0; a < s; ++a) u += U(t, a) * U(s, a) * C_delta(a);
        acc += u_scale * lambda(k) * u;
      }
      m(t, s) = m(s, t) = acc;
    }
  return m;
}

Matrix ModeState::transfer(int k) const {
  return causal_propagate(-lambda(k) * memory, Matrix::Identity(T, T));
}

std::size_t ModeState::bytes() const {
  std::size_t b = sizeof(double) * (target.size() + diag.size() + memory.size() + C_g1.size());
  for (const auto& x : width) b += x.bytes();
  for (const auto& x : batch) b += x.bytes();
  return b;
}

std::size_t structured_memory_estimate(const StructuredConfig& c) {
  const std::size_t K = c.spectrum.modes(), T = c.T;
  const std::size_t packed = T * (T + 1) / 2 * sizeof(double);
  std::size_t blocks = 0;
  if (std::isfinite(c.N)) ++blocks;
  if (std::isfinite(c.B)) ++blocks;
  // per-mode blocks, per-mode vectors, and the upper stack (4L blocks, 2L+4 dense T x T)
  return K * blocks * packed + 2 * K * T * sizeof(double) + 4 * c.L * packed +
         (2 * c.L + 6) * T * T * sizeof(double);
}

StructuredSolution solve_structured_sgd(const StructuredConfig& config) {
  config.validate();
  const std::size_t need = structured_memory_estimate(config);
  if (need > config.memory_cap_bytes)
    throw ContractError("structured solve needs " + std::to_string(need >> 20) + " MiB, above the cap of " +
                        std::to_string(config.memory_cap_bytes >> 20) +
                        " MiB; lower K or T, raise memory_cap_bytes, or set width_inf/batch_inf "
                        "(N, B = inf keep O(K T) per-mode state)");
  StructuredSolution out;
  StructuredEngine engine(config, out.modes);
  engine.run();
  out.solution = engine.collect();
  if (engine.diverged_at() >= 0) throw DivergedError(engine.diverged_at(), std::move(out.solution));
  return out;
}

double theoretical_exponent(double b) {
  if (!(b > 0.0)) throw ContractError("theoretical_exponent: b must be > 0");
  return b < 1.0 ? 2.0 * b / (1.0 + b) : b;
}

namespace {

std::vector<int> log_grid(int t_min, int t_max, int samples) {
  std::vector<int> ts;
  if (t_max <= t_min || samples < 2) {
    for (int t = t_min; t <= t_max; ++t) ts.push_back(t);
    return ts;
  }
  const double a = std::log(static_cast<double>(t_min)), b = std::log(static_cast<double>(t_max));
  for (int i = 0; i < samples; ++i) {
    const int t = static_cast<int>(std::lround(std::exp(a + (b - a) * i / (samples - 1))));
    if (ts.empty() || t != ts.back()) ts.push_back(t);
  }
  return ts;
}

PowerLawFit loglog_fit(const std::vector<int>& ts, const std::vector<double>& y) {
  const int n = static_cast<int>(ts.size());
  PowerLawFit f;
  f.points = n;
  if (n < 2) return f;
  double mx = 0, my = 0;
  std::vector<double> lx(n), ly(n);
  for (int i = 0; i < n; ++i) {
    lx[i] = std::log(static_cast<double>(ts[i]));
    ly[i] = std::log(y[i]);
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (int i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  const double slope = sxy / sxx;
  f.exponent = -slope;
  f.r_squared = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  return f;
}

}  // namespace

PowerLawFit fit_powerlaw(const std::vector<double>& loss, int t_min, int t_max, int samples) {
  if (t_min < 1 || t_max < t_min || t_max >= static_cast<int>(loss.size()))
    throw ContractError("fit_powerlaw: window must satisfy 1 <= t_min <= t_max < curve length");
  const auto ts = log_grid(t_min, t_max, samples);
  std::vector<double> y;
  for (int t : ts) {
    if (!(loss[t] > 0.0)) throw ContractError("fit_powerlaw: non-positive loss at t=" + std::to_string(t));
    y.push_back(loss[t]);
  }
  return loglog_fit(ts, y);
}

NtkDiagnostic ntk_diagnostic(const DmftSolution& sol, double eta, double gamma0, int t_min, int t_max) {
  const Matrix& cg1 = sol.get("C_g1").values();
  const Matrix& rgu = sol.get("R_gu1").values();
  const double eg = eta * gamma0;
  NtkDiagnostic d;
  for (int t = 0; t + 1 < sol.T; ++t) {
    double resp;
    if (eg != 0.0) {
      resp = rgu(t + 1, t) / eg;
    } else {
      // frozen weights: the one-step response density at zero rate
      resp = 1.0;
      for (int l = 2; sol.has("C_g" + std::to_string(l)); ++l) resp += sol.get("C_g" + std::to_string(l))(t, t);
    }
    d.K.push_back(cg1(t, t) + resp);
  }
  const int n = static_cast<int>(d.K.size());
  if (t_max < 0) t_max = n - 1;
  if (t_min <= 0) t_min = std::max(1, t_max / 2);
  if (n < 3 || t_max >= n || t_min >= t_max) return d;
  const auto ts = log_grid(t_min, t_max, 64);
  std::vector<double> y;
  for (int t : ts) {
    const double g = d.K[t] - d.K[0];
    if (!(g > 0.0)) return d;
    y.push_back(g);
  }
  const PowerLawFit f = loglog_fit(ts, y);
  d.growth = -f.exponent;
  d.chi = 1.0 + d.growth;
  d.r_squared = f.r_squared;
  return d;
}

void write_modes_csv(const std::string& path, const ModeState& m) {
  std::ostringstream os;
  os << "k,lambda,target_power,final_M\n" << std::setprecision(17);
  for (int k = 0; k < m.K; ++k)
    os << k + 1 << ',' << m.lambda(k) << ',' << m.lambda(k) * m.wstar(k) * m.wstar(k) << ',' << m.final_M(k) << '\n';
  write_file_atomic(path, os.str());
}

}  // namespace deeplin
