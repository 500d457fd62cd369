#include "deeplin/simulator.hpp"

#include "deeplin/csv.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

namespace deeplin {

int SimConfig::input_dim() const { return spectrum ? spectrum->modes() : D; }

double SimConfig::beta() const {
  if (arch != Arch::ResNet) return 0.0;
  if (beta_raw) return *beta_raw;
  return scaled ? *beta0 / std::sqrt(static_cast<double>(L)) : *beta0;
}

double SimConfig::effective_gamma0() const {
  if (parameterization == Parameterization::MuP) return gamma0;
  if (spectrum) return gamma0 / std::sqrt(static_cast<double>(N));
  return gamma0 / std::sqrt(static_cast<double>(N) / input_dim());
}

void SimConfig::validate() const {
  if (input_dim() < 1 || N < 1 || L < 1 || T < 1) throw ContractError("SimConfig: sizes must be positive");
  if (!(gamma0 > 0.0) || eta < 0.0 || sigma < 0.0) throw ContractError("SimConfig: bad gamma0/eta/sigma");
  if (data == DataKind::FullBatch && P < 1) throw ContractError("SimConfig: P must be >= 1");
  if (data == DataKind::Online && B < 1) throw ContractError("SimConfig: B must be >= 1");
  if (arch == Arch::ResNet && beta_raw.has_value() == beta0.has_value())
    throw ContractError("SimConfig: set exactly one of beta and beta0 for a ResNet");
  if (spectrum) spectrum->validate();
}

SimDivergedError::SimDivergedError(int step, SimResult partial)
    : std::runtime_error("diverged at step " + std::to_string(step)), step_(step), partial_(std::move(partial)) {}

namespace {

void fill_normal(Matrix& m, CounterRng& rng) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.normal();
}

void fill_normal(Vector& v, CounterRng& rng) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.normal();
}

}  // namespace

FiniteNetwork::FiniteNetwork(const SimConfig& config)
    : c_(config),
      D_(config.input_dim()),
      N_(config.N),
      L_(config.L),
      gamma_(config.effective_gamma0()),
      beta_(config.beta()),
      weights_rng_(config.seed, Stream::Weights),
      data_rng_(config.seed, Stream::Data),
      noise_rng_(config.seed, Stream::Noise),
      batch_rng_(config.seed, Stream::Batches) {
  c_.validate();
  if (c_.spectrum) {
    const auto l = c_.spectrum->eigenvalues();
    const auto w = c_.spectrum->target();
    lambda_ = Eigen::Map<const Vector>(l.data(), D_);
    wstar_ = Eigen::Map<const Vector>(w.data(), D_);
  } else {
    lambda_ = Vector::Ones(D_);
    wstar_.resize(D_);
    fill_normal(wstar_, data_rng_);
    wstar_ *= std::sqrt(c_.target_variance / D_);
  }
  sqrt_lambda_ = lambda_.cwiseSqrt();

  W0_.resize(N_, D_);
  fill_normal(W0_, weights_rng_);
  W_.resize(L_);
  for (int l = 1; l < L_; ++l) {
    W_[l].resize(N_, N_);
    fill_normal(W_[l], weights_rng_);
  }
  wL_.resize(N_);
  fill_normal(wL_, weights_rng_);

  if (c_.data == DataKind::FullBatch) {
    X_.resize(c_.P, D_);
    fill_normal(X_, data_rng_);
    X_ = X_ * sqrt_lambda_.asDiagonal();
    eps_.resize(c_.P);
    fill_normal(eps_, noise_rng_);
    samples_ = c_.P;
  }
  w0_ = c_.centering ? predictor() : Vector::Zero(D_);
}

Vector FiniteNetwork::predictor() const {
  // g^1 by backpropagating the readout, then W0^T g^1 / (N gamma).
  const double sN = std::sqrt(static_cast<double>(N_));
  Vector g = wL_;
  for (int l = L_ - 1; l >= 1; --l) {
    Vector back = W_[l].transpose() * g / sN;
    g = c_.arch == Arch::ResNet ? Vector(g + beta_ * back) : back;
  }
  return W0_.transpose() * g / (N_ * gamma_);
}

double FiniteNetwork::forward(const Vector& x) const {
  const double sN = std::sqrt(static_cast<double>(N_));
  Vector h = W0_ * x;
  for (int l = 1; l < L_; ++l) {
    Vector next = W_[l] * h / sN;
    h = c_.arch == Arch::ResNet ? Vector(h + beta_ * next) : next;
  }
  return wL_.dot(h) / (N_ * gamma_);
}

Vector FiniteNetwork::error() const { return wstar_ - predictor() + w0_; }

double FiniteNetwork::test_loss() const {
  const Vector v = error();
  return v.cwiseAbs2().dot(lambda_) + c_.sigma * c_.sigma;
}

Vector FiniteNetwork::input_field(const Vector& v, double* train_loss) {
  switch (c_.data) {
    case DataKind::Population:
      *train_loss = v.cwiseAbs2().dot(lambda_) + c_.sigma * c_.sigma;
      return lambda_.cwiseProduct(v);
    case DataKind::FullBatch: {
      Vector delta = X_ * v + c_.sigma * eps_;
      *train_loss = delta.squaredNorm() / c_.P;
      return X_.transpose() * delta / c_.P;
    }
    case DataKind::Online: {
      // x_mu = sqrt(lambda) z_mu. Split z_mu along a = sqrt(lambda) v: the batch
      // enters only through sum_mu z_mu Delta_mu, sampled exactly in O(B + D).
      const int B = c_.B;
      Vector a = sqrt_lambda_.cwiseProduct(v);
      const double na = a.norm();
      Vector ahat = Vector::Zero(D_);
      if (na > 0.0) ahat = a / na;
      else ahat(0) = 1.0;
      double proj = 0.0, delta2 = 0.0;
      for (int mu = 0; mu < B; ++mu) {
        const double c = batch_rng_.normal();
        const double d = c * na + c_.sigma * noise_rng_.normal();
        proj += c * d;
        delta2 += d * d;
      }
      Vector zeta(D_);
      fill_normal(zeta, batch_rng_);
      zeta -= ahat * ahat.dot(zeta);
      samples_ += B;
      *train_loss = delta2 / B;
      Vector s = ahat * proj + std::sqrt(delta2) * zeta;
      return sqrt_lambda_.cwiseProduct(s) / B;
    }
  }
  return {};
}

FiniteNetwork::StepStats FiniteNetwork::step(std::vector<Vector>* hs, std::vector<Vector>* gs) {
  const double sN = std::sqrt(static_cast<double>(N_));
  const bool res = c_.arch == Arch::ResNet;
  // Backward fields g^L..g^1 at the current weights.
  std::vector<Vector> g(L_ + 1);
  g[L_] = wL_;
  for (int l = L_ - 1; l >= 1; --l) {
    Vector back = W_[l].transpose() * g[l + 1] / sN;
    g[l] = res ? Vector(g[l + 1] + beta_ * back) : back;
  }
  const Vector v = wstar_ - W0_.transpose() * g[1] / (N_ * gamma_) + w0_;
  StepStats s;
  s.test_loss = v.cwiseAbs2().dot(lambda_) + c_.sigma * c_.sigma;

  std::vector<Vector> h(L_ + 1);
  h[0] = input_field(v, &s.train_loss);
  h[1] = W0_ * h[0];
  for (int l = 1; l < L_; ++l) {
    Vector next = W_[l] * h[l] / sN;
    h[l + 1] = res ? Vector(h[l] + beta_ * next) : next;
  }

  const double eg = c_.eta * gamma_;
  W0_.noalias() += eg * g[1] * h[0].transpose();
  const double branch = res ? beta_ : 1.0;
  for (int l = 1; l < L_; ++l) W_[l].noalias() += (eg * branch / sN) * g[l + 1] * h[l].transpose();
  wL_ += eg * h[L_];

  if (hs) *hs = std::move(h);
  if (gs) *gs = std::move(g);
  ++t_;
  return s;
}

bool FiniteNetwork::finite() const {
  if (!W0_.allFinite() || !wL_.allFinite()) return false;
  for (int l = 1; l < L_; ++l)
    if (!W_[l].allFinite()) return false;
  return true;
}

namespace {

SimResult run(const SimConfig& config) {
  FiniteNetwork net(config);
  SimResult r;
  const int T = config.T;
  const bool probe = !config.probe_layers.empty();
  std::vector<Matrix> H, G;
  if (probe) {
    const std::size_t need = std::size_t(2) * T * std::max(config.N, config.input_dim()) *
                             config.probe_layers.size() * sizeof(double);
    if (need > config.kernel_memory_cap)
      throw std::runtime_error("empirical kernels: T*N storage exceeds the memory cap");
    H.resize(config.L + 1);
    G.resize(config.L + 1);
    for (int l : config.probe_layers) {
      if (l < 0 || l > config.L) throw ContractError("probe layer out of range");
      H[l].resize(T, l == 0 ? config.input_dim() : config.N);
      if (l > 0) G[l].resize(T, config.N);
    }
  }
  std::vector<Vector> h, g;
  for (int t = 0; t < T; ++t) {
    auto s = net.step(probe ? &h : nullptr, probe ? &g : nullptr);
    if (!std::isfinite(s.test_loss) || !std::isfinite(s.train_loss) || s.test_loss > 1e12 * std::max(1.0, r.test_loss.empty() ? s.test_loss : r.test_loss.front()) || !net.finite()) {
      r.diverged_at = t;
      r.samples_drawn = net.samples_drawn();
      throw SimDivergedError(t, std::move(r));
    }
    r.test_loss.push_back(s.test_loss);
    r.train_loss.push_back(s.train_loss);
    if (probe)
      for (int l : config.probe_layers) {
        H[l].row(t) = h[l].transpose();
        if (l > 0) G[l].row(t) = g[l].transpose();
      }
  }
  r.samples_drawn = net.samples_drawn();
  if (probe) {
    r.C_h.resize(config.L + 1);
    r.C_g.resize(config.L + 1);
    for (int l : config.probe_layers) {
      const double norm = l == 0 ? 1.0 : 1.0 / config.N;
      r.C_h[l] = norm * H[l] * H[l].transpose();
      if (l > 0) r.C_g[l] = norm * G[l] * G[l].transpose();
    }
  }
  return r;
}

}  // namespace

SimResult train_finite_network(const SimConfig& config) { return run(config); }

EnsembleResult monte_carlo_ensemble(const SimConfig& config, int n_seeds, std::uint64_t base_seed, int threads) {
  std::vector<std::uint64_t> seeds(n_seeds);
  for (int i = 0; i < n_seeds; ++i) seeds[i] = derive_seed(base_seed, i);
  return monte_carlo_ensemble(config, seeds, threads);
}

EnsembleResult monte_carlo_ensemble(const SimConfig& config, const std::vector<std::uint64_t>& seeds, int threads) {
  const int n = static_cast<int>(seeds.size());
  if (n < 2) throw ContractError("monte_carlo_ensemble: need at least 2 seeds");
  std::vector<std::vector<double>> test(n), train(n);
  std::vector<char> diverged(n, 0);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      SimConfig c = config;
      c.seed = seeds[i];
      c.probe_layers.clear();
      try {
        SimResult r = run(c);
        test[i] = std::move(r.test_loss);
        train[i] = std::move(r.train_loss);
      } catch (const SimDivergedError&) {
        diverged[i] = 1;
      }
    }
  };
  const int nt = std::max(1, std::min(threads, n));
  std::vector<std::thread> pool;
  for (int k = 1; k < nt; ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  EnsembleResult e;
  e.n_seeds = n;
  const int T = config.T;
  int ok = 0;
  for (int i = 0; i < n; ++i) ok += diverged[i] ? 0 : 1;
  e.divergence_fraction = static_cast<double>(n - ok) / n;
  auto stats = [&](const std::vector<std::vector<double>>& runs, std::vector<double>& mean,
                   std::vector<double>& se) {
    mean.assign(T, NAN);
    se.assign(T, NAN);
    if (ok == 0) return;
    for (int t = 0; t < T; ++t) {
      double m = 0.0;
      for (int i = 0; i < n; ++i)
        if (!diverged[i]) m += runs[i][t];
      m /= ok;
      double var = 0.0;
      for (int i = 0; i < n; ++i)
        if (!diverged[i]) var += (runs[i][t] - m) * (runs[i][t] - m);
      mean[t] = m;
      se[t] = ok > 1 ? std::sqrt(var / (ok - 1) / ok) : NAN;
    }
  };
  stats(test, e.mean_test, e.stderr_test);
  stats(train, e.mean_train, e.stderr_train);
  return e;
}

EmpiricalKernels empirical_kernels(const SimConfig& config, std::uint64_t seed, const std::vector<int>& layers) {
  SimConfig c = config;
  c.seed = seed;
  c.probe_layers = layers;
  SimResult r = run(c);
  EmpiricalKernels k;
  k.layers = layers;
  for (int l : layers) {
    k.C_h.push_back(r.C_h[l]);
    k.C_g.push_back(l > 0 ? r.C_g[l] : Matrix());
  }
  return k;
}

void write_sim_csv(const std::string& path, const SimResult& r) {
  std::ostringstream os;
  os << "step,test_loss,train_loss\n" << std::setprecision(17);
  for (std::size_t t = 0; t < r.test_loss.size(); ++t)
    os << t << ',' << r.test_loss[t] << ',' << r.train_loss[t] << '\n';
  write_file_atomic(path, os.str());
}

void write_ensemble_csv(const std::string& path, const EnsembleResult& e) {
  std::ostringstream os;
  os << "step,mean_test,stderr_test,mean_train,stderr_train,divergence_fraction\n" << std::setprecision(17);
  for (std::size_t t = 0; t < e.mean_test.size(); ++t)
    os << t << ',' << e.mean_test[t] << ',' << e.stderr_test[t] << ',' << e.mean_train[t] << ','
       << e.stderr_train[t] << ',' << e.divergence_fraction << '\n';
  write_file_atomic(path, os.str());
}

}  // namespace deeplin
