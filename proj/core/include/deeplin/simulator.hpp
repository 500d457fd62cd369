#pragma once

#include "deeplin/config.hpp"
#include "deeplin/kernel.hpp"
#include "deeplin/rng.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace deeplin {

enum class Arch { MLP, ResNet };
enum class DataKind { Population, FullBatch, Online };

struct SimConfig {
  int D = 100;
  int N = 50;
  Arch arch = Arch::MLP;
  int L = 2;
  double gamma0 = 1.0;
  double eta = 0.05;
  double sigma = 0.0;
  int T = 10;
  DataKind data = DataKind::FullBatch;
  int P = 100;  // full batch
  int B = 100;  // online
  std::optional<SpectrumSpec> spectrum;  // structured covariates; D = modes
  Parameterization parameterization = Parameterization::MuP;
  bool centering = true;
  std::optional<double> beta_raw;
  std::optional<double> beta0;
  bool scaled = true;
  double target_variance = 1.0;
  std::uint64_t seed = 0;
  std::vector<int> probe_layers;  // layers whose kernels are recorded
  std::size_t kernel_memory_cap = std::size_t(1) << 30;

  int input_dim() const;
  double beta() const;
  double effective_gamma0() const;
  void validate() const;
};

struct SimResult {
  std::vector<double> test_loss;
  std::vector<double> train_loss;
  int diverged_at = -1;
  std::uint64_t samples_drawn = 0;
  // Indexed by layer 0..L; empty unless probed. C_g[0] is unused.
  std::vector<Matrix> C_h, C_g;
};

class SimDivergedError : public std::runtime_error {
 public:
  SimDivergedError(int step, SimResult partial);
  int step() const { return step_; }
  const SimResult& partial() const { return partial_; }

 private:
  int step_;
  SimResult partial_;
};

// A finite deep linear network in training. Coordinates are normalized so that
// x ~ N(0, diag(lambda)) and y = wstar . x + sigma eps; isotropic data uses
// lambda = 1 and wstar ~ N(0, target_variance / D).
class FiniteNetwork {
 public:
  explicit FiniteNetwork(const SimConfig& config);

  // Effective linear map x -> f(x).
  Vector predictor() const;
  // f(x) by an explicit forward pass through every layer.
  double forward(const Vector& x) const;
  double test_loss() const;
  const Vector& wstar() const { return wstar_; }
  const Vector& lambda() const { return lambda_; }

  struct StepStats {
    double test_loss = 0.0;
    double train_loss = 0.0;
  };
  // One GD/SGD update. Records kernels of probed layers when h, g are given.
  StepStats step(std::vector<Vector>* h = nullptr, std::vector<Vector>* g = nullptr);
  bool finite() const;
  std::uint64_t samples_drawn() const { return samples_; }
  int time() const { return t_; }

 private:
  Vector error() const;
  Vector input_field(const Vector& v, double* train_loss);

  SimConfig c_;
  int D_, N_, L_;
  double gamma_, beta_;
  Vector lambda_, sqrt_lambda_, wstar_;
  Matrix W0_;
  std::vector<Matrix> W_;  // W_[l] maps layer l to l+1, l = 1..L-1
  Vector wL_;
  Vector w0_;  // predictor at t = 0
  Matrix X_;
  Vector eps_;
  CounterRng weights_rng_, data_rng_, noise_rng_, batch_rng_;
  std::uint64_t samples_ = 0;
  int t_ = 0;
};

SimResult train_finite_network(const SimConfig& config);

struct EnsembleResult {
  std::vector<double> mean_test, stderr_test, mean_train, stderr_train;
  double divergence_fraction = 0.0;
  int n_seeds = 0;
};

// Seeds are derive_seed(base_seed, i). Diverged seeds are counted and left out
// of the means.
EnsembleResult monte_carlo_ensemble(const SimConfig& config, int n_seeds, std::uint64_t base_seed = 0,
                                    int threads = 1);
EnsembleResult monte_carlo_ensemble(const SimConfig& config, const std::vector<std::uint64_t>& seeds,
                                    int threads = 1);

struct EmpiricalKernels {
  std::vector<int> layers;
  std::vector<Matrix> C_h, C_g;  // aligned with layers; C_g empty for layer 0
};

EmpiricalKernels empirical_kernels(const SimConfig& config, std::uint64_t seed, const std::vector<int>& layers);

void write_sim_csv(const std::string& path, const SimResult& r);
void write_ensemble_csv(const std::string& path, const EnsembleResult& e);

}  // namespace deeplin
