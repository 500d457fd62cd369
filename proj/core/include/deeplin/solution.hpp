#pragma once

#include "deeplin/kernel.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace deeplin {

struct DmftSolution {
  int T = 0;
  std::vector<Kernel> correlations;
  std::vector<Kernel> responses;
  std::vector<double> test_loss;
  std::vector<double> train_loss;

  // Inputs of the test-error decomposition.
  double sigma = 0.0;
  double target_variance = 1.0;
  double width_coefficient = 0.0;  // variance scale of r0
  double data_coefficient = 0.0;   // variance scale of u0
  bool data_noise_time_local = false;
  Vector target_transfer;  // coefficient of v(t) on w*

  std::vector<std::string> warnings;

  const Kernel& get(const std::string& name) const;
  const Kernel* find(const std::string& name) const;
  bool has(const std::string& name) const { return find(name) != nullptr; }
};

class DivergedError : public std::runtime_error {
 public:
  DivergedError(int step, DmftSolution partial);
  int step() const { return step_; }
  const DmftSolution& partial() const { return partial_; }

 private:
  int step_;
  DmftSolution partial_;
};

struct LossDecomposition {
  std::vector<double> bias;
  std::vector<double> width_variance;
  std::vector<double> data_variance;
  double noise = 0.0;
};

LossDecomposition loss_decomposition(const DmftSolution& sol);

// Writes every kernel as <dir>/<name>.txt and <dir>/losses.csv.
void write_solution(const std::string& dir, const DmftSolution& sol, int diverged_at = -1);
void write_losses_csv(const std::string& path, const DmftSolution& sol, int diverged_at = -1);

}  // namespace deeplin
