#pragma once

#include "deeplin/config.hpp"
#include "deeplin/solution.hpp"

#include <vector>

namespace deeplin {

// One-pass online SGD with batch ratio alpha_b. Throws DivergedError.
DmftSolution solve_online_sgd(const SgdConfig& config);

struct EarlyTimeFactor {
  double rho = 0.0;
  bool blows_up = false;
  double threshold_eta_L = 0.0;
};

EarlyTimeFactor early_time_factor(double eta, int L, double alpha_b, double nu);

struct EarlyTimeRow {
  int t = 0;
  double dmft_loss = 0.0;
  double approx_loss = 0.0;
  double rel_gap = 0.0;
};

// Rows stop early if the dynamics diverge before `steps`.
std::vector<EarlyTimeRow> early_time_compare(const SgdConfig& config, int steps);
void write_early_time_csv(const std::string& path, const std::vector<EarlyTimeRow>& rows);

}  // namespace deeplin
