#pragma once

#include "deeplin/config.hpp"
#include "deeplin/solution.hpp"

namespace deeplin::detail {

enum class DataSetting { FullBatch, Online };

struct IsotropicProblem {
  NetworkParams net;
  double gamma0 = 1.0;  // effective
  double nu = kInf;
  double data_ratio = kInf;  // alpha or alpha_b
  DataSetting setting = DataSetting::FullBatch;
};

DmftSolution solve_isotropic(const IsotropicProblem& p);

}  // namespace deeplin::detail
