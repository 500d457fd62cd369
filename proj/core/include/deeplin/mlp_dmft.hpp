#pragma once

#include "deeplin/config.hpp"
#include "deeplin/solution.hpp"

namespace deeplin {

// Full-batch GD in the proportional limit. Throws DivergedError.
DmftSolution solve_mlp_gd(const MlpGdConfig& config);

// The alpha -> infinity limit (optionally also nu -> infinity).
DmftSolution population_gd_reference(const MlpGdConfig& config, bool infinite_width = false);

}  // namespace deeplin
