#pragma once

#include "single_site_mc.hpp"

#include <map>
#include <string>

namespace deeplin::oracle {

// Same single-site equations as the sampler, solved exactly: every field is a
// dense coefficient matrix per source, and all kernels are iterated to a fixed
// point from zero (causality makes the iteration terminate).
std::map<std::string, Matrix> dense_single_site(const SiteSetting& s, int T, int* iterations = nullptr);

}  // namespace deeplin::oracle
