#include "dense_oracle.hpp"
#include "single_site_mc.hpp"

#include "deeplin/mlp_dmft.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace deeplin;

namespace {

oracle::SiteSetting site(const MlpGdConfig& c) {
  oracle::SiteSetting s;
  s.online = false;
  s.L = c.L;
  s.gamma = c.effective_gamma0();
  s.eta = c.eta;
  s.mem = c.memory == MemoryCoefficient::Eta ? c.eta : c.eta * s.gamma;
  s.nu = c.nu;
  s.ratio = c.alpha;
  s.sigma = c.sigma;
  s.target_variance = c.target_variance;
  s.centering = c.centering;
  return s;
}

double max_gap(const DmftSolution& sol, const std::map<std::string, Matrix>& ref) {
  double gap = 0.0;
  for (const auto& [name, m] : ref) gap = std::max(gap, (sol.get(name).values() - m).cwiseAbs().maxCoeff());
  return gap;
}

MlpGdConfig base() {
  MlpGdConfig c;
  c.L = 2;
  c.gamma0 = 1.3;
  c.eta = 0.2;
  c.sigma = 0.3;
  c.nu = 1.5;
  c.alpha = 2.0;
  c.T = 7;
  return c;
}

}  // namespace

TEST(MlpGd, MatchesDenseOracle) {
  for (int L : {1, 2, 3}) {
    for (bool centering : {true, false}) {
      MlpGdConfig c = base();
      c.L = L;
      c.centering = centering;
      const DmftSolution sol = solve_mlp_gd(c);
      EXPECT_LT(max_gap(sol, oracle::dense_single_site(site(c), c.T)), 1e-10) << "L=" << L;
    }
  }
}

TEST(MlpGd, MatchesDenseOracleNtkAndMemoryForms) {
  MlpGdConfig c = base();
  c.parameterization = Parameterization::NTK;
  c.nu = 3.0;
  EXPECT_LT(max_gap(solve_mlp_gd(c), oracle::dense_single_site(site(c), c.T)), 1e-10);
  c = base();
  c.memory = MemoryCoefficient::EtaGamma0;
  EXPECT_LT(max_gap(solve_mlp_gd(c), oracle::dense_single_site(site(c), c.T)), 1e-10);
  c = base();
  c.nu = kInf;
  c.alpha = kInf;
  EXPECT_LT(max_gap(solve_mlp_gd(c), oracle::dense_single_site(site(c), c.T)), 1e-10);
}

TEST(MlpGd, MonteCarloSanity) {
  MlpGdConfig c = base();
  c.T = 4;
  const DmftSolution sol = solve_mlp_gd(c);
  const auto mc = oracle::sample_single_site(sol, site(c), 200000, 11);
  const auto check = oracle::compare_with(sol, mc, 3.0);
  EXPECT_LT(check.max_z, 5.0) << check.worst;
  EXPECT_GT(check.entries, 100);
}

TEST(MlpGd, ZeroLearningRateIsConstant) {
  MlpGdConfig c = base();
  c.eta = 0.0;
  const DmftSolution sol = solve_mlp_gd(c);
  for (double l : sol.test_loss) EXPECT_NEAR(l, 1.0 + c.sigma * c.sigma, 1e-14);
}

// Lazy, infinite width, population data: v(t) = (1 - eta (L+1))^t w*.
TEST(MlpGd, LazyPopulationClosedForm) {
  MlpGdConfig c;
  c.L = 3;
  c.gamma0 = 1e-5;
  c.eta = 0.07;
  c.T = 12;
  const DmftSolution sol = solve_mlp_gd(c);
  for (int t = 0; t < c.T; ++t) EXPECT_NEAR(sol.test_loss[t], std::pow(1.0 - 0.07 * 4, 2 * t), 1e-8);
}

TEST(MlpGd, InfiniteDataEqualsPopulationReference) {
  MlpGdConfig c = base();
  c.alpha = kInf;
  const DmftSolution a = solve_mlp_gd(c);
  const DmftSolution b = population_gd_reference(base());
  for (int t = 0; t < c.T; ++t) EXPECT_EQ(a.test_loss[t], b.test_loss[t]);
}

TEST(MlpGd, KernelsPassInvariants) {
  for (int L : {1, 4}) {
    MlpGdConfig c = base();
    c.L = L;
    c.eta = 0.05;
    c.T = 20;
    const DmftSolution sol = solve_mlp_gd(c);
    for (const auto& k : sol.correlations) EXPECT_TRUE(check_kernel(k).pass) << k.name();
    for (const auto& k : sol.responses) EXPECT_TRUE(check_kernel(k).pass) << k.name();
  }
}

TEST(MlpGd, LossDecompositionSumsToLoss) {
  const DmftSolution sol = solve_mlp_gd(base());
  const LossDecomposition d = loss_decomposition(sol);
  for (int t = 0; t < sol.T; ++t)
    EXPECT_NEAR(d.bias[t] + d.width_variance[t] + d.data_variance[t] + d.noise, sol.test_loss[t], 1e-10);
}

TEST(MlpGd, DivergenceCarriesPartialSolution) {
  MlpGdConfig c = base();
  c.eta = 3.0;
  c.T = 60;
  try {
    solve_mlp_gd(c);
    FAIL() << "expected divergence";
  } catch (const DivergedError& e) {
    EXPECT_GT(e.step(), 0);
    EXPECT_EQ(static_cast<int>(e.partial().test_loss.size()), e.step());
    EXPECT_NE(std::string(e.what()).find("diverged"), std::string::npos);
  }
}

TEST(MlpGd, RejectsBadConfig) {
  MlpGdConfig c = base();
  c.nu = kInf;
  c.parameterization = Parameterization::NTK;
  EXPECT_THROW(solve_mlp_gd(c), ContractError);
  c = base();
  c.alpha = -1.0;
  EXPECT_THROW(solve_mlp_gd(c), ContractError);
}

// Long full-batch training with label noise overfits near alpha = 1, so the
// final test loss is not monotone in the amount of data.
TEST(MlpGd, OverfittingNonMonotoneInData) {
  MlpGdConfig c;
  c.L = 4;
  c.gamma0 = 1.0;
  c.sigma = 0.5;
  c.nu = 1.0;
  c.eta = 0.05;
  c.T = 400;
  auto final_loss = [&](double alpha) {
    MlpGdConfig x = c;
    x.alpha = alpha;
    return solve_mlp_gd(x).test_loss.back();
  };
  const double small = final_loss(0.5), mid = final_loss(1.0), large = final_loss(2.0);
  EXPECT_GT(mid, small);
  EXPECT_GT(mid, large);
  EXPECT_NEAR(mid, 1.6286292091233974, 1e-8);  // pinned
}
