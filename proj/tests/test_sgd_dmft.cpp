#include "dense_oracle.hpp"
#include "single_site_mc.hpp"

#include "deeplin/mlp_dmft.hpp"
#include "deeplin/sgd_dmft.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace deeplin;

namespace {

SgdConfig base() {
  SgdConfig c;
  c.L = 2;
  c.gamma0 = 1.0;
  c.eta = 0.15;
  c.sigma = 0.2;
  c.nu = 1.5;
  c.alpha_b = 0.7;
  c.T = 7;
  return c;
}

oracle::SiteSetting site(const SgdConfig& c) {
  oracle::SiteSetting s;
  s.online = true;
  s.L = c.L;
  s.gamma = c.effective_gamma0();
  s.eta = c.eta;
  s.mem = c.eta;
  s.nu = c.nu;
  s.ratio = c.alpha_b;
  s.sigma = c.sigma;
  s.centering = c.centering;
  return s;
}

}  // namespace

TEST(OnlineSgd, MatchesDenseOracle) {
  for (int L : {1, 3}) {
    SgdConfig c = base();
    c.L = L;
    const DmftSolution sol = solve_online_sgd(c);
    for (const auto& [name, m] : oracle::dense_single_site(site(c), c.T))
      EXPECT_LT((sol.get(name).values() - m).cwiseAbs().maxCoeff(), 1e-10) << name;
  }
}

TEST(OnlineSgd, MonteCarloSanity) {
  SgdConfig c = base();
  c.T = 4;
  const DmftSolution sol = solve_online_sgd(c);
  const auto check = oracle::compare_with(sol, oracle::sample_single_site(sol, site(c), 200000, 5));
  EXPECT_LT(check.max_z, 5.0) << check.worst;
}

TEST(OnlineSgd, InfiniteBatchIsPopulationGd) {
  SgdConfig c = base();
  c.alpha_b = kInf;
  c.T = 15;
  MlpGdConfig m;
  static_cast<NetworkParams&>(m) = c;
  m.nu = c.nu;
  const DmftSolution a = solve_online_sgd(c);
  const DmftSolution b = population_gd_reference(m);
  for (int t = 0; t < c.T; ++t) EXPECT_NEAR(a.test_loss[t], b.test_loss[t], 1e-10);
}

TEST(OnlineSgd, ZeroLearningRateIsConstant) {
  SgdConfig c = base();
  c.eta = 0.0;
  for (double l : solve_online_sgd(c).test_loss) EXPECT_NEAR(l, 1.0 + c.sigma * c.sigma, 1e-14);
}

TEST(OnlineSgd, NoiseIsTimeLocal) {
  const DmftSolution sol = solve_online_sgd(base());
  const Matrix& cd = sol.get("C_Delta").values();
  const Matrix& cv = sol.get("C_v").values();
  for (int t = 0; t < sol.T; ++t)
    for (int s = 0; s < sol.T; ++s) {
      const double expect = cv(t, s) + (t == s ? 0.04 : 0.0);
      EXPECT_NEAR(cd(t, s), expect, 1e-12);
    }
  EXPECT_EQ(sol.get("R_Delta").values(), Matrix::Identity(sol.T, sol.T));
  // batch loss is the pre-update residual variance
  for (int t = 0; t < sol.T; ++t) EXPECT_NEAR(sol.train_loss[t], sol.test_loss[t], 1e-12);
}

TEST(OnlineSgd, MonotoneInWidthAndBatch) {
  SgdConfig c = base();
  c.sigma = 0.0;
  c.eta = 0.05;
  c.T = 30;
  std::vector<double> prev;
  for (double nu : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    c.nu = nu;
    const auto loss = solve_online_sgd(c).test_loss;
    if (!prev.empty())
      for (int t = 0; t < c.T; ++t) EXPECT_LE(loss[t], prev[t] + 1e-6) << "nu=" << nu << " t=" << t;
    prev = loss;
  }
  c.nu = 1.0;
  prev.clear();
  for (double ab : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    c.alpha_b = ab;
    const auto loss = solve_online_sgd(c).test_loss;
    if (!prev.empty())
      for (int t = 0; t < c.T; ++t) EXPECT_LE(loss[t], prev[t] + 1e-6) << "alpha_b=" << ab << " t=" << t;
    prev = loss;
  }
}

TEST(EarlyTime, FactorAtFigureConfig) {
  const EarlyTimeFactor f = early_time_factor(0.1, 4, 0.05, 0.25);
  EXPECT_NEAR(f.rho, 28.76, 1e-10);
  EXPECT_TRUE(f.blows_up);
}

TEST(EarlyTime, InfiniteBatchAndWidthLimit) {
  const EarlyTimeFactor f = early_time_factor(0.3, 3, kInf, kInf);
  EXPECT_NEAR(f.rho, (1 - 0.9) * (1 - 0.9), 1e-14);
  EXPECT_NEAR(f.threshold_eta_L, 2.0, 1e-14);
  const EarlyTimeFactor g = early_time_factor(0.25, 4, 0.5, 2.0);
  EXPECT_GT(g.rho, 0.0);
}

TEST(EarlyTime, CompareTable) {
  SgdConfig c = base();
  c.eta = 0.0;
  for (const auto& r : early_time_compare(c, 3)) EXPECT_EQ(r.rel_gap, 0.0);
  c = base();
  c.L = 4;
  c.nu = 0.25;
  c.alpha_b = 0.05;
  c.eta = 0.1;
  const auto rows = early_time_compare(c, 4);
  ASSERT_GE(rows.size(), 2u);
  EXPECT_GT(rows[1].dmft_loss, rows[0].dmft_loss);
  EXPECT_GT(rows[1].approx_loss, rows[0].approx_loss);
  EXPECT_THROW(early_time_compare(c, 6), ContractError);
}

// First step, exact: v(1) = (1 - k) w* - k u0(0) - (r0(1) - r0(0)) with
// k = eta (L + 1); the closed form factor keeps eta L.
TEST(EarlyTime, ExactFirstStep) {
  SgdConfig c;
  c.L = 4;
  c.nu = 0.25;
  c.alpha_b = 0.05;
  c.eta = 0.1;
  c.T = 2;
  const double k = c.eta * (c.L + 1);
  const double p3 = 4.0 * 5.0 * 9.0 / 6.0;
  const double width = c.eta * c.eta * p3 / c.nu * (1.0 + 1.0 / c.alpha_b);
  const double expect = (1 - k) * (1 - k) + k * k / c.alpha_b + width;
  EXPECT_NEAR(solve_online_sgd(c).test_loss[1], expect, 1e-10);
}
