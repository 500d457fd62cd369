#include "deeplin/csv.hpp"
#include "deeplin/mlp_dmft.hpp"
#include "deeplin/resnet_dmft.hpp"
#include "deeplin/simulator.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace deeplin;

namespace {

SimConfig small(DataKind data = DataKind::FullBatch) {
  SimConfig c;
  c.D = 40;
  c.N = 30;
  c.L = 3;
  c.gamma0 = 1.0;
  c.eta = 0.05;
  c.sigma = 0.2;
  c.T = 15;
  c.data = data;
  c.P = 60;
  c.B = 20;
  c.seed = 9;
  return c;
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Rng, StreamsAreReproducibleAndDistinct) {
  CounterRng a(5, Stream::Weights), b(5, Stream::Weights), c(5, Stream::Data);
  for (int i = 0; i < 10; ++i) {
    const auto x = a();
    EXPECT_EQ(x, b());
    EXPECT_NE(x, c());
  }
  EXPECT_NE(derive_seed(0, 1), derive_seed(0, 2));
  EXPECT_NE(derive_seed(0, 1), derive_seed(1, 1));
}

TEST(Simulator, SameSeedSameRun) {
  for (DataKind d : {DataKind::Population, DataKind::FullBatch, DataKind::Online}) {
    const SimResult a = train_finite_network(small(d));
    const SimResult b = train_finite_network(small(d));
    EXPECT_EQ(a.test_loss, b.test_loss);
    EXPECT_EQ(a.train_loss, b.train_loss);
    SimConfig other = small(d);
    other.seed = 10;
    EXPECT_NE(train_finite_network(other).test_loss.back(), a.test_loss.back());
  }
}

TEST(Simulator, EnsembleIndependentOfThreads) {
  const EnsembleResult a = monte_carlo_ensemble(small(DataKind::Online), 6, 3, 1);
  const EnsembleResult b = monte_carlo_ensemble(small(DataKind::Online), 6, 3, 3);
  EXPECT_EQ(a.mean_test, b.mean_test);
  EXPECT_EQ(a.stderr_test, b.stderr_test);
}

TEST(Simulator, CsvIsByteIdenticalAcrossRuns) {
  const auto dir = std::filesystem::temp_directory_path() / "deeplin_sim_csv";
  std::filesystem::create_directories(dir);
  const std::string p1 = (dir / "a.csv").string(), p2 = (dir / "b.csv").string();
  write_ensemble_csv(p1, monte_carlo_ensemble(small(), 4, 1, 2));
  write_ensemble_csv(p2, monte_carlo_ensemble(small(), 4, 1, 1));
  EXPECT_EQ(slurp(p1), slurp(p2));
  EXPECT_TRUE(read_csv(p1).has("mean_test"));
  std::filesystem::remove_all(dir);
}

TEST(Simulator, ZeroLearningRateKeepsTheLoss) {
  SimConfig c = small(DataKind::Online);
  c.eta = 0.0;
  const SimResult r = train_finite_network(c);
  for (double l : r.test_loss) EXPECT_EQ(l, r.test_loss[0]);
}

TEST(Simulator, ForwardPassMatchesPredictor) {
  for (Arch a : {Arch::MLP, Arch::ResNet}) {
    SimConfig c = small();
    c.arch = a;
    if (a == Arch::ResNet) c.beta0 = 1.0;
    FiniteNetwork net(c);
    for (int t = 0; t < 3; ++t) net.step();
    Vector x = Vector::LinSpaced(c.D, -1.0, 1.0);
    EXPECT_NEAR(net.forward(x), net.predictor().dot(x), 1e-10);
  }
}

TEST(Simulator, LargeStepsDivergeEverySeed) {
  SimConfig c = small(DataKind::Population);
  c.eta = 5.0;
  c.T = 60;
  const EnsembleResult e = monte_carlo_ensemble(c, 4);
  EXPECT_EQ(e.divergence_fraction, 1.0);
  try {
    train_finite_network(c);
    FAIL();
  } catch (const SimDivergedError& err) {
    EXPECT_GT(err.step(), 0);
    EXPECT_EQ(static_cast<int>(err.partial().test_loss.size()), err.step());
  }
}

TEST(Simulator, RejectsBadConfigs) {
  SimConfig c = small();
  c.N = 0;
  EXPECT_THROW(FiniteNetwork{c}, ContractError);
  c = small();
  c.arch = Arch::ResNet;
  EXPECT_THROW(FiniteNetwork{c}, ContractError);
}

TEST(Simulator, AgreesWithPopulationDmft) {
  SimConfig s;
  s.D = 400;
  s.N = 400;
  s.L = 3;
  s.gamma0 = 1.0;
  s.eta = 0.05;
  s.T = 20;
  s.data = DataKind::Population;
  const EnsembleResult e = monte_carlo_ensemble(s, 40, 2);
  MlpGdConfig m;
  m.L = 3;
  m.gamma0 = 1.0;
  m.eta = 0.05;
  m.T = 20;
  m.nu = 1.0;
  const DmftSolution d = solve_mlp_gd(m);
  for (int t = 0; t < s.T; ++t) EXPECT_NEAR(e.mean_test[t], d.test_loss[t], 4 * e.stderr_test[t] + 0.02 * d.test_loss[t]) << t;
}

TEST(Simulator, ResnetAgreesWithDmft) {
  SimConfig s;
  s.D = 300;
  s.N = 300;
  s.arch = Arch::ResNet;
  s.beta0 = 1.0;
  s.L = 4;
  s.gamma0 = 1.0;
  s.eta = 0.02;
  s.T = 15;
  s.data = DataKind::Population;
  const EnsembleResult e = monte_carlo_ensemble(s, 40, 2);
  ResnetConfig r;
  r.L = 4;
  r.beta0 = 1.0;
  r.gamma0 = 1.0;
  r.eta = 0.02;
  r.T = 15;
  r.nu = 1.0;
  const DmftSolution d = solve_resnet_gd(r);
  for (int t = 0; t < s.T; ++t) EXPECT_NEAR(e.mean_test[t], d.test_loss[t], 4 * e.stderr_test[t] + 0.02 * d.test_loss[t]) << t;
}

TEST(Simulator, EmpiricalKernelsTrackDmft) {
  SimConfig s;
  s.D = 300;
  s.N = 600;
  s.L = 2;
  s.gamma0 = 1.0;
  s.eta = 0.1;
  s.T = 8;
  s.data = DataKind::Population;
  const EmpiricalKernels k = empirical_kernels(s, 4, {1, 2});
  MlpGdConfig m;
  m.L = 2;
  m.gamma0 = 1.0;
  m.eta = 0.1;
  m.T = 8;
  m.nu = 2.0;
  const DmftSolution d = solve_mlp_gd(m);
  const Matrix& ch1 = d.get("C_h1").values();
  const Matrix& cg2 = d.get("C_g2").values();
  EXPECT_LT((k.C_h[0] - ch1).cwiseAbs().maxCoeff(), 0.15 * ch1.cwiseAbs().maxCoeff());
  EXPECT_LT((k.C_g[1] - cg2).cwiseAbs().maxCoeff(), 0.15 * cg2.cwiseAbs().maxCoeff());
}
