#include "deeplin/causal_block.hpp"
#include "deeplin/kernel.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace deeplin;

namespace {

Matrix random_psd(int T, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> n;
  Matrix a(T, T);
  for (int i = 0; i < T; ++i)
    for (int j = 0; j < T; ++j) a(i, j) = n(gen);
  return a * a.transpose();
}

Matrix random_lower(int T, unsigned seed, bool strict) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> n;
  Matrix a = Matrix::Zero(T, T);
  for (int i = 0; i < T; ++i)
    for (int j = 0; j < (strict ? i : i + 1); ++j) a(i, j) = n(gen);
  return a;
}

}  // namespace

TEST(Kernel, RejectsNonSquare) {
  EXPECT_THROW(Kernel("x", KernelKind::Correlation, Matrix::Zero(2, 3)), ContractError);
  EXPECT_THROW(TimeGrid(0), ContractError);
}

TEST(Kernel, CorrelationChecks) {
  Matrix c = random_psd(6, 1);
  EXPECT_TRUE(check_kernel(Kernel("c", KernelKind::Correlation, c)).pass);
  Matrix asym = c;
  asym(0, 3) += 1e-6;
  EXPECT_FALSE(check_kernel(Kernel("c", KernelKind::Correlation, asym)).pass);
  Matrix indefinite = c - 2.0 * c.trace() * Matrix::Identity(6, 6);
  EXPECT_FALSE(check_kernel(Kernel("c", KernelKind::Correlation, indefinite)).pass);
  Matrix bad = c;
  bad(2, 2) = std::nan("");
  EXPECT_FALSE(check_kernel(Kernel("c", KernelKind::Correlation, bad)).pass);
}

TEST(Kernel, ResponseChecks) {
  Matrix r = random_lower(5, 2, true);
  EXPECT_TRUE(check_kernel(Kernel("r", KernelKind::Response, r, Diagonal::Strict)).pass);
  Matrix acausal = r;
  acausal(1, 3) = 0.5;
  EXPECT_FALSE(check_kernel(Kernel("r", KernelKind::Response, acausal, Diagonal::Strict)).pass);
  Matrix unit = r + Matrix::Identity(5, 5);
  EXPECT_TRUE(check_kernel(Kernel("r", KernelKind::Response, unit, Diagonal::Unit)).pass);
  EXPECT_FALSE(check_kernel(Kernel("r", KernelKind::Response, unit, Diagonal::Strict)).pass);
}

TEST(Kernel, CausalPropagateSolvesTriangularSystem) {
  const int T = 7;
  const Matrix m = random_lower(T, 3, true);
  const Matrix f = random_lower(T, 4, false);
  const Matrix x = causal_propagate(m, f);
  // x = f + m x  <=>  (I - m) x = f
  const Matrix expect = (Matrix::Identity(T, T) - m).triangularView<Eigen::Lower>().solve(f);
  EXPECT_LT((x - expect).cwiseAbs().maxCoeff(), 1e-12);
  // entries on or above the diagonal of the memory are ignored
  Matrix m2 = m + random_psd(T, 5).triangularView<Eigen::Upper>().toDenseMatrix();
  EXPECT_LT((causal_propagate(m2, f) - x).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Kernel, CongruenceIsPsd) {
  const Kernel cov("c", KernelKind::Correlation, random_psd(5, 6));
  const Kernel out = congruence(random_lower(5, 7, false), cov, "out");
  EXPECT_TRUE(check_kernel(out).pass);
  EXPECT_EQ(out.name(), "out");
  EXPECT_THROW(congruence(Matrix::Zero(4, 4), cov), ContractError);
}

TEST(Kernel, TextRoundTrip) {
  const Kernel k("C_h1", KernelKind::Correlation, random_psd(4, 8));
  std::stringstream ss;
  write_kernel(ss, k);
  const Kernel back = read_kernel(ss);
  EXPECT_EQ(back.name(), "C_h1");
  EXPECT_EQ(back.kind(), KernelKind::Correlation);
  EXPECT_EQ(back.values(), k.values());
  std::stringstream bad("3 weird x\n");
  EXPECT_THROW(read_kernel(bad), std::runtime_error);
}

TEST(CausalBlock, PackedStorage) {
  CausalBlock b(4);
  b.at(3, 1) = 2.0;
  b.at(2, 2) = -1.0;
  EXPECT_EQ(b(3, 1), 2.0);
  EXPECT_EQ(b(1, 3), 0.0);
  EXPECT_EQ(b.bytes(), 10 * sizeof(double));
  const Matrix d = b.dense();
  EXPECT_EQ(d(2, 2), -1.0);
  EXPECT_EQ(d.rows(), 4);
}

// Row congruence against each noise rule equals the dense A Cov A^T.
TEST(CausalBlock, RowCongruenceMatchesDense) {
  const int T = 6;
  CausalBlock a(T);
  const Matrix la = random_lower(T, 9, false);
  for (int t = 0; t < T; ++t)
    for (int s = 0; s <= t; ++s) a.at(t, s) = la(t, s);
  const Matrix src = random_psd(T, 10);
  const std::vector<NoiseFamily> families = {NoiseFamily::white("w", 0.7), NoiseFamily::local("l", 0.3, &src),
                                             NoiseFamily::proportional("p", 1.5, &src)};
  for (const auto& f : families) {
    const Matrix expect = la * f.covariance(T) * la.transpose();
    for (int t = 0; t < T; ++t) {
      std::vector<double> row(T, 0.0);
      add_row_congruence(row, t, a, f);
      for (int u = 0; u <= t; ++u) EXPECT_NEAR(row[u], expect(t, u), 1e-10) << f.name;
    }
  }
  // constant sources only use column 0
  CausalBlock c(T);
  for (int t = 0; t < T; ++t) c.at(t, 0) = la(t, 0);
  const NoiseFamily k = NoiseFamily::constant("k", 2.0);
  for (int t = 0; t < T; ++t) {
    std::vector<double> row(T, 0.0);
    add_row_congruence(row, t, c, k);
    for (int u = 0; u <= t; ++u) EXPECT_NEAR(row[u], 2.0 * la(t, 0) * la(u, 0), 1e-12);
  }
}

TEST(CausalBlock, HistoryStrictAndInclusive) {
  const int T = 5;
  CausalBlock src(T), strict(T), incl(T);
  for (int t = 0; t < T; ++t) src.at(t, t) = 1.0;
  std::vector<double> k(T, 1.0);
  add_history(strict, 3, k, 2.0, src);
  add_history_inclusive(incl, 3, k, 2.0, src);
  EXPECT_EQ(strict(3, 3), 0.0);
  EXPECT_EQ(strict(3, 2), 2.0);
  EXPECT_EQ(incl(3, 3), 2.0);
}
