#include "deeplin/causal_block.hpp"

namespace deeplin {

CausalBlock::CausalBlock(int T) : T_(T), data_(offset(T), 0.0) {
  if (T < 1) throw ContractError("CausalBlock: T must be >= 1");
}

Matrix CausalBlock::dense() const { return dense(T_); }

Matrix CausalBlock::dense(int rows) const {
  Matrix m = Matrix::Zero(rows, rows);
  for (int t = 0; t < rows; ++t) m.row(t).head(t + 1) = row_map(t).transpose();
  return m;
}

NoiseFamily NoiseFamily::constant(std::string name, double variance) {
  return {std::move(name), Rule::Constant, variance, nullptr};
}

NoiseFamily NoiseFamily::white(std::string name, double variance) {
  return {std::move(name), Rule::White, variance, nullptr};
}

NoiseFamily NoiseFamily::local(std::string name, double scale, const Matrix* source) {
  return {std::move(name), Rule::Local, scale, source};
}

NoiseFamily NoiseFamily::proportional(std::string name, double scale, const Matrix* source) {
  return {std::move(name), Rule::Proportional, scale, source};
}

double NoiseFamily::cov(int s, int r) const {
  switch (rule) {
    case Rule::Constant: return scale;
    case Rule::White: return s == r ? scale : 0.0;
    case Rule::Local: return s == r ? scale * (*source)(s, s) : 0.0;
    case Rule::Proportional: return scale * (*source)(s, r);
  }
  return 0.0;
}

Matrix NoiseFamily::covariance(int T) const {
  Matrix c(T, T);
  for (int s = 0; s < T; ++s)
    for (int r = 0; r < T; ++r) c(s, r) = cov(s, r);
  return c;
}

void add_row_congruence(std::span<double> out, int t, const CausalBlock& a, const NoiseFamily& f) {
  if (f.vanishes()) return;
  auto at = a.row_map(t);
  switch (f.rule) {
    case NoiseFamily::Rule::Constant: {
      const double st = f.scale * at.sum();
      if (st == 0.0) return;
      for (int u = 0; u <= t; ++u) out[u] += st * a.row_map(u).sum();
      return;
    }
    case NoiseFamily::Rule::White:
    case NoiseFamily::Rule::Local: {
      Vector y(t + 1);
      for (int s = 0; s <= t; ++s)
        y(s) = at(s) == 0.0 ? 0.0 : at(s) * f.cov(s, s);
      for (int u = 0; u <= t; ++u) out[u] += a.row_map(u).dot(y.head(u + 1));
      return;
    }
    case NoiseFamily::Rule::Proportional: {
      Vector y = f.scale * (f.source->topLeftCorner(t + 1, t + 1) * at);
      for (int u = 0; u <= t; ++u) out[u] += a.row_map(u).dot(y.head(u + 1));
      return;
    }
  }
}

void add_history(CausalBlock& dst, int t, std::span<const double> k, double scale,
                 const CausalBlock& src) {
  auto d = dst.row_map(t);
  for (int u = 0; u < t; ++u) {
    const double c = scale * k[u];
    if (c != 0.0) d.head(u + 1).noalias() += c * src.row_map(u);
  }
}

void add_history_inclusive(CausalBlock& dst, int t, std::span<const double> k, double scale,
                           const CausalBlock& src) {
  auto d = dst.row_map(t);
  for (int u = 0; u <= t; ++u) {
    const double c = scale * k[u];
    if (c != 0.0) d.head(u + 1).noalias() += c * src.row_map(u);
  }
}

}  // namespace deeplin
