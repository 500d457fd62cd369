#include "dense_oracle.hpp"

#include <cmath>
#include <stdexcept>

namespace deeplin::oracle {

namespace {

using Field = std::map<std::string, Matrix>;

void axpy(Field& x, int t, double c, const Field& y, int tp) {
  if (c == 0.0) return;
  for (const auto& [f, m] : y) x[f].row(t) += c * m.row(tp);
}

Matrix correlation(const Field& x, const std::map<std::string, Matrix>& cov, int T) {
  Matrix c = Matrix::Zero(T, T);
  for (const auto& [f, a] : x) c += a * cov.at(f) * a.transpose();
  return 0.5 * (c + c.transpose());
}

Matrix response(const Field& x, const std::string& f) { return x.at(f); }

}  // namespace

std::map<std::string, Matrix> dense_single_site(const SiteSetting& s, int T, int* iterations) {
  const int L = s.L;
  const double eg = s.eta * s.gamma;
  const double r0_scale = std::isinf(s.nu) ? 0.0 : 1.0 / (s.nu * s.gamma * s.gamma);
  const double width_response = std::isinf(s.nu) ? 0.0 : 1.0 / (s.nu * s.gamma);
  const double inv_ratio = std::isinf(s.ratio) ? 0.0 : 1.0 / s.ratio;

  std::map<std::string, int> dims = {{"wstar", 1}, {"eps", s.online ? T : 1}, {"r0", T}, {"u0", T}, {"ud", T}};
  for (int l = 1; l <= L; ++l) {
    dims["u" + std::to_string(l)] = T;
    dims["r" + std::to_string(l)] = l < L ? T : 1;
  }
  auto zero = [&] {
    Field f;
    for (const auto& [name, d] : dims) f[name] = Matrix::Zero(T, d);
    return f;
  };
  auto name = [](const char* p, int l) { return p + std::to_string(l); };

  std::map<std::string, Matrix> K;
  auto get = [&](const std::string& n) -> Matrix {
    auto it = K.find(n);
    return it == K.end() ? Matrix::Zero(T, T) : it->second;
  };

  int it = 0;
  for (; it < 10000; ++it) {
    // covariances of the sources from the current kernels
    std::map<std::string, Matrix> cov;
    cov["wstar"] = Matrix::Constant(1, 1, s.target_variance);
    cov["eps"] = s.online ? Matrix(Matrix::Identity(T, T)) : Matrix(Matrix::Ones(1, 1));
    cov["r0"] = r0_scale * get("C_g1");
    cov["u0"] = s.online ? Matrix((inv_ratio * get("C_Delta").diagonal()).asDiagonal())
                         : Matrix(inv_ratio * get("C_Delta"));
    cov["ud"] = get("C_v");
    for (int l = 1; l <= L; ++l) {
      cov[name("u", l)] = l == 1 ? get("C_h0") : get(name("C_h", l - 1));
      cov[name("r", l)] = l < L ? get(name("C_g", l + 1)) : Matrix(Matrix::Ones(1, 1));
    }

    Field v = zero(), d = zero(), h0 = zero();
    std::vector<Field> h(L + 1, zero()), g(L + 1, zero());
    for (int t = 0; t < T; ++t) {
      g[L][name("r", L)](t, 0) = 1.0;
      for (int tp = 0; tp < t; ++tp) axpy(g[L], t, eg, h[L], tp);
      for (int l = L - 1; l >= 1; --l) {
        g[l][name("r", l)](t, t) = 1.0;
        const Matrix Rgu = get(name("R_gu", l + 1)), Cg = get(name("C_g", l + 1));
        for (int tp = 0; tp < t; ++tp) axpy(g[l], t, Rgu(t, tp) + eg * Cg(t, tp), h[l], tp);
      }
      v["wstar"](t, 0) = 1.0;
      if (t > 0 || !s.centering) v["r0"](t, t) -= 1.0;
      if (t > 0 && s.centering) v["r0"](t, 0) += 1.0;
      const Matrix Rgu1 = get("R_gu1"), Cg1 = get("C_g1");
      for (int tp = 0; tp < t; ++tp) axpy(v, t, -(Rgu1(t, tp) / s.gamma + s.mem * Cg1(t, tp)), h0, tp);
      if (s.online) {
        d["ud"](t, t) = 1.0;
        d["eps"](t, t) = s.sigma;
        h0["u0"](t, t) = 1.0;
        axpy(h0, t, 1.0, v, t);
      } else {
        d["ud"](t, t) = 1.0;
        d["eps"](t, 0) = s.sigma;
        const Matrix Rvu = get("R_vu0");
        for (int tp = 0; tp < t; ++tp) axpy(d, t, inv_ratio * Rvu(t, tp), d, tp);
        const Matrix Rd = get("R_Delta");
        h0["u0"](t, t) = 1.0;
        for (int tp = 0; tp <= t; ++tp) axpy(h0, t, Rd(t, tp), v, tp);
      }
      for (int l = 1; l <= L; ++l) {
        const Matrix Rprev = l == 1 ? Matrix(width_response * get("R_hr0")) : get(name("R_hr", l - 1));
        const Matrix Cprev = l == 1 ? get("C_h0") : get(name("C_h", l - 1));
        h[l][name("u", l)](t, t) = 1.0;
        for (int tp = 0; tp < t; ++tp) axpy(h[l], t, Rprev(t, tp) + eg * Cprev(t, tp), g[l], tp);
        axpy(h[l], t, Rprev(t, t), g[l], t);
      }
    }

    std::map<std::string, Matrix> next;
    next["C_v"] = correlation(v, cov, T);
    next["C_Delta"] = correlation(d, cov, T);
    next["C_h0"] = correlation(h0, cov, T);
    next["R_vu0"] = response(v, "u0");
    next["R_vr0"] = response(v, "r0");
    next["R_hr0"] = response(h0, "r0");
    next["R_Delta"] = s.online ? Matrix(Matrix::Identity(T, T)) : response(d, "ud");
    for (int l = 1; l <= L; ++l) {
      next[name("C_h", l)] = correlation(h[l], cov, T);
      next[name("C_g", l)] = correlation(g[l], cov, T);
      next[name("R_gu", l)] = response(g[l], name("u", l));
      if (l < L) next[name("R_hr", l)] = response(h[l], name("r", l));
    }
    double change = 0.0;
    for (const auto& [n, m] : next) change = std::max(change, (m - get(n)).cwiseAbs().maxCoeff());
    K = std::move(next);
    if (change == 0.0 && it > 0) break;
  }
  if (it == 10000) throw std::runtime_error("dense oracle did not reach a fixed point");
  if (iterations) *iterations = it;
  return K;
}

}  // namespace deeplin::oracle
