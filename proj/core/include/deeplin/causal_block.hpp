#pragma once

#include "deeplin/kernel.hpp"

#include <span>
#include <string>
#include <vector>

namespace deeplin {

// Lower-triangular T x T matrix stored row-packed: row t holds columns 0..t.
// Entry (t,s) is the coefficient of a field at time t on a noise at time s.
class CausalBlock {
 public:
  CausalBlock() = default;
  explicit CausalBlock(int T);

  int steps() const { return T_; }
  bool allocated() const { return T_ > 0; }

  std::span<double> row(int t) { return {data_.data() + offset(t), static_cast<std::size_t>(t) + 1}; }
  std::span<const double> row(int t) const {
    return {data_.data() + offset(t), static_cast<std::size_t>(t) + 1};
  }
  Eigen::Map<Vector> row_map(int t) { return {data_.data() + offset(t), t + 1}; }
  Eigen::Map<const Vector> row_map(int t) const { return {data_.data() + offset(t), t + 1}; }

  double operator()(int t, int s) const { return s <= t ? data_[offset(t) + s] : 0.0; }
  double& at(int t, int s) { return data_[offset(t) + s]; }

  Matrix dense() const;
  Matrix dense(int rows) const;
  std::size_t bytes() const { return data_.size() * sizeof(double); }

 private:
  static std::size_t offset(int t) { return static_cast<std::size_t>(t) * (t + 1) / 2; }
  int T_ = 0;
  std::vector<double> data_;
};

// Covariance rule of one independent Gaussian source of a single-site process.
struct NoiseFamily {
  enum class Rule {
    Constant,      // scale * all-ones; blocks carry their coefficient in column 0
    White,         // scale * identity
    Local,         // scale * diag(source(s,s))
    Proportional,  // scale * source
  };

  std::string name;
  Rule rule = Rule::Constant;
  double scale = 1.0;
  const Matrix* source = nullptr;

  static NoiseFamily constant(std::string name, double variance);
  static NoiseFamily white(std::string name, double variance);
  static NoiseFamily local(std::string name, double scale, const Matrix* source);
  static NoiseFamily proportional(std::string name, double scale, const Matrix* source);

  bool vanishes() const { return scale == 0.0; }
  double cov(int s, int r) const;
  Matrix covariance(int T) const;
};

// out[t'] += a(t,:) Cov a(t',:)^T for t' = 0..t.
void add_row_congruence(std::span<double> out, int t, const CausalBlock& a, const NoiseFamily& f);

// dst(t,:) += scale * sum_{t'<t} k[t'] src(t',:).
void add_history(CausalBlock& dst, int t, std::span<const double> k, double scale, const CausalBlock& src);

// dst(t,:) += scale * sum_{t'<=t} k[t'] src(t',:).
void add_history_inclusive(CausalBlock& dst, int t, std::span<const double> k, double scale,
                           const CausalBlock& src);

}  // namespace deeplin
