#pragma once

#include "deeplin/causal_block.hpp"
#include "deeplin/solution.hpp"

#include <vector>

namespace deeplin::detail {

// Hidden layers 1..L of the non-residual MLP single site. Layer l is closed on
// its own two sources u^l, r^l; it sees the input layer only through C_h0 and
// R_hr0, which the owning solver fills row by row.
class UpperStack {
 public:
  struct Params {
    int L = 1;
    int T = 1;
    double gamma0 = 1.0;
    double eta = 0.0;
    double width_response = 0.0;  // coefficient of R_hr0 in the h^1 memory
  };

  UpperStack(const Params& p, const Matrix* C_h0, const CausalBlock* R_hr0);

  // g^L..g^1 and their correlation rows at step t.
  void backward(int t);
  // h^1..h^L and their correlation rows at step t; needs row t of C_h0, R_hr0.
  void forward(int t);

  const Matrix& Cg(int l) const { return Cg_[l]; }
  const Matrix& Ch(int l) const { return Ch_[l]; }
  const CausalBlock& Rgu(int l) const { return Gu_[l]; }
  const CausalBlock& Rhr(int l) const { return Hr_[l]; }
  double max_diagonal(int t) const;

  void export_kernels(DmftSolution& sol, int rows) const;

 private:
  void fill_row(Matrix& c, int t, const std::vector<double>& row) const;

  Params p_;
  const Matrix* Ch0_;
  const CausalBlock* Rhr0_;
  std::vector<CausalBlock> Hu_, Hr_, Gu_, Gr_;
  std::vector<Matrix> Ch_, Cg_;
  std::vector<NoiseFamily> u_, r_;
  std::vector<double> k_, row_;
};

void fill_symmetric_row(Matrix& c, int t, const std::vector<double>& row);
Kernel truncated(const std::string& name, KernelKind kind, const Matrix& m, int rows,
                 Diagonal diag = Diagonal::Free);

}  // namespace deeplin::detail
