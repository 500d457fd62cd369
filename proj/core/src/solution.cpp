#include "deeplin/solution.hpp"

#include "deeplin/csv.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace deeplin {

const Kernel* DmftSolution::find(const std::string& name) const {
  for (const auto& k : correlations)
    if (k.name() == name) return &k;
  for (const auto& k : responses)
    if (k.name() == name) return &k;
  return nullptr;
}

const Kernel& DmftSolution::get(const std::string& name) const {
  const Kernel* k = find(name);
  if (!k) throw std::out_of_range("solution has no kernel '" + name + "'");
  return *k;
}

DivergedError::DivergedError(int step, DmftSolution partial)
    : std::runtime_error("dynamics diverged at step " + std::to_string(step)),
      step_(step),
      partial_(std::move(partial)) {}

LossDecomposition loss_decomposition(const DmftSolution& sol) {
  const Kernel* rvr = sol.find("R_vr0");
  const Kernel* rvu = sol.find("R_vu0");
  const Kernel* cg1 = sol.find("C_g1");
  const Kernel* cd = sol.find("C_Delta");
  if (!rvr || !cg1 || sol.target_transfer.size() != sol.T)
    throw std::invalid_argument("loss_decomposition: solution lacks R_vr0/C_g1/target transfer");
  LossDecomposition d;
  d.noise = sol.sigma * sol.sigma;
  d.bias.resize(sol.T);
  d.width_variance.assign(sol.T, 0.0);
  d.data_variance.assign(sol.T, 0.0);
  for (int t = 0; t < sol.T; ++t) {
    const double a = sol.target_transfer(t);
    d.bias[t] = sol.target_variance * a * a;
    if (sol.width_coefficient != 0.0) {
      const Vector r = rvr->values().row(t).transpose();
      d.width_variance[t] = sol.width_coefficient * r.dot(cg1->values() * r);
    }
    if (sol.data_coefficient != 0.0) {
      if (!rvu || !cd) throw std::invalid_argument("loss_decomposition: solution lacks R_vu0/C_Delta");
      const Vector r = rvu->values().row(t).transpose();
      if (sol.data_noise_time_local)
        d.data_variance[t] = sol.data_coefficient * r.cwiseAbs2().dot(cd->values().diagonal());
      else
        d.data_variance[t] = sol.data_coefficient * r.dot(cd->values() * r);
    }
  }
  return d;
}

void write_losses_csv(const std::string& path, const DmftSolution& sol, int diverged_at) {
  std::ostringstream os;
  LossDecomposition d;
  bool have_decomp = true;
  try {
    d = loss_decomposition(sol);
  } catch (const std::invalid_argument&) {
    have_decomp = false;
  }
  os << "step,test_loss,train_loss,bias,width_var,data_var";
  if (diverged_at >= 0) os << ",diverged_at";
  os << '\n' << std::setprecision(17);
  const int rows = static_cast<int>(sol.test_loss.size());
  for (int t = 0; t < rows; ++t) {
    os << t << ',' << sol.test_loss[t] << ',' << sol.train_loss[t] << ',';
    if (have_decomp)
      os << d.bias[t] << ',' << d.width_variance[t] << ',' << d.data_variance[t];
    else
      os << "nan,nan,nan";
    if (diverged_at >= 0) os << ',' << diverged_at;
    os << '\n';
  }
  write_file_atomic(path, os.str());
}

void write_solution(const std::string& dir, const DmftSolution& sol, int diverged_at) {
  std::filesystem::create_directories(dir);
  for (const auto& k : sol.correlations) save_kernel(dir + "/" + k.name() + ".txt", k);
  for (const auto& k : sol.responses) save_kernel(dir + "/" + k.name() + ".txt", k);
  write_losses_csv(dir + "/losses.csv", sol, diverged_at);
}

}  // namespace deeplin
