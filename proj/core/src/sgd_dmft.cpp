#include "deeplin/sgd_dmft.hpp"

#include "isotropic_engine.hpp"

#include "deeplin/csv.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace deeplin {

DmftSolution solve_online_sgd(const SgdConfig& config) {
  config.validate();
  detail::IsotropicProblem p;
  p.net = config;
  p.gamma0 = config.effective_gamma0();
  p.nu = config.nu;
  p.data_ratio = config.alpha_b;
  p.setting = detail::DataSetting::Online;
  return detail::solve_isotropic(p);
}

EarlyTimeFactor early_time_factor(double eta, int L, double alpha_b, double nu) {
  const double l = L;
  const double ia = 1.0 / alpha_b, in = 1.0 / nu;
  const double p3 = l * (l + 1.0) * (2.0 * l + 1.0) / 6.0;
  EarlyTimeFactor f;
  f.rho = (1.0 - l * eta) * (1.0 - l * eta) + eta * eta * l * l * ia + eta * eta * p3 * in +
          eta * eta * p3 * in * ia;
  f.blows_up = f.rho > 1.0;
  const double q = (l + 1.0) * (2.0 * l + 1.0) / (6.0 * l);
  f.threshold_eta_L = 2.0 / (1.0 + ia + q * in + q * in * ia);
  return f;
}

std::vector<EarlyTimeRow> early_time_compare(const SgdConfig& config, int steps) {
  if (steps < 0 || steps > 5) throw ContractError("early_time_compare: steps must be in [0, 5]");
  SgdConfig c = config;
  c.T = steps + 1;
  DmftSolution sol;
  try {
    sol = solve_online_sgd(c);
  } catch (const DivergedError& e) {
    sol = e.partial();  // rows up to the blowup are still informative
  }
  const double rho = early_time_factor(c.eta, c.L, c.alpha_b, c.nu).rho;
  std::vector<EarlyTimeRow> rows;
  for (int t = 0; t < static_cast<int>(sol.test_loss.size()); ++t) {
    EarlyTimeRow r;
    r.t = t;
    r.dmft_loss = sol.test_loss[t];
    r.approx_loss = std::pow(rho, t) * sol.test_loss[0];
    r.rel_gap = std::abs(r.dmft_loss - r.approx_loss) / std::abs(r.dmft_loss);
    rows.push_back(r);
  }
  return rows;
}

void write_early_time_csv(const std::string& path, const std::vector<EarlyTimeRow>& rows) {
  std::ostringstream os;
  os << "t,dmft_loss,approx_loss,rel_gap\n" << std::setprecision(17);
  for (const auto& r : rows) os << r.t << ',' << r.dmft_loss << ',' << r.approx_loss << ',' << r.rel_gap << '\n';
  write_file_atomic(path, os.str());
}

}  // namespace deeplin
