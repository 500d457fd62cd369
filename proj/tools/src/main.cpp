#include "deeplin/csv.hpp"
#include "deeplin/experiment.hpp"
#include "deeplin/sgd_dmft.hpp"
#include "deeplin/simulator.hpp"
#include "deeplin/structured_dmft.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

using namespace deeplin;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kDiverged = 2;
constexpr int kCompareFail = 3;

struct Globals {
  std::string config;
  std::string out;
  int seeds = 0;
  double tolerance = 0.05;
  int threads = 0;
};

ExperimentConfig load(const Globals& g) {
  if (g.config.empty()) throw ConfigError("--config is required");
  ExperimentConfig c = load_experiment(g.config);
  if (!g.out.empty()) c.out = g.out;
  if (g.seeds > 0) c.seeds = g.seeds;
  if (g.threads > 0) c.threads = g.threads;
  std::filesystem::create_directories(c.out);
  return c;
}

const SweepSection& need_sweep(const ExperimentConfig& c) {
  if (!c.sweep) throw ConfigError("this command needs a sweep section");
  return *c.sweep;
}

int cmd_solve(const Globals& g) {
  const ExperimentConfig c = load(g);
  const RunOutcome r = run_theory(c);
  write_outcome(c.out, r);
  for (const auto& w : r.solution.warnings) std::cerr << "warning: " << w << '\n';
  if (r.diverged_at >= 0) {
    std::cerr << "diverged at step " << r.diverged_at << "; partial results in " << c.out << '\n';
    return kDiverged;
  }
  std::cout << c.out << "/losses.csv\n";
  return kOk;
}

int cmd_simulate(const Globals& g) {
  const ExperimentConfig c = load(g);
  const EnsembleResult e = monte_carlo_ensemble(c.sim(), c.seeds, c.base_seed, c.threads);
  write_ensemble_csv(c.out + "/ensemble.csv", e);
  std::cout << c.out << "/ensemble.csv seeds=" << e.n_seeds << " divergence_fraction=" << e.divergence_fraction
            << '\n';
  return e.divergence_fraction > 0.0 ? kDiverged : kOk;
}

int cmd_compare(const Globals& g, const std::string& theory, const std::string& sim) {
  const CompareReport r = compare_curves(theory, sim, g.tolerance);
  std::cout << format_report(r) << '\n';
  return r.pass ? kOk : kCompareFail;
}

int cmd_sweep_lr(const Globals& g) {
  const ExperimentConfig c = load(g);
  const SweepSection& s = need_sweep(c);
  const SweepTable t = sweep_lr(c, s.axis, s.values, s.eta_grid(), c.threads, c.out + "/cells");
  write_sweep_csv(c.out + "/sweep.csv", t);
  write_sweep_summary_csv(c.out + "/sweep_summary.csv", t);
  std::cout << axis_name(s.axis) << ",argmin_eta,max_stable_eta\n";
  for (const auto& row : t.summary) std::cout << row.scale << ',' << row.argmin_eta << ',' << row.max_stable_eta << '\n';
  return kOk;
}

int cmd_max_lr(const Globals& g) {
  const ExperimentConfig c = load(g);
  const SweepSection& s = need_sweep(c);
  if (!s.bracket) throw ConfigError("max-lr needs sweep.bracket: [lo, hi]");
  const MaxLrResult r = max_lr(c, s.axis, s.values, s.bracket->first, s.bracket->second, s.bisection_steps, c.threads);
  write_max_lr_csv(c.out + "/max_lr.csv", r);
  std::cout << "slope=" << r.slope << " r_squared=" << r.r_squared << '\n';
  return kOk;
}

int cmd_fit_exponent(const Globals& g, const std::string& input) {
  std::vector<double> loss;
  std::pair<int, int> window{100, 1000};
  double predicted = std::numeric_limits<double>::quiet_NaN();
  std::string out_dir = g.out.empty() ? "." : g.out;
  if (!input.empty()) {
    loss = read_csv(input).col("test_loss");
  } else {
    const ExperimentConfig c = load(g);
    out_dir = c.out;
    window = c.fit_window;
    const RunOutcome r = run_theory(c);
    write_outcome(c.out, r);
    if (r.diverged_at >= 0) {
      std::cerr << "diverged at step " << r.diverged_at << '\n';
      return kDiverged;
    }
    loss = r.solution.test_loss;
    if (c.spectrum) predicted = theoretical_exponent(c.spectrum->b);
  }
  std::filesystem::create_directories(out_dir);
  const PowerLawFit f = fit_powerlaw(loss, window.first, std::min<int>(window.second, loss.size() - 1));
  std::ostringstream os;
  os << std::setprecision(10) << "exponent,r_squared,points,predicted\n"
     << f.exponent << ',' << f.r_squared << ',' << f.points << ',' << predicted << '\n';
  write_file_atomic(out_dir + "/exponent.csv", os.str());
  std::cout << os.str();
  return kOk;
}

int cmd_early_blowup(const Globals& g, int steps) {
  const ExperimentConfig c = load(g);
  if (c.solver() != SolverKind::OnlineSgd) throw ConfigError("early-blowup needs an online SGD config (limit.alpha_b)");
  const SgdConfig s = c.sgd();
  const auto rows = early_time_compare(s, steps);
  write_early_time_csv(c.out + "/early_blowup.csv", rows);
  const EarlyTimeFactor f = early_time_factor(s.eta, s.L, s.alpha_b, s.nu);
  std::cout << "rho=" << f.rho << " blows_up=" << (f.blows_up ? 1 : 0) << " threshold_eta_L=" << f.threshold_eta_L
            << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deeplin: DMFT solvers and finite-network simulations for deep linear networks"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "experiment YAML file");
  app.add_option("--out", g.out, "output directory (overrides run.out)");
  app.add_option("--seeds", g.seeds, "number of simulation seeds (overrides run.seeds)");
  app.add_option("--tolerance", g.tolerance, "relative tolerance for compare")->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads (overrides run.threads)");

  auto* solve = app.add_subcommand("solve", "run the DMFT solver picked by the config");
  auto* simulate = app.add_subcommand("simulate", "train finite networks over seeds");
  auto* compare = app.add_subcommand("compare", "compare a theory losses CSV with a simulation CSV");
  std::string theory_csv, sim_csv;
  compare->add_option("theory", theory_csv, "losses.csv from solve")->required()->check(CLI::ExistingFile);
  compare->add_option("sim", sim_csv, "ensemble.csv from simulate")->required()->check(CLI::ExistingFile);
  auto* sweep = app.add_subcommand("sweep-lr", "final loss over a (scale, eta) grid");
  auto* maxlr = app.add_subcommand("max-lr", "bisect the largest stable eta per scale");
  auto* fit = app.add_subcommand("fit-exponent", "fit the power-law exponent of the test loss");
  std::string fit_input;
  fit->add_option("--input", fit_input, "fit an existing losses CSV instead of solving")->check(CLI::ExistingFile);
  auto* early = app.add_subcommand("early-blowup", "compare early SGD losses with the rho^t approximation");
  int early_steps = 4;
  early->add_option("--steps", early_steps, "number of early steps")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*solve) return cmd_solve(g);
    if (*simulate) return cmd_simulate(g);
    if (*compare) return cmd_compare(g, theory_csv, sim_csv);
    if (*sweep) return cmd_sweep_lr(g);
    if (*maxlr) return cmd_max_lr(g);
    if (*fit) return cmd_fit_exponent(g, fit_input);
    if (*early) return cmd_early_blowup(g, early_steps);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ContractError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  }
  return kOk;
}
