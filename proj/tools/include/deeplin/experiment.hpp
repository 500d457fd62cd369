#pragma once

#include "deeplin/config.hpp"
#include "deeplin/simulator.hpp"
#include "deeplin/solution.hpp"
#include "deeplin/structured_dmft.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace deeplin {

// Bad config file: message carries "file:line: key: what".
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SolverKind { MlpGd, OnlineSgd, Resnet, InfiniteDepth, Structured };
enum class SweepAxis { Eta, Nu, L, Alpha, AlphaB, Beta0 };

SweepAxis parse_axis(const std::string& s);
std::string axis_name(SweepAxis a);

struct SweepSection {
  SweepAxis axis = SweepAxis::Nu;
  std::vector<double> values;
  std::vector<double> eta;  // explicit grid; otherwise eta_min..eta_max
  double eta_min = 1e-3;
  double eta_max = 1.0;
  int per_decade = 8;
  std::optional<std::pair<double, double>> bracket;  // max-lr
  int bisection_steps = 24;

  std::vector<double> eta_grid() const;
};

struct ExperimentConfig {
  // model
  Arch arch = Arch::MLP;
  int L = 2;
  bool infinite_depth = false;
  double gamma0 = 1.0;
  double eta = 0.05;
  double sigma = 0.0;
  std::optional<double> beta0;
  std::optional<double> beta;
  bool scaled = true;
  Parameterization parameterization = Parameterization::MuP;
  MemoryCoefficient memory = MemoryCoefficient::Eta;
  double target_variance = 1.0;
  // limit
  double nu = kInf;
  double alpha = kInf;
  std::optional<double> alpha_b;
  std::optional<double> N, B;
  std::optional<SpectrumSpec> spectrum;
  int D = 0;  // simulator input dimension
  // run
  int T = 20;
  bool centering = true;
  int seeds = 1;
  std::uint64_t base_seed = 0;
  std::string out = "out";
  int threads = 1;
  int layer_grid = 128;
  bool doubling_check = false;
  std::pair<int, int> fit_window{100, 1000};
  std::optional<SweepSection> sweep;

  SolverKind solver() const;
  void validate() const;

  MlpGdConfig mlp() const;
  SgdConfig sgd() const;
  ResnetConfig resnet() const;
  StructuredConfig structured() const;
  SimConfig sim(std::uint64_t seed = 0) const;
};

ExperimentConfig parse_experiment(const std::string& text, const std::string& origin = "<config>");
ExperimentConfig load_experiment(const std::string& path);

ExperimentConfig with_axis(ExperimentConfig c, SweepAxis axis, double value);

struct RunOutcome {
  DmftSolution solution;
  std::optional<ModeState> modes;
  int diverged_at = -1;
  std::string error;  // set when the solver refused the config
};

// Runs the theory solver picked by the config. Divergence is reported through
// diverged_at with the partial solution kept.
RunOutcome run_theory(const ExperimentConfig& c);
void write_outcome(const std::string& dir, const RunOutcome& r);

// Finite, and L(T) <= blowup * L(0).
bool is_stable(const RunOutcome& r, double blowup = 10.0);

struct SweepCell {
  double scale = 0.0;
  double eta = 0.0;
  double final_loss = 0.0;  // inf when diverged
  bool stable = false;
};

struct ScaleSummary {
  double scale = 0.0;
  int argmin_index = -1;  // into the eta grid; ties go to the smaller eta
  double argmin_eta = 0.0;
  double max_stable_eta = 0.0;
};

struct SweepTable {
  std::vector<double> etas;
  std::vector<SweepCell> cells;  // scale-major
  std::vector<ScaleSummary> summary;
};

// When cell_dir is set, each cell's losses CSV is written there as it finishes.
SweepTable sweep_lr(const ExperimentConfig& base, SweepAxis axis, const std::vector<double>& scales,
                    const std::vector<double>& etas, int threads = 1, const std::string& cell_dir = "");
void write_sweep_csv(const std::string& path, const SweepTable& t);
void write_sweep_summary_csv(const std::string& path, const SweepTable& t);

struct MaxLrRow {
  double scale = 0.0;
  double eta_max = 0.0;
};

struct MaxLrResult {
  std::vector<MaxLrRow> rows;
  double slope = 0.0;  // d log eta_max / d log scale
  double r_squared = 0.0;
};

// Bisection in log eta between a stable lo and an unstable hi at each scale.
MaxLrResult max_lr(const ExperimentConfig& base, SweepAxis axis, const std::vector<double>& scales, double lo,
                   double hi, int steps = 24, int threads = 1);
void write_max_lr_csv(const std::string& path, const MaxLrResult& r);

struct CompareReport {
  int steps = 0;
  double max_rel = 0.0;
  double mean_rel = 0.0;
  double inside_3se = 0.0;  // fraction of steps with |theory - mean| <= 3 stderr
  double tolerance = 0.0;
  bool pass = false;
};

// theory: a losses CSV (step,test_loss,...); sim: an ensemble CSV
// (step,mean_test,stderr_test,...) or a single-run CSV (step,test_loss,...).
CompareReport compare_curves(const std::string& theory_csv, const std::string& sim_csv, double tolerance);
std::string format_report(const CompareReport& r);

// Runs fn(i) for i in [0, n) on a pool of threads; results are keyed by i.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

}  // namespace deeplin
