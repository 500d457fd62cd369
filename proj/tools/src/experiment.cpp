#include "deeplin/experiment.hpp"

#include "deeplin/csv.hpp"
#include "deeplin/resnet_dmft.hpp"
#include "deeplin/mlp_dmft.hpp"
#include "deeplin/sgd_dmft.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <thread>

namespace deeplin {

SweepAxis parse_axis(const std::string& s) {
  if (s == "eta") return SweepAxis::Eta;
  if (s == "nu") return SweepAxis::Nu;
  if (s == "L") return SweepAxis::L;
  if (s == "alpha") return SweepAxis::Alpha;
  if (s == "alpha_b") return SweepAxis::AlphaB;
  if (s == "beta0") return SweepAxis::Beta0;
  throw std::invalid_argument("unknown sweep axis '" + s + "' (eta|nu|L|alpha|alpha_b|beta0)");
}

std::string axis_name(SweepAxis a) {
  switch (a) {
    case SweepAxis::Eta: return "eta";
    case SweepAxis::Nu: return "nu";
    case SweepAxis::L: return "L";
    case SweepAxis::Alpha: return "alpha";
    case SweepAxis::AlphaB: return "alpha_b";
    case SweepAxis::Beta0: return "beta0";
  }
  return "?";
}

std::vector<double> SweepSection::eta_grid() const {
  if (!eta.empty()) return eta;
  std::vector<double> g;
  const double a = std::log10(eta_min), b = std::log10(eta_max);
  const int n = static_cast<int>(std::floor((b - a) * per_decade + 1e-9));
  for (int i = 0; i <= n; ++i) g.push_back(std::pow(10.0, a + static_cast<double>(i) / per_decade));
  return g;
}

// ---------------------------------------------------------------------------
// parsing

namespace {

class Reader {
 public:
  explicit Reader(std::string origin) : origin_(std::move(origin)) {}

  [[noreturn]] void fail(const YAML::Node& n, const std::string& key, const std::string& what) const {
    std::ostringstream os;
    os << origin_;
    if (n.Mark().line >= 0) os << ':' << n.Mark().line + 1;
    os << ": " << key << ": " << what;
    throw ConfigError(os.str());
  }

  void check_keys(const YAML::Node& map, const std::string& section, const std::set<std::string>& allowed) const {
    if (!map.IsMap()) fail(map, section, "expected a mapping");
    for (const auto& kv : map) {
      const auto key = kv.first.as<std::string>();
      if (!allowed.count(key)) fail(kv.first, section + "." + key, "unknown key");
    }
  }

  double number(const YAML::Node& n, const std::string& key) const {
    if (!n.IsScalar()) fail(n, key, "expected a number");
    const std::string s = n.Scalar();
    if (s == "inf" || s == ".inf" || s == "Inf") return kInf;
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      fail(n, key, "expected a number, got '" + s + "'");
    }
  }

  int integer(const YAML::Node& n, const std::string& key) const {
    const double v = number(n, key);
    if (v != std::floor(v) || std::abs(v) > 2e9) fail(n, key, "expected an integer");
    return static_cast<int>(v);
  }

  bool boolean(const YAML::Node& n, const std::string& key) const {
    if (!n.IsScalar()) fail(n, key, "expected true/false");
    const std::string s = n.Scalar();
    if (s == "true" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "no" || s == "off") return false;
    fail(n, key, "expected true/false, got '" + s + "'");
  }

  std::string text(const YAML::Node& n, const std::string& key) const {
    if (!n.IsScalar()) fail(n, key, "expected a string");
    return n.Scalar();
  }

  std::vector<double> numbers(const YAML::Node& n, const std::string& key) const {
    if (!n.IsSequence()) fail(n, key, "expected a list");
    std::vector<double> v;
    for (const auto& x : n) v.push_back(number(x, key));
    return v;
  }

  const std::string& origin() const { return origin_; }

 private:
  std::string origin_;
};

}  // namespace

ExperimentConfig parse_experiment(const std::string& text, const std::string& origin) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(origin + ":" + std::to_string(e.mark.line + 1) + ": syntax: " + e.msg);
  }
  Reader r(origin);
  ExperimentConfig c;
  if (!root.IsMap()) r.fail(root, "<root>", "expected sections model/limit/run/sweep");
  r.check_keys(root, "<root>", {"model", "limit", "run", "sweep"});
  if (!root["model"]) r.fail(root, "model", "missing section");

  const YAML::Node model = root["model"];
  r.check_keys(model, "model",
               {"arch", "L", "gamma0", "eta", "sigma", "beta0", "beta", "scaled", "parameterization",
                "eta_coefficient", "target_variance"});
  for (const auto& kv : model) {
    const auto key = kv.first.as<std::string>();
    const YAML::Node& v = kv.second;
    const std::string k = "model." + key;
    if (key == "arch") {
      const auto s = r.text(v, k);
      if (s == "mlp") c.arch = Arch::MLP;
      else if (s == "resnet") c.arch = Arch::ResNet;
      else r.fail(v, k, "expected mlp or resnet");
    } else if (key == "L") {
      const double l = r.number(v, k);
      if (std::isinf(l)) c.infinite_depth = true;
      else c.L = r.integer(v, k);
    } else if (key == "gamma0") c.gamma0 = r.number(v, k);
    else if (key == "eta") c.eta = r.number(v, k);
    else if (key == "sigma") c.sigma = r.number(v, k);
    else if (key == "beta0") c.beta0 = r.number(v, k);
    else if (key == "beta") c.beta = r.number(v, k);
    else if (key == "scaled") c.scaled = r.boolean(v, k);
    else if (key == "parameterization") {
      const auto s = r.text(v, k);
      if (s == "mup") c.parameterization = Parameterization::MuP;
      else if (s == "ntk") c.parameterization = Parameterization::NTK;
      else r.fail(v, k, "expected mup or ntk");
    } else if (key == "eta_coefficient") {
      const auto s = r.text(v, k);
      if (s == "eta") c.memory = MemoryCoefficient::Eta;
      else if (s == "eta_gamma0") c.memory = MemoryCoefficient::EtaGamma0;
      else r.fail(v, k, "expected eta or eta_gamma0");
    } else if (key == "target_variance") c.target_variance = r.number(v, k);
  }

  if (const YAML::Node limit = root["limit"]) {
    r.check_keys(limit, "limit", {"nu", "alpha", "alpha_b", "N", "B", "D", "spectrum"});
    for (const auto& kv : limit) {
      const auto key = kv.first.as<std::string>();
      const YAML::Node& v = kv.second;
      const std::string k = "limit." + key;
      if (key == "nu") c.nu = r.number(v, k);
      else if (key == "alpha") c.alpha = r.number(v, k);
      else if (key == "alpha_b") c.alpha_b = r.number(v, k);
      else if (key == "N") c.N = r.number(v, k);
      else if (key == "B") c.B = r.number(v, k);
      else if (key == "D") c.D = r.integer(v, k);
      else if (key == "spectrum") {
        r.check_keys(v, k, {"a", "b", "K", "file"});
        SpectrumSpec s;
        for (const auto& sk : v) {
          const auto name = sk.first.as<std::string>();
          const std::string kk = k + "." + name;
          if (name == "a") s.a = r.number(sk.second, kk);
          else if (name == "b") s.b = r.number(sk.second, kk);
          else if (name == "K") s.K = r.integer(sk.second, kk);
          else if (name == "file") {
            std::filesystem::path p = r.text(sk.second, kk);
            if (p.is_relative() && origin != "<config>") p = std::filesystem::path(origin).parent_path() / p;
            try {
              s = SpectrumSpec::from_file(p.string());
            } catch (const std::exception& e) {
              r.fail(sk.second, kk, e.what());
            }
          }
        }
        c.spectrum = s;
      }
    }
  }

  if (const YAML::Node run = root["run"]) {
    r.check_keys(run, "run",
                 {"T", "centering", "seeds", "base_seed", "out", "threads", "layer_grid", "doubling_check",
                  "fit_window"});
    for (const auto& kv : run) {
      const auto key = kv.first.as<std::string>();
      const YAML::Node& v = kv.second;
      const std::string k = "run." + key;
      if (key == "T") c.T = r.integer(v, k);
      else if (key == "centering") c.centering = r.boolean(v, k);
      else if (key == "seeds") c.seeds = r.integer(v, k);
      else if (key == "base_seed") c.base_seed = static_cast<std::uint64_t>(r.integer(v, k));
      else if (key == "out") c.out = r.text(v, k);
      else if (key == "threads") c.threads = r.integer(v, k);
      else if (key == "layer_grid") c.layer_grid = r.integer(v, k);
      else if (key == "doubling_check") c.doubling_check = r.boolean(v, k);
      else if (key == "fit_window") {
        const auto w = r.numbers(v, k);
        if (w.size() != 2) r.fail(v, k, "expected [t_min, t_max]");
        c.fit_window = {static_cast<int>(w[0]), static_cast<int>(w[1])};
      }
    }
  }

  if (const YAML::Node sweep = root["sweep"]) {
    r.check_keys(sweep, "sweep",
                 {"axis", "values", "eta", "eta_min", "eta_max", "per_decade", "bracket", "bisection_steps"});
    SweepSection s;
    if (!sweep["axis"]) r.fail(sweep, "sweep.axis", "missing");
    for (const auto& kv : sweep) {
      const auto key = kv.first.as<std::string>();
      const YAML::Node& v = kv.second;
      const std::string k = "sweep." + key;
      if (key == "axis") {
        try {
          s.axis = parse_axis(r.text(v, k));
        } catch (const std::invalid_argument& e) {
          r.fail(v, k, e.what());
        }
      } else if (key == "values") {
        s.values = r.numbers(v, k);
        if (s.values.empty()) r.fail(v, k, "must not be empty");
      } else if (key == "eta") s.eta = r.numbers(v, k);
      else if (key == "eta_min") s.eta_min = r.number(v, k);
      else if (key == "eta_max") s.eta_max = r.number(v, k);
      else if (key == "per_decade") s.per_decade = r.integer(v, k);
      else if (key == "bracket") {
        const auto b = r.numbers(v, k);
        if (b.size() != 2) r.fail(v, k, "expected [lo, hi]");
        s.bracket = std::make_pair(b[0], b[1]);
      } else if (key == "bisection_steps") s.bisection_steps = r.integer(v, k);
    }
    if (!sweep["values"]) r.fail(sweep, "sweep.values", "missing");
    c.sweep = s;
  }

  try {
    c.validate();
  } catch (const std::exception& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return c;
}

ExperimentConfig load_experiment(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError(path + ": cannot open");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_experiment(ss.str(), path);
}

// ---------------------------------------------------------------------------
// config -> solver configs

SolverKind ExperimentConfig::solver() const {
  if (spectrum || N || B) return SolverKind::Structured;
  if (arch == Arch::ResNet) return infinite_depth ? SolverKind::InfiniteDepth : SolverKind::Resnet;
  if (alpha_b) return SolverKind::OnlineSgd;
  return SolverKind::MlpGd;
}

namespace {

template <class C>
void fill_network(C& n, const ExperimentConfig& c) {
  n.L = c.L;
  n.gamma0 = c.gamma0;
  n.eta = c.eta;
  n.sigma = c.sigma;
  n.T = c.T;
  n.centering = c.centering;
  n.parameterization = c.parameterization;
  n.memory = c.memory;
  n.target_variance = c.target_variance;
}

}  // namespace

MlpGdConfig ExperimentConfig::mlp() const {
  MlpGdConfig m;
  fill_network(m, *this);
  m.nu = nu;
  m.alpha = alpha;
  return m;
}

SgdConfig ExperimentConfig::sgd() const {
  SgdConfig s;
  fill_network(s, *this);
  s.nu = nu;
  s.alpha_b = alpha_b.value_or(kInf);
  return s;
}

ResnetConfig ExperimentConfig::resnet() const {
  ResnetConfig r;
  fill_network(r, *this);
  r.nu = nu;
  r.beta_raw = beta;
  r.beta0 = beta0;
  r.scaled = scaled;
  return r;
}

StructuredConfig ExperimentConfig::structured() const {
  StructuredConfig s;
  fill_network(s, *this);
  s.spectrum = spectrum.value_or(SpectrumSpec{});
  s.N = N.value_or(kInf);
  s.B = B.value_or(kInf);
  return s;
}

SimConfig ExperimentConfig::sim(std::uint64_t seed) const {
  SimConfig s;
  s.arch = arch;
  s.L = L;
  s.gamma0 = gamma0;
  s.eta = eta;
  s.sigma = sigma;
  s.T = T;
  s.parameterization = parameterization;
  s.centering = centering;
  s.beta_raw = beta;
  s.beta0 = beta0;
  s.scaled = scaled;
  s.target_variance = target_variance;
  s.seed = seed;
  if (solver() == SolverKind::Structured) {
    s.spectrum = spectrum.value_or(SpectrumSpec{});
    if (!N || std::isinf(*N)) throw ContractError("simulate: structured runs need a finite N");
    s.N = static_cast<int>(*N);
    if (B && std::isfinite(*B)) {
      s.data = DataKind::Online;
      s.B = static_cast<int>(*B);
    } else {
      s.data = DataKind::Population;
    }
    return s;
  }
  if (D < 1) throw ContractError("simulate: limit.D (input dimension) is required");
  if (std::isinf(nu)) throw ContractError("simulate: needs a finite nu");
  s.D = D;
  s.N = std::max(1, static_cast<int>(std::lround(nu * D)));
  if (alpha_b) {
    s.data = DataKind::Online;
    s.B = std::max(1, static_cast<int>(std::lround(*alpha_b * D)));
  } else if (std::isfinite(alpha)) {
    s.data = DataKind::FullBatch;
    s.P = std::max(1, static_cast<int>(std::lround(alpha * D)));
  } else {
    s.data = DataKind::Population;
  }
  return s;
}

void ExperimentConfig::validate() const {
  if (seeds < 1) throw ContractError("run.seeds must be >= 1");
  if (threads < 1) throw ContractError("run.threads must be >= 1");
  if (infinite_depth && arch != Arch::ResNet) throw ContractError("model.L: inf needs arch: resnet");
  if (arch == Arch::ResNet && solver() == SolverKind::Structured)
    throw ContractError("structured covariates are implemented for the MLP only");
  if (arch != Arch::ResNet && (beta || beta0)) throw ContractError("model.beta/beta0 apply to arch: resnet");
  if (sweep) {
    if (sweep->values.empty()) throw ContractError("sweep.values must not be empty");
    if (sweep->per_decade < 1) throw ContractError("sweep.per_decade must be >= 1");
    if (!(sweep->eta_min > 0.0 && sweep->eta_max > sweep->eta_min))
      throw ContractError("sweep: need 0 < eta_min < eta_max");
  }
  if (sweep) {
    // each swept model must be valid on its own; the base may leave the axis unset
    ExperimentConfig point = *this;
    point.sweep.reset();
    for (double v : sweep->values) with_axis(point, sweep->axis, v).validate();
    return;
  }
  switch (solver()) {
    case SolverKind::MlpGd: mlp().validate(); break;
    case SolverKind::OnlineSgd: sgd().validate(); break;
    case SolverKind::Resnet: resnet().validate(); break;
    case SolverKind::InfiniteDepth: {
      if (!beta0 || !scaled) throw ContractError("model.L: inf needs beta0 with scaled: true");
      resnet().validate();
      break;
    }
    case SolverKind::Structured: structured().validate(); break;
  }
}

ExperimentConfig with_axis(ExperimentConfig c, SweepAxis axis, double value) {
  switch (axis) {
    case SweepAxis::Eta: c.eta = value; break;
    case SweepAxis::Nu:
      if (c.solver() == SolverKind::Structured) c.N = value;
      else c.nu = value;
      break;
    case SweepAxis::L: c.L = static_cast<int>(std::lround(value)); break;
    case SweepAxis::Alpha: c.alpha = value; break;
    case SweepAxis::AlphaB:
      if (c.solver() == SolverKind::Structured) c.B = value;
      else c.alpha_b = value;
      break;
    case SweepAxis::Beta0: c.beta0 = value; c.beta.reset(); break;
  }
  return c;
}

// ---------------------------------------------------------------------------
// running

RunOutcome run_theory(const ExperimentConfig& c) {
  RunOutcome out;
  try {
    switch (c.solver()) {
      case SolverKind::MlpGd: out.solution = solve_mlp_gd(c.mlp()); break;
      case SolverKind::OnlineSgd: out.solution = solve_online_sgd(c.sgd()); break;
      case SolverKind::Resnet: out.solution = solve_resnet_gd(c.resnet()); break;
      case SolverKind::InfiniteDepth:
        out.solution = solve_infinite_depth(c.resnet(), {c.layer_grid}, c.doubling_check);
        break;
      case SolverKind::Structured: {
        auto s = solve_structured_sgd(c.structured());
        out.solution = std::move(s.solution);
        out.modes = std::move(s.modes);
        break;
      }
    }
  } catch (const DivergedError& e) {
    out.solution = e.partial();
    out.diverged_at = e.step();
  }
  return out;
}

void write_outcome(const std::string& dir, const RunOutcome& r) {
  write_solution(dir, r.solution, r.diverged_at);
  if (r.modes) write_modes_csv(dir + "/modes.csv", *r.modes);
}

bool is_stable(const RunOutcome& r, double blowup) {
  if (r.diverged_at >= 0 || r.solution.test_loss.empty()) return false;
  const double first = r.solution.test_loss.front(), last = r.solution.test_loss.back();
  for (double x : r.solution.test_loss)
    if (!std::isfinite(x)) return false;
  return last <= blowup * first;
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      try {
        for (int i = next++; i < n; i = next++) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

SweepTable sweep_lr(const ExperimentConfig& base, SweepAxis axis, const std::vector<double>& scales,
                    const std::vector<double>& etas, int threads, const std::string& cell_dir) {
  SweepTable t;
  if (!cell_dir.empty()) std::filesystem::create_directories(cell_dir);
  t.etas = etas;
  const int ne = static_cast<int>(etas.size()), ns = static_cast<int>(scales.size());
  t.cells.resize(static_cast<std::size_t>(ne) * ns);
  parallel_for(ne * ns, threads, [&](int i) {
    const int s = i / ne, e = i % ne;
    ExperimentConfig c = with_axis(with_axis(base, axis, scales[s]), SweepAxis::Eta, etas[e]);
    const RunOutcome r = run_theory(c);
    SweepCell& cell = t.cells[i];
    cell.scale = scales[s];
    cell.eta = etas[e];
    cell.stable = is_stable(r);
    cell.final_loss = r.diverged_at >= 0 ? kInf : r.solution.test_loss.back();
    if (!cell_dir.empty()) {
      std::ostringstream name;
      name << cell_dir << '/' << axis_name(axis) << '_' << scales[s] << "_eta_" << std::setprecision(6) << etas[e]
           << ".csv";
      write_losses_csv(name.str(), r.solution, r.diverged_at);
    }
  });
  for (int s = 0; s < ns; ++s) {
    ScaleSummary sum;
    sum.scale = scales[s];
    double best = kInf;
    for (int e = 0; e < ne; ++e) {
      const SweepCell& cell = t.cells[s * ne + e];
      if (cell.stable) sum.max_stable_eta = std::max(sum.max_stable_eta, cell.eta);
      const bool tie = cell.final_loss == best && cell.eta < sum.argmin_eta;
      if (std::isfinite(cell.final_loss) && (cell.final_loss < best || tie)) {
        best = cell.final_loss;
        sum.argmin_index = e;
        sum.argmin_eta = cell.eta;
      }
    }
    t.summary.push_back(sum);
  }
  return t;
}

void write_sweep_csv(const std::string& path, const SweepTable& t) {
  std::ostringstream os;
  os << "scale,eta,final_loss,stable\n" << std::setprecision(17);
  for (const auto& c : t.cells) os << c.scale << ',' << c.eta << ',' << c.final_loss << ',' << (c.stable ? 1 : 0) << '\n';
  write_file_atomic(path, os.str());
}

void write_sweep_summary_csv(const std::string& path, const SweepTable& t) {
  std::ostringstream os;
  os << "scale,argmin_index,argmin_eta,max_stable_eta\n" << std::setprecision(17);
  for (const auto& s : t.summary)
    os << s.scale << ',' << s.argmin_index << ',' << s.argmin_eta << ',' << s.max_stable_eta << '\n';
  write_file_atomic(path, os.str());
}

namespace {

std::pair<double, double> loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const int n = static_cast<int>(x.size());
  if (n < 2) return {0.0, 0.0};
  double mx = 0, my = 0;
  for (int i = 0; i < n; ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (int i = 0; i < n; ++i) {
    const double dx = std::log(x[i]) - mx, dy = std::log(y[i]) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  return {sxy / sxx, syy > 0 ? sxy * sxy / (sxx * syy) : 1.0};
}

}  // namespace

MaxLrResult max_lr(const ExperimentConfig& base, SweepAxis axis, const std::vector<double>& scales, double lo,
                   double hi, int steps, int threads) {
  if (!(lo > 0.0 && hi > lo)) throw ContractError("max-lr: bracket needs 0 < lo < hi");
  MaxLrResult out;
  out.rows.resize(scales.size());
  auto stable_at = [&](const ExperimentConfig& c, double eta) {
    return is_stable(run_theory(with_axis(c, SweepAxis::Eta, eta)));
  };
  parallel_for(static_cast<int>(scales.size()), threads, [&](int i) {
    const ExperimentConfig c = with_axis(base, axis, scales[i]);
    if (!stable_at(c, lo) || stable_at(c, hi))
      throw ContractError("max-lr: bracket [" + std::to_string(lo) + ", " + std::to_string(hi) +
                          "] does not straddle the stability boundary at " + axis_name(axis) + "=" +
                          std::to_string(scales[i]));
    double a = std::log(lo), b = std::log(hi);
    for (int k = 0; k < steps; ++k) {
      const double m = 0.5 * (a + b);
      (stable_at(c, std::exp(m)) ? a : b) = m;
    }
    out.rows[i] = {scales[i], std::exp(a)};
  });
  std::vector<double> x, y;
  for (const auto& r : out.rows) {
    x.push_back(r.scale);
    y.push_back(r.eta_max);
  }
  std::tie(out.slope, out.r_squared) = loglog_slope(x, y);
  return out;
}

void write_max_lr_csv(const std::string& path, const MaxLrResult& r) {
  std::ostringstream os;
  os << "scale,eta_max\n" << std::setprecision(17);
  for (const auto& row : r.rows) os << row.scale << ',' << row.eta_max << '\n';
  write_file_atomic(path, os.str());
}

CompareReport compare_curves(const std::string& theory_csv, const std::string& sim_csv, double tolerance) {
  const CsvTable th = read_csv(theory_csv), sm = read_csv(sim_csv);
  const auto ts = th.col("step"), ss = sm.col("step");
  if (ts != ss) throw std::runtime_error("compare: step grids differ (" + std::to_string(ts.size()) + " vs " +
                                         std::to_string(ss.size()) + " rows)");
  const auto theory = th.col("test_loss");
  const auto mean = sm.has("mean_test") ? sm.col("mean_test") : sm.col("test_loss");
  const auto se = sm.has("stderr_test") ? sm.col("stderr_test") : std::vector<double>(mean.size(), 0.0);
  CompareReport r;
  r.tolerance = tolerance;
  r.steps = static_cast<int>(ts.size());
  int inside = 0;
  for (int i = 0; i < r.steps; ++i) {
    const double d = std::abs(theory[i] - mean[i]);
    const double rel = d / std::abs(mean[i]);
    r.max_rel = std::max(r.max_rel, rel);
    r.mean_rel += rel;
    if (d <= 3.0 * se[i]) ++inside;
  }
  if (r.steps > 0) {
    r.mean_rel /= r.steps;
    r.inside_3se = static_cast<double>(inside) / r.steps;
  }
  r.pass = r.max_rel <= tolerance;
  return r;
}

std::string format_report(const CompareReport& r) {
  std::ostringstream os;
  os << std::setprecision(6) << "steps=" << r.steps << " max_rel=" << r.max_rel << " mean_rel=" << r.mean_rel
     << " inside_3se=" << r.inside_3se << " tolerance=" << r.tolerance << " verdict=" << (r.pass ? "pass" : "fail");
  return os.str();
}

}  // namespace deeplin
