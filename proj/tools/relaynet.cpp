#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "relaynet/arq.hpp"
#include "relaynet/config.hpp"
#include "relaynet/csv.hpp"
#include "relaynet/expectation.hpp"
#include "relaynet/opt.hpp"
#include "relaynet/sim.hpp"
#include "relaynet/throughput.hpp"

#ifndef RELAYNET_SCENARIO_DIR
#define RELAYNET_SCENARIO_DIR "scenarios"
#endif

namespace fs = std::filesystem;
using namespace relaynet;

namespace {

struct Options {
  std::string config;
  std::string scenario;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::optional<std::size_t> samples;
  std::optional<std::string> backend;
  std::optional<std::string> tau_grid, rho_grid, delta_grid, d_grid;
};

// "start:stop:num" or a comma-separated list.
std::vector<double> parse_grid_flag(const std::string& s, const std::string& field) {
  std::vector<double> v;
  try {
    if (s.find(':') != std::string::npos) {
      std::vector<std::string> parts;
      std::stringstream ss(s);
      for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
      if (parts.size() != 3) throw ValidationError(field, "expected start:stop:num");
      const double a = std::stod(parts[0]), b = std::stod(parts[1]);
      const long n = std::stol(parts[2]);
      if (n < 2) throw ValidationError(field, "num must be at least 2");
      return linspace(a, b, static_cast<std::size_t>(n));
    }
    std::stringstream ss(s);
    for (std::string p; std::getline(ss, p, ',');) v.push_back(std::stod(p));
  } catch (const std::invalid_argument&) {
    throw ValidationError(field, "not a number list: " + s);
  } catch (const std::out_of_range&) {
    throw ValidationError(field, "number out of range: " + s);
  }
  if (v.empty()) throw ValidationError(field, "must not be empty");
  return v;
}

fs::path scenario_path(const std::string& name) {
  if (const char* dir = std::getenv("RELAYNET_SCENARIO_DIR")) return fs::path(dir) / (name + ".json");
  return fs::path(RELAYNET_SCENARIO_DIR) / (name + ".json");
}

ScenarioConfig load(const Options& o) {
  if (o.config.empty() == o.scenario.empty())
    throw ValidationError("config", "give exactly one of --config and --scenario");
  ScenarioConfig c = load_config(o.config.empty() ? scenario_path(o.scenario) : fs::path(o.config));
  if (o.seed) c.seed = *o.seed;
  if (o.workers) c.workers = *o.workers;
  if (o.samples) c.samples = *o.samples;
  if (o.backend) c.backend = parse_backend(*o.backend);
  if (o.tau_grid) c.grids["tau"] = parse_grid_flag(*o.tau_grid, "tau-grid");
  if (o.rho_grid) c.grids["rho"] = parse_grid_flag(*o.rho_grid, "rho-grid");
  if (o.delta_grid) c.grids["delta"] = parse_grid_flag(*o.delta_grid, "delta-grid");
  if (o.d_grid) c.grids["d"] = parse_grid_flag(*o.d_grid, "d-grid");
  return c;
}

std::unique_ptr<ExpectationBackend> make_backend(const ScenarioConfig& c) {
  if (c.backend == BackendKind::mc) return std::make_unique<MonteCarloBackend>(c.samples, c.seed);
  return std::make_unique<QuadratureBackend>();
}

ArqOptions arq_options(const ScenarioConfig& c) {
  ArqOptions a;
  a.method = c.backend == BackendKind::mc ? ArqMethod::monte_carlo : ArqMethod::quadrature;
  a.samples = c.samples;
  a.seed = c.seed;
  a.workers = c.workers;
  return a;
}

void require_out(const Options& o) {
  if (o.out.empty()) throw ValidationError("out", "an output path is required");
}

std::string summary_rates(const ThroughputResult& r) {
  std::ostringstream s;
  for (std::size_t j = 0; j < r.arrival_rates.size(); ++j)
    s << (j ? " " : "") << "R" << j + 1 << "=" << format_number(r.arrival_rates[j]) << "("
      << to_string(r.bottleneck[j]) << ")";
  return s.str();
}

double tau_of(const ScenarioConfig& c) {
  const auto& ctrl = c.require_control();
  detail::require(ctrl.tau.has_value(), "control.tau", "is required by this command");
  return *ctrl.tau;
}

ThroughputResult fixed_throughput(const ScenarioConfig& c, const NetworkParams& net, double tau,
                                  double rho) {
  const auto& rates = c.require_fixed_rates();
  return throughput_fixed(rates, arq_probs(net, rates, rho, tau, arq_options(c)), c.require_qos());
}

// Two-source evaluator over (tau, rho, delta) for sweeps and regions.
std::function<ThroughputResult(const NetworkParams&, double, double, double)> evaluator(
    const ScenarioConfig& c, const std::string& mode, const ExpectationBackend& backend) {
  detail::require(c.network.n_sources == 2, "network.snr", "sweeps are defined for two sources");
  const QosExponents qos = c.require_qos();
  if (mode == "fixed")
    return [&c](const NetworkParams& net, double tau, double rho, double) {
      return fixed_throughput(c, net, tau, rho);
    };
  return [qos, &backend](const NetworkParams& net, double tau, double rho, double delta) {
    return throughput_variable(RateModel(net, ControlParams::two_user(tau, rho, delta)), qos, backend);
  };
}

int cmd_rates(const Options& o, const std::vector<double>& z, const std::vector<double>& w) {
  require_out(o);
  const ScenarioConfig c = load(o);
  const RateModel model(c.network, c.require_control());
  const std::size_t n = model.n_sources();
  detail::require(z.size() == n, "z", "needs one fading power per source");
  detail::require(w.size() == n, "w", "needs one fading power per destination");
  FadingSample s{z, w};
  for (double x : z) detail::require(x >= 0, "z", "must be nonnegative");
  for (double x : w) detail::require(x >= 0, "w", "must be nonnegative");
  const ServiceRates r = model.rates(s);
  auto out = open_output(o.out);
  CsvWriter csv(out, {"link", "rate"});
  std::ostringstream sum;
  for (std::size_t j = 0; j < n; ++j) {
    csv.row() << "source_" + std::to_string(j + 1) + "_relay" << r.r_src[j];
    sum << "S" << j + 1 << "-R=" << format_number(r.r_src[j]) << " ";
  }
  for (std::size_t j = 0; j < n; ++j) {
    csv.row() << "relay_destination_" + std::to_string(j + 1) << r.r_dst[j];
    sum << "R-D" << j + 1 << "=" << format_number(r.r_dst[j]) << (j + 1 < n ? " " : "");
  }
  std::cout << "rates: " << sum.str() << "\n";
  return 0;
}

int cmd_throughput(const Options& o, const std::string& mode) {
  require_out(o);
  const ScenarioConfig c = load(o);
  const auto backend = make_backend(c);
  auto out = open_output(o.out);
  if (mode == "variable") {
    const auto r = throughput_variable(RateModel(c.network, c.require_control()), c.require_qos(), *backend);
    write_throughput_csv(out, r);
    std::cout << "throughput (variable, " << backend->name() << "): " << summary_rates(r) << "\n";
  } else if (mode == "fixed") {
    const auto r = fixed_throughput(c, c.network, tau_of(c), c.require_control().rho.at(0));
    write_throughput_csv(out, r);
    std::cout << "throughput (fixed, " << to_string(c.backend) << "): " << summary_rates(r) << "\n";
  } else {
    const auto r = throughput_fullduplex(RateModel(c.network, c.require_control()), c.require_qos(), *backend);
    write_fd_throughput_csv(out, r);
    std::cout << "throughput (full-duplex, " << backend->name() << "): " << summary_rates(r.throughput);
    for (std::size_t j = 0; j < r.cases.size(); ++j) {
      std::cout << " case" << j + 1 << "=" << to_string(r.cases[j].case_id);
      if (!r.cases[j].diagnostic.empty()) std::cerr << "note: source " << j + 1 << ": " << r.cases[j].diagnostic << "\n";
    }
    std::cout << "\n";
  }
  return 0;
}

int cmd_stability(const Options& o, const std::string& action, const std::string& mode) {
  require_out(o);
  const ScenarioConfig c = load(o);
  auto out = open_output(o.out);
  if (action == "trace") {
    const auto& rhos = c.require_grid("rho");
    const auto tau_max = trace_stability_boundary_fixed(c.network, c.require_fixed_rates(), rhos, c.workers);
    CsvWriter csv(out, {"rho", "tau_max"});
    std::size_t best = 0;
    for (std::size_t i = 0; i < rhos.size(); ++i) {
      csv.row() << rhos[i] << tau_max[i];
      if (tau_max[i] > tau_max[best]) best = i;
    }
    std::cout << "stability trace: " << rhos.size() << " points, largest tau_max="
              << format_number(tau_max[best]) << " at rho=" << format_number(rhos[best]) << "\n";
    return 0;
  }
  CsvWriter csv(out, {"source", "margin", "stable"});
  std::vector<double> margins;
  if (mode == "fixed") {
    const auto& rates = c.require_fixed_rates();
    const auto p = arq_probs(c.network, rates, c.require_control().rho.at(0), tau_of(c), arq_options(c));
    for (int j = 0; j < 2; ++j) margins.push_back(rates.r_dst[j] * p.p_on[j + 2] - rates.r_src[j] * p.p_on[j]);
  } else {
    const auto backend = make_backend(c);
    margins = stability_check_variable(RateModel(c.network, c.require_control()), *backend).margins;
  }
  bool stable = true;
  for (std::size_t j = 0; j < margins.size(); ++j) {
    csv.row() << static_cast<std::uint64_t>(j + 1) << margins[j] << (margins[j] >= 0 ? "true" : "false");
    stable = stable && margins[j] >= 0;
  }
  std::cout << "stability (" << mode << "): " << (stable ? "stable" : "unstable") << "\n";
  return 0;
}

int cmd_arq(const Options& o) {
  require_out(o);
  const ScenarioConfig c = load(o);
  const auto& rates = c.require_fixed_rates();
  const double tau = tau_of(c), rho = c.require_control().rho.at(0);
  OnOffProbs p, se;
  if (c.backend == BackendKind::mc) {
    const auto mac = mac_state_mc_oracle(c.network, rates, tau, c.samples, c.seed, 0, c.workers);
    const auto bc = bc_on_mc_oracle(c.network, rates, rho, tau, c.samples, c.seed, c.workers);
    p = mac.probs;
    se = mac.std_error;
    for (int k = 2; k < 4; ++k) {
      p.p_on[k] = bc.probs.p_on[k];
      se.p_on[k] = bc.std_error.p_on[k];
    }
  } else {
    p = arq_probs(c.network, rates, rho, tau);
  }
  auto out = open_output(o.out);
  CsvWriter csv(out, {"quantity", "value", "std_err"});
  for (int k = 0; k < 4; ++k)
    csv.row() << "p_m" + std::to_string(k + 1) << p.p_mac_case[k] << se.p_mac_case[k];
  for (int k = 0; k < 4; ++k) csv.row() << "p_" + std::to_string(k + 1) << p.p_on[k] << se.p_on[k];
  std::cout << "arq-probs (" << to_string(c.backend) << "):";
  for (int k = 0; k < 4; ++k) std::cout << " P" << k + 1 << "=" << format_number(p.p_on[k]);
  std::cout << "\n";
  return 0;
}

int cmd_simulate(const Options& o, std::string fit_out) {
  require_out(o);
  const ScenarioConfig c = load(o);
  detail::require(c.sim.has_value(), "sim", "section is required by simulate");
  const SimSection& s = *c.sim;
  const ControlParams& ctrl = c.require_control();
  SimConfig cfg;
  cfg.n_blocks = s.n_blocks;
  cfg.n_reps = s.n_reps;
  cfg.warmup = s.warmup;
  cfg.mode = s.mode;
  cfg.seed = c.seed;
  cfg.workers = c.workers;
  cfg.fixed_rates = c.fixed_rates;
  const std::size_t n = c.network.n_sources;
  for (std::size_t k = 0; k < 2 * n; ++k)
    cfg.buffer_thresholds.push_back(k < n ? s.source_thresholds : s.relay_thresholds);
  if (s.arrival_rates) {
    cfg.arrival_rates = *s.arrival_rates;
  } else if (s.mode == SimMode::fixed_rate) {
    cfg.arrival_rates = fixed_throughput(c, c.network, tau_of(c), ctrl.rho.at(0)).arrival_rates;
  } else {
    const auto backend = make_backend(c);
    cfg.arrival_rates = throughput_variable(RateModel(c.network, ctrl), c.require_qos(), *backend).arrival_rates;
  }
  const SimResult r = simulate_queues(c.network, ctrl, cfg);
  {
    auto out = open_output(o.out);
    write_sim_csv(out, r);
  }
  if (fit_out.empty()) {
    fs::path p(o.out);
    fit_out = (p.parent_path() / (p.stem().string() + "_fit.csv")).string();
  }
  {
    auto out = open_output(fit_out);
    write_fit_csv(out, r);
  }
  std::cout << "simulate: arrivals";
  for (double a : cfg.arrival_rates) std::cout << " " << format_number(a);
  bool all_usable = true;
  for (std::size_t b = 0; b < r.buffers.size(); ++b) {
    std::cout << " " << r.buffers[b] << "=";
    if (r.fits[b].usable) {
      std::cout << format_number(r.fits[b].slope);
    } else {
      std::cout << "unusable";
      all_usable = false;
    }
  }
  std::cout << "\n";
  if (!all_usable) {
    for (std::size_t b = 0; b < r.buffers.size(); ++b)
      if (!r.fits[b].usable) std::cerr << "error: " << r.buffers[b] << " slope fit unusable: " << r.fits[b].reason << "\n";
    return 2;
  }
  return 0;
}

struct SweepFlags {
  std::optional<std::string> axis, objective, mode;
  bool optimize_tau = false;
};

void apply(ScenarioConfig& c, const SweepFlags& f) {
  if (f.axis) c.sweep.axis = *f.axis;
  if (f.objective) c.sweep.objective = *f.objective;
  if (f.mode) c.sweep.mode = *f.mode;
  if (f.optimize_tau) c.sweep.optimize_tau = true;
}

// Objective along the configured sweep axis, other parameters from `control`.
std::function<double(double)> axis_objective(const ScenarioConfig& c, const ExpectationBackend& backend) {
  const auto eval = evaluator(c, c.sweep.mode, backend);
  const ControlParams& ctrl = c.require_control();
  const double tau0 = ctrl.tau.value_or(0.5), rho0 = ctrl.rho.at(0);
  detail::require(c.delta_scalar.has_value(), "control.delta", "sweeps need the scalar form");
  const double delta0 = *c.delta_scalar;
  const std::string axis = c.sweep.axis;
  if (c.sweep.objective.size() == 2 && c.sweep.objective[0] == 'p') {
    detail::require(c.sweep.mode == "fixed", "sweep.objective", "p1..p4 need fixed mode");
    const int k = c.sweep.objective[1] - '1';
    return [&c, tau0, rho0, axis, k](double x) {
      const NetworkParams net = axis == "d" ? c.network_at(x) : c.network;
      return arq_probs(net, c.require_fixed_rates(), axis == "rho" ? x : rho0, axis == "tau" ? x : tau0,
                       arq_options(c))
          .p_on[k];
    };
  }
  const Objective obj = parse_objective(c.sweep.objective);
  const bool opt_tau = c.sweep.optimize_tau && axis != "tau";
  if (!opt_tau) detail::require(ctrl.tau.has_value() || axis == "tau", "control.tau", "is required");
  return [&c, eval, tau0, rho0, delta0, obj, axis, opt_tau](double x) {
    const NetworkParams net = axis == "d" ? c.network_at(x) : c.network;
    const double rho = axis == "rho" ? x : rho0, delta = axis == "delta" ? x : delta0;
    if (opt_tau)
      return maximize_over_tau([&](double t) { return eval(net, t, rho, delta); }, obj).value;
    return objective_value(eval(net, axis == "tau" ? x : tau0, rho, delta), obj);
  };
}

int cmd_sweep(const Options& o, const SweepFlags& f) {
  require_out(o);
  ScenarioConfig c = load(o);
  apply(c, f);
  const auto inner = make_backend(c);
  const CachedBackend backend(*inner);
  const auto grid = c.require_grid(c.sweep.axis);
  const SweepResult s = sweep(axis_objective(c, backend), c.sweep.axis, grid, c.workers);
  auto out = open_output(o.out);
  write_sweep_csv(out, s);
  std::cout << "sweep " << c.sweep.axis << " (" << c.sweep.objective << ", " << c.sweep.mode
            << (c.sweep.optimize_tau ? ", tau optimized" : "") << "): argmax=" << format_number(s.argmax)
            << " value=" << format_number(s.argmax_value) << "\n";
  return 0;
}

int cmd_region(const Options& o, const SweepFlags& f) {
  require_out(o);
  ScenarioConfig c = load(o);
  apply(c, f);
  const auto inner = make_backend(c);
  const CachedBackend backend(*inner);
  const auto eval = evaluator(c, c.sweep.mode, backend);
  const std::vector<double> deltas =
      c.sweep.mode == "fixed" ? std::vector<double>{c.delta_scalar.value_or(0.5)} : c.require_grid("delta");
  const RegionFrontier fr = throughput_region(
      [&](double t, double r, double d) { return eval(c.network, t, r, d); }, c.require_grid("tau"),
      c.require_grid("rho"), deltas, c.workers);
  auto out = open_output(o.out);
  write_region_csv(out, fr);
  std::cout << "region (" << c.sweep.mode << "): " << fr.points.size() << " frontier points";
  if (!fr.points.empty())
    std::cout << ", max R1=" << format_number(fr.points.back().r1)
              << ", max R2=" << format_number(fr.points.front().r2);
  std::cout << "\n";
  return 0;
}

int cmd_concavity(const Options& o, const SweepFlags& f, double tolerance) {
  require_out(o);
  ScenarioConfig c = load(o);
  apply(c, f);
  detail::require(c.sweep.axis == "delta" || c.sweep.axis == "tau", "sweep.axis",
                  "concavity is checked over delta or tau");
  const auto inner = make_backend(c);
  const CachedBackend backend(*inner);
  const auto& grid = c.require_grid(c.sweep.axis);
  const SweepResult s = sweep(axis_objective(c, backend), c.sweep.axis, grid, c.workers);
  const ConcavityReport rep = numeric_concavity_check(s.grid, s.values, tolerance);
  auto out = open_output(o.out);
  CsvWriter csv(out, {c.sweep.axis, "value", "second_difference"});
  for (std::size_t i = 0; i < s.grid.size(); ++i) {
    auto row = csv.row();
    row << s.grid[i] << s.values[i];
    if (i == 0 || i + 1 == s.grid.size()) {
      row << "";
    } else {
      const double w = (s.grid[i + 1] - s.grid[i]) / (s.grid[i + 1] - s.grid[i - 1]);
      row << 2.0 * (w * s.values[i - 1] + (1.0 - w) * s.values[i + 1] - s.values[i]);
    }
  }
  std::cout << "concavity-check " << c.sweep.axis << " (" << c.sweep.objective << "): "
            << (rep.concave ? "concave" : "NOT concave") << ", worst second difference "
            << format_number(rep.worst) << " at " << c.sweep.axis << "=" << format_number(s.grid[rep.worst_index])
            << "\n";
  return 0;
}

void common_flags(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config, "Scenario file (JSON)");
  sub->add_option("--scenario", o.scenario, "Checked-in scenario name (scenarios/NAME.json)");
  sub->add_option("--out", o.out, "Output CSV path");
  sub->add_option("--seed", o.seed, "Random seed");
  sub->add_option("--workers", o.workers, "Maximum worker threads (0 = hardware)");
  sub->add_option("--samples", o.samples, "Monte-Carlo sample count");
  sub->add_option("--backend", o.backend, "Expectation backend")->check(CLI::IsMember({"mc", "quadrature"}));
}

void grid_flags(CLI::App* sub, Options& o) {
  sub->add_option("--tau-grid", o.tau_grid, "tau grid: start:stop:num or a,b,c");
  sub->add_option("--rho-grid", o.rho_grid, "rho grid: start:stop:num or a,b,c");
  sub->add_option("--delta-grid", o.delta_grid, "delta grid: start:stop:num or a,b,c");
  sub->add_option("--d-grid", o.d_grid, "placement grid: start:stop:num or a,b,c");
}

void sweep_flags(CLI::App* sub, SweepFlags& f) {
  sub->add_option("--axis", f.axis, "Swept parameter")->check(CLI::IsMember({"delta", "tau", "rho", "d"}));
  sub->add_option("--objective", f.objective, "sum, r1, r2 or p1..p4 (fixed mode)")
      ->check(CLI::IsMember({"sum", "r1", "r2", "p1", "p2", "p3", "p4"}));
  sub->add_option("--mode", f.mode, "variable or fixed")->check(CLI::IsMember({"variable", "fixed"}));
  sub->add_flag("--optimize-tau", f.optimize_tau, "Optimize tau at every grid point");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Queueing-constrained throughput of two-hop decode-and-forward relay networks"};
  app.require_subcommand(1);
  Options o;
  SweepFlags sf;

  std::vector<double> z, w;
  auto* rates = app.add_subcommand("rates", "Instantaneous link rates for one fading sample");
  common_flags(rates, o);
  rates->add_option("--z", z, "Source-relay fading powers")->delimiter(',')->required();
  rates->add_option("--w", w, "Relay-destination fading powers")->delimiter(',')->required();

  std::string tmode = "variable";
  auto* thr = app.add_subcommand("throughput", "Maximum constant arrival rates under the QoS exponents");
  common_flags(thr, o);
  thr->add_option("--mode", tmode, "variable, fixed or full-duplex")
      ->check(CLI::IsMember({"variable", "fixed", "full-duplex"}));

  std::string saction = "check", smode = "variable";
  auto* stab = app.add_subcommand("stability", "Stability check or fixed-rate boundary trace");
  common_flags(stab, o);
  grid_flags(stab, o);
  stab->add_option("action", saction, "check or trace")->check(CLI::IsMember({"check", "trace"}));
  stab->add_option("--mode", smode, "variable or fixed")->check(CLI::IsMember({"variable", "fixed"}));

  auto* arq = app.add_subcommand("arq-probs", "ARQ link-state probabilities");
  common_flags(arq, o);

  std::string fit_out;
  auto* sim = app.add_subcommand("simulate", "Seeded fluid-queue simulation with slope fits");
  common_flags(sim, o);
  sim->add_option("--fit-out", fit_out, "Slope-fit CSV path (default: <out>_fit.csv)");

  auto* sw = app.add_subcommand("sweep", "Objective along one parameter axis");
  common_flags(sw, o);
  grid_flags(sw, o);
  sweep_flags(sw, sf);

  auto* reg = app.add_subcommand("region", "Pareto frontier of (R1, R2) over tau x rho x delta");
  common_flags(reg, o);
  grid_flags(reg, o);
  reg->add_option("--mode", sf.mode, "variable or fixed")->check(CLI::IsMember({"variable", "fixed"}));

  double tol = 1e-8;
  auto* conc = app.add_subcommand("concavity-check", "Second-difference concavity check over delta or tau");
  common_flags(conc, o);
  grid_flags(conc, o);
  sweep_flags(conc, sf);
  conc->add_option("--tolerance", tol, "Largest admissible second difference");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*rates) return cmd_rates(o, z, w);
    if (*thr) return cmd_throughput(o, tmode);
    if (*stab) return cmd_stability(o, saction, smode);
    if (*arq) return cmd_arq(o);
    if (*sim) return cmd_simulate(o, fit_out);
    if (*sw) return cmd_sweep(o, sf);
    if (*reg) return cmd_region(o, sf);
    if (*conc) return cmd_concavity(o, sf, tol);
  } catch (const ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
