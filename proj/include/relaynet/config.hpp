#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "relaynet/arq.hpp"
#include "relaynet/channel.hpp"
#include "relaynet/error.hpp"
#include "relaynet/qos.hpp"
#include "relaynet/rates.hpp"
#include "relaynet/sim.hpp"

namespace relaynet {

enum class BackendKind { quadrature, mc };

inline const char* to_string(BackendKind b) { return b == BackendKind::mc ? "mc" : "quadrature"; }

struct SimSection {
  std::uint64_t n_blocks = 1'000'000;
  std::size_t n_reps = 10;
  std::uint64_t warmup = 10'000;
  SimMode mode = SimMode::variable_rate;
  std::vector<double> source_thresholds;
  std::vector<double> relay_thresholds;
  std::optional<std::vector<double>> arrival_rates;  // computed from the analysis when absent
};

struct SweepSpec {
  std::string axis = "delta";  // delta | tau | rho | d
  std::string objective = "sum";  // sum | r1 | r2 | p1..p4 (fixed mode)
  std::string mode = "variable";  // variable | fixed
  bool optimize_tau = false;
};

// One scenario document. Everything except `network` is optional; each
// subcommand checks for the sections it needs.
struct ScenarioConfig {
  std::string description;
  NetworkParams network;
  std::optional<PlacementParams> placement;
  std::optional<QosExponents> qos;
  std::optional<ControlParams> control;
  std::optional<double> delta_scalar;  // two-source shorthand value, when given
  std::optional<FixedRates> fixed_rates;
  std::optional<SimSection> sim;
  SweepSpec sweep;
  BackendKind backend = BackendKind::quadrature;
  std::size_t samples = 1'000'000;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  std::map<std::string, std::vector<double>> grids;

  const QosExponents& require_qos() const {
    detail::require(qos.has_value(), "qos", "section is required by this command");
    return *qos;
  }
  const ControlParams& require_control() const {
    detail::require(control.has_value(), "control", "section is required by this command");
    return *control;
  }
  const FixedRates& require_fixed_rates() const {
    detail::require(fixed_rates.has_value(), "fixed_rates", "section is required by this command");
    return *fixed_rates;
  }
  const std::vector<double>& require_grid(const std::string& name) const {
    const auto it = grids.find(name);
    if (it == grids.end()) throw ValidationError("grids." + name, "grid is required by this command");
    return it->second;
  }

  // Network with fading means taken from a placement position d.
  NetworkParams network_at(double d) const {
    detail::require(placement.has_value(), "network.placement",
                    "section is required for placement sweeps");
    PlacementParams p = *placement;
    p.position = d;
    const MeanPowers m = pathloss_means(p);
    NetworkParams n = network;
    n.mean_z.assign(n.n_sources, m.mean_z);
    n.mean_w.assign(n.n_sources, m.mean_w);
    n.validate();
    return n;
  }
};

namespace config_detail {

using nlohmann::json;

inline std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

inline void only_keys(const json& j, const std::string& path, std::set<std::string> allowed) {
  if (!j.is_object()) throw ValidationError(path.empty() ? "config" : path, "must be a table");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ValidationError(join(path, k), "unknown key");
}

inline double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ValidationError(path, "must be a number");
  return j.get<double>();
}

inline std::uint64_t count(const json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (v >= 0 && v == std::floor(v) && v < 1.8e19) return static_cast<std::uint64_t>(v);
  }
  throw ValidationError(path, "must be a nonnegative integer");
}

inline std::string text(const json& j, const std::string& path) {
  if (!j.is_string()) throw ValidationError(path, "must be a string");
  return j.get<std::string>();
}

// A number broadcasts to `n` entries; an array must have exactly n.
inline std::vector<double> vec(const json& j, const std::string& path, std::size_t n) {
  if (j.is_number()) return std::vector<double>(n, j.get<double>());
  if (!j.is_array()) throw ValidationError(path, "must be a number or an array of numbers");
  std::vector<double> v;
  for (std::size_t i = 0; i < j.size(); ++i) v.push_back(number(j[i], path));
  if (n != 0 && v.size() != n)
    throw ValidationError(path, "length must be " + std::to_string(n));
  return v;
}

// Grid: explicit array, {start, stop, num} (evenly spaced, both ends) or
// {start, stop, step}.
inline std::vector<double> grid(const json& j, const std::string& path) {
  if (j.is_array()) {
    auto v = vec(j, path, 0);
    if (v.empty()) throw ValidationError(path, "must not be empty");
    return v;
  }
  only_keys(j, path, {"start", "stop", "num", "step"});
  if (!j.contains("start") || !j.contains("stop"))
    throw ValidationError(path, "needs start and stop");
  const double a = number(j["start"], join(path, "start"));
  const double b = number(j["stop"], join(path, "stop"));
  if (j.contains("num") == j.contains("step"))
    throw ValidationError(path, "needs exactly one of num and step");
  std::vector<double> g;
  if (j.contains("num")) {
    const auto n = count(j["num"], join(path, "num"));
    if (n < 1) throw ValidationError(join(path, "num"), "must be at least 1");
    if (n == 1) return {a};
    for (std::uint64_t i = 0; i < n; ++i)
      g.push_back(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
    g.back() = b;
  } else {
    const double h = number(j["step"], join(path, "step"));
    if (!(h > 0) || !(b >= a)) throw ValidationError(join(path, "step"), "must be positive with stop >= start");
    const auto n = static_cast<std::uint64_t>(std::floor((b - a) / h + 1e-9));
    for (std::uint64_t i = 0; i <= n; ++i) g.push_back(a + h * static_cast<double>(i));
  }
  return g;
}

// Re-throws a nested validation failure with the section path prefixed.
template <class F>
void scoped(const std::string& prefix, F&& f) {
  try {
    f();
  } catch (const ValidationError& e) {
    const std::string& field = e.field();
    const bool prefixed = field.rfind(prefix + ".", 0) == 0;
    const std::string msg = std::string(e.what()).substr(field.size() + 2);
    throw ValidationError(prefixed ? field : prefix + "." + field, msg);
  }
}

inline void parse_network(const json& j, ScenarioConfig& c) {
  const std::string p = "network";
  only_keys(j, p, {"snr", "snr_db", "snr_relay", "snr_relay_db", "mean_z", "mean_w", "bandwidth",
                   "placement"});
  if (j.contains("snr") == j.contains("snr_db"))
    throw ValidationError(p + ".snr", "give exactly one of snr and snr_db");
  if (j.contains("snr_relay") == j.contains("snr_relay_db"))
    throw ValidationError(p + ".snr_relay", "give exactly one of snr_relay and snr_relay_db");
  NetworkParams& n = c.network;
  if (j.contains("snr")) {
    n.snr_sources = vec(j["snr"], p + ".snr", 0);
  } else {
    n.snr_sources = vec(j["snr_db"], p + ".snr_db", 0);
    for (double& s : n.snr_sources) s = snr_from_db(s);
  }
  n.n_sources = n.snr_sources.size();
  n.snr_relay = j.contains("snr_relay") ? number(j["snr_relay"], p + ".snr_relay")
                                        : snr_from_db(number(j["snr_relay_db"], p + ".snr_relay_db"));
  n.mean_z = j.contains("mean_z") ? vec(j["mean_z"], p + ".mean_z", n.n_sources)
                                  : std::vector<double>(n.n_sources, 1.0);
  n.mean_w = j.contains("mean_w") ? vec(j["mean_w"], p + ".mean_w", n.n_sources)
                                  : std::vector<double>(n.n_sources, 1.0);
  if (j.contains("bandwidth")) n.bandwidth = number(j["bandwidth"], p + ".bandwidth");
  if (j.contains("placement")) {
    const auto& q = j["placement"];
    const std::string pp = p + ".placement";
    only_keys(q, pp, {"distance", "position", "exponent"});
    PlacementParams pl;
    if (q.contains("distance")) pl.total_distance = number(q["distance"], pp + ".distance");
    if (q.contains("position")) pl.position = number(q["position"], pp + ".position");
    if (q.contains("exponent")) pl.pathloss_exponent = number(q["exponent"], pp + ".exponent");
    if (j.contains("mean_z") || j.contains("mean_w"))
      throw ValidationError(pp, "placement derives mean_z and mean_w; do not give both");
    scoped(pp, [&] {
      const MeanPowers m = pathloss_means(pl);
      n.mean_z.assign(n.n_sources, m.mean_z);
      n.mean_w.assign(n.n_sources, m.mean_w);
    });
    c.placement = pl;
  }
  scoped(p, [&] { n.validate(); });
}

inline void parse_qos(const json& j, ScenarioConfig& c) {
  const std::string p = "qos";
  only_keys(j, p, {"theta_src", "theta_relay"});
  if (!j.contains("theta_src") || !j.contains("theta_relay"))
    throw ValidationError(p, "needs theta_src and theta_relay");
  QosExponents q{vec(j["theta_src"], p + ".theta_src", c.network.n_sources),
                 number(j["theta_relay"], p + ".theta_relay")};
  scoped(p, [&] { q.validate(c.network.n_sources); });
  c.qos = q;
}

inline void parse_control(const json& j, ScenarioConfig& c) {
  const std::string p = "control";
  only_keys(j, p, {"tau", "rho", "delta", "alpha"});
  const std::size_t n = c.network.n_sources;
  ControlParams ctrl;
  if (j.contains("tau")) ctrl.tau = number(j["tau"], p + ".tau");
  if (j.contains("alpha")) ctrl.alpha = vec(j["alpha"], p + ".alpha", n);
  // A scalar rho / delta is the two-source shorthand (rho, 1 - rho).
  if (!j.contains("rho")) throw ValidationError(p + ".rho", "is required");
  if (j["rho"].is_number()) {
    if (n != 2) throw ValidationError(p + ".rho", "scalar form needs two sources; give an array");
    const double r = number(j["rho"], p + ".rho");
    ctrl.rho = {r, 1.0 - r};
  } else {
    ctrl.rho = vec(j["rho"], p + ".rho", n);
  }
  scoped(p, [&] {
    if (!j.contains("delta")) {
      ctrl.delta = TimeSharing::uniform(n);
      if (n == 2) c.delta_scalar = 0.5;
    } else if (j["delta"].is_number()) {
      detail::require(n == 2, "delta", "scalar form needs two sources; give an array");
      const double d = number(j["delta"], p + ".delta");
      detail::require(d >= 0 && d <= 1, "delta", "must lie in [0, 1]");
      ctrl.delta = TimeSharing::two_user(d);
      c.delta_scalar = d;
    } else {
      const auto w = vec(j["delta"], p + ".delta", 0);
      ctrl.delta = TimeSharing::dense(n, w);
    }
    ctrl.validate(n);
  });
  c.control = ctrl;
}

inline void parse_fixed_rates(const json& j, ScenarioConfig& c) {
  const std::string p = "fixed_rates";
  only_keys(j, p, {"rate", "r_src", "r_dst"});
  detail::require(c.network.n_sources == 2, "fixed_rates", "the ARQ model is defined for two sources");
  FixedRates r;
  if (j.contains("rate")) {
    if (j.contains("r_src") || j.contains("r_dst"))
      throw ValidationError(p + ".rate", "give either rate or r_src/r_dst");
    r = FixedRates::uniform(number(j["rate"], p + ".rate"));
  } else {
    if (!j.contains("r_src") || !j.contains("r_dst"))
      throw ValidationError(p, "needs rate or both r_src and r_dst");
    const auto s = vec(j["r_src"], p + ".r_src", 2), d = vec(j["r_dst"], p + ".r_dst", 2);
    r = FixedRates{{s[0], s[1]}, {d[0], d[1]}};
  }
  r.validate();
  c.fixed_rates = r;
}

inline void parse_sim(const json& j, ScenarioConfig& c) {
  const std::string p = "sim";
  only_keys(j, p, {"n_blocks", "n_reps", "warmup", "mode", "thresholds", "source_thresholds",
                   "relay_thresholds", "arrival_rates"});
  SimSection s;
  if (j.contains("n_blocks")) s.n_blocks = count(j["n_blocks"], p + ".n_blocks");
  if (j.contains("n_reps")) s.n_reps = count(j["n_reps"], p + ".n_reps");
  if (j.contains("warmup")) s.warmup = count(j["warmup"], p + ".warmup");
  if (j.contains("mode")) {
    const auto m = text(j["mode"], p + ".mode");
    if (m == "variable") s.mode = SimMode::variable_rate;
    else if (m == "fixed") s.mode = SimMode::fixed_rate;
    else throw ValidationError(p + ".mode", "must be variable or fixed");
  }
  if (j.contains("thresholds")) {
    if (j.contains("source_thresholds") || j.contains("relay_thresholds"))
      throw ValidationError(p + ".thresholds", "give either thresholds or per-buffer-kind grids");
    s.source_thresholds = s.relay_thresholds = grid(j["thresholds"], p + ".thresholds");
  } else {
    if (!j.contains("source_thresholds") || !j.contains("relay_thresholds"))
      throw ValidationError(p + ".thresholds", "thresholds (or source_ and relay_thresholds) required");
    s.source_thresholds = grid(j["source_thresholds"], p + ".source_thresholds");
    s.relay_thresholds = grid(j["relay_thresholds"], p + ".relay_thresholds");
  }
  if (j.contains("arrival_rates"))
    s.arrival_rates = vec(j["arrival_rates"], p + ".arrival_rates", c.network.n_sources);
  c.sim = s;
}

inline void parse_sweep(const json& j, ScenarioConfig& c) {
  const std::string p = "sweep";
  only_keys(j, p, {"axis", "objective", "mode", "optimize_tau"});
  if (j.contains("axis")) c.sweep.axis = text(j["axis"], p + ".axis");
  if (j.contains("objective")) c.sweep.objective = text(j["objective"], p + ".objective");
  if (j.contains("mode")) c.sweep.mode = text(j["mode"], p + ".mode");
  if (j.contains("optimize_tau")) {
    if (!j["optimize_tau"].is_boolean()) throw ValidationError(p + ".optimize_tau", "must be a boolean");
    c.sweep.optimize_tau = j["optimize_tau"].get<bool>();
  }
  const std::set<std::string> axes{"delta", "tau", "rho", "d"}, objs{"sum", "r1", "r2", "p1", "p2", "p3", "p4"},
      modes{"variable", "fixed"};
  detail::require(axes.count(c.sweep.axis) > 0, "sweep.axis", "must be delta, tau, rho or d");
  detail::require(objs.count(c.sweep.objective) > 0, "sweep.objective", "must be sum, r1, r2 or p1..p4");
  detail::require(modes.count(c.sweep.mode) > 0, "sweep.mode", "must be variable or fixed");
}

}  // namespace config_detail

inline BackendKind parse_backend(const std::string& s) {
  if (s == "quadrature") return BackendKind::quadrature;
  if (s == "mc") return BackendKind::mc;
  throw ValidationError("backend", "must be mc or quadrature");
}

inline ScenarioConfig parse_config(const nlohmann::json& j) {
  using namespace config_detail;
  only_keys(j, "", {"description", "network", "qos", "control", "fixed_rates", "sim", "sweep",
                    "backend", "samples", "seed", "workers", "grids"});
  ScenarioConfig c;
  if (j.contains("description")) c.description = text(j["description"], "description");
  if (!j.contains("network")) throw ValidationError("network", "section is required");
  parse_network(j["network"], c);
  if (j.contains("qos")) parse_qos(j["qos"], c);
  if (j.contains("control")) parse_control(j["control"], c);
  if (j.contains("fixed_rates")) parse_fixed_rates(j["fixed_rates"], c);
  if (j.contains("sim")) parse_sim(j["sim"], c);
  if (j.contains("sweep")) parse_sweep(j["sweep"], c);
  if (j.contains("backend")) c.backend = parse_backend(text(j["backend"], "backend"));
  if (j.contains("samples")) c.samples = count(j["samples"], "samples");
  if (j.contains("seed")) c.seed = count(j["seed"], "seed");
  if (j.contains("workers")) c.workers = static_cast<unsigned>(count(j["workers"], "workers"));
  if (j.contains("grids")) {
    only_keys(j["grids"], "grids", {"tau", "rho", "delta", "d"});
    for (const auto& [k, v] : j["grids"].items()) c.grids[k] = grid(v, "grids." + k);
  }
  return c;
}

inline ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config", "cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("config", std::string("parse error: ") + e.what());
  }
  return parse_config(j);
}

}  // namespace relaynet
