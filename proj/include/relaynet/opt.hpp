#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "relaynet/arq.hpp"
#include "relaynet/error.hpp"
#include "relaynet/parallel.hpp"
#include "relaynet/throughput.hpp"

namespace relaynet {

struct Maximum {
  double x = 0.0;
  double value = 0.0;
  bool feasible = false;
  double lo = 0.0;  // feasible sub-interval that was searched
  double hi = 0.0;
  std::size_t evaluations = 0;
};

inline constexpr std::size_t kBracketScanPoints = 41;

// Golden-section search for the maximum of a concave objective on [lo, hi].
// With a feasibility indicator (e.g. stability), the feasible sub-interval is
// bracketed first: a coarse scan locates a feasible point and bisection on the
// indicator moves each end to within tol of the boundary. The feasible set is
// assumed to be an interval.
inline Maximum maximize_concave_1d(const std::function<double(double)>& f, double lo, double hi,
                                   double tol = 1e-4,
                                   const std::function<bool(double)>& feasible = {}) {
  detail::require(lo < hi, "interval", "lower end must be below upper end");
  detail::require(tol > 0, "tol", "must be positive");
  Maximum m;
  double a = lo, b = hi;
  if (feasible) {
    std::optional<std::size_t> first, last;
    std::vector<double> xs(kBracketScanPoints);
    for (std::size_t i = 0; i < kBracketScanPoints; ++i) {
      xs[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(kBracketScanPoints - 1);
      if (feasible(xs[i])) {
        if (!first) first = i;
        last = i;
      }
    }
    if (!first) return m;
    const auto edge = [&](double in, double out) {
      while (std::abs(out - in) > tol) {
        const double mid = 0.5 * (in + out);
        (feasible(mid) ? in : out) = mid;
      }
      return in;
    };
    a = *first == 0 ? lo : edge(xs[*first], xs[*first - 1]);
    b = *last + 1 == kBracketScanPoints ? hi : edge(xs[*last], xs[*last + 1]);
  }
  m.lo = a;
  m.hi = b;
  m.feasible = true;

  constexpr double kInvPhi = 0.6180339887498949;
  double x1 = b - kInvPhi * (b - a), x2 = a + kInvPhi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  m.evaluations = 2;
  while (b - a > tol) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kInvPhi * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kInvPhi * (b - a);
      f1 = f(x1);
    }
    ++m.evaluations;
  }
  m.x = 0.5 * (a + b);
  m.value = f(m.x);
  // A maximum sitting on an end of the interval is reported exactly there.
  for (double end : {m.lo, m.hi}) {
    const double fe = f(end);
    ++m.evaluations;
    if (fe > m.value) {
      m.x = end;
      m.value = fe;
    }
  }
  if (!feasible && m.value == 0.0) m.feasible = false;
  return m;
}

struct ConcavityReport {
  bool concave = true;
  double worst = -std::numeric_limits<double>::infinity();  // largest second difference
  std::size_t worst_index = 0;                              // grid index of the centre point
};

// Central second differences f(x-) - 2 f(x) + f(x+) (scaled to a uniform step
// for uneven grids) must not exceed `tolerance`.
inline ConcavityReport numeric_concavity_check(const std::vector<double>& grid,
                                               const std::vector<double>& values,
                                               double tolerance = 1e-8) {
  detail::require(grid.size() == values.size(), "grid", "grid and values differ in length");
  detail::require(grid.size() >= 7, "grid", "needs at least 5 interior points");
  ConcavityReport r;
  for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
    const double w = (grid[i + 1] - grid[i]) / (grid[i + 1] - grid[i - 1]);
    const double interp = w * values[i - 1] + (1.0 - w) * values[i + 1];
    const double d2 = 2.0 * (interp - values[i]);
    if (d2 > r.worst) {
      r.worst = d2;
      r.worst_index = i;
    }
  }
  r.concave = r.worst <= tolerance;
  return r;
}

inline ConcavityReport numeric_concavity_check(const std::function<double(double)>& f,
                                               const std::vector<double>& grid,
                                               double tolerance = 1e-8) {
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) v[i] = f(grid[i]);
  return numeric_concavity_check(grid, v, tolerance);
}

struct SweepResult {
  std::string axis;
  std::vector<double> grid;
  std::vector<double> values;
  double argmax = 0.0;
  double argmax_value = 0.0;
};

// Evaluates the objective on every grid point (in parallel, results stored by
// index) and records the first maximizer.
inline SweepResult sweep(const std::function<double(double)>& f, std::string axis,
                         std::vector<double> grid, unsigned workers = 1) {
  detail::require(!grid.empty(), "grid", "must not be empty");
  SweepResult s{std::move(axis), std::move(grid), {}, 0.0, 0.0};
  s.values.resize(s.grid.size());
  parallel_for(s.grid.size(), workers, [&](std::size_t i) { s.values[i] = f(s.grid[i]); });
  const auto best = std::max_element(s.values.begin(), s.values.end()) - s.values.begin();
  s.argmax = s.grid[best];
  s.argmax_value = s.values[best];
  return s;
}

// n evenly spaced points on [lo, hi].
inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
  detail::require(n >= 2, "grid", "needs at least two points");
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i)
    g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  g.back() = hi;
  return g;
}

inline constexpr double kTraceTolerance = 1e-6;

// Largest tau keeping both ARQ relay buffers stable, per rho. Each inequality
// r_src_j P_j(tau) <= r_dst_j P_{j+2}(rho, tau) bounds tau from above; the
// trace is the lower of the two bounds.
inline std::vector<double> trace_stability_boundary_fixed(const NetworkParams& params,
                                                          const FixedRates& rates,
                                                          const std::vector<double>& rho_grid,
                                                          unsigned workers = 1) {
  for (double rho : rho_grid) detail::require(rho > 0 && rho < 1, "rho_grid", "must lie in (0, 1)");
  std::vector<double> out(rho_grid.size());
  parallel_for(rho_grid.size(), workers, [&](std::size_t i) {
    const double rho = rho_grid[i];
    double tau_max = 1.0;
    for (int j = 0; j < 2; ++j) {
      const auto ok = [&](double tau) {
        const OnOffProbs p = arq_probs(params, rates, rho, tau);
        return rates.r_src[j] * p.p_on[j] <= rates.r_dst[j] * p.p_on[j + 2];
      };
      double in = kTraceTolerance, out_ = 1.0 - kTraceTolerance;
      if (!ok(in)) {
        tau_max = 0.0;
        break;
      }
      if (ok(out_)) continue;
      while (out_ - in > kTraceTolerance) {
        const double mid = 0.5 * (in + out_);
        (ok(mid) ? in : out_) = mid;
      }
      tau_max = std::min(tau_max, in);
    }
    out[i] = tau_max;
  });
  return out;
}

struct RegionPoint {
  double r1 = 0.0, r2 = 0.0;
  double tau = 0.0, rho = 0.0, delta = 0.0;
};

struct RegionFrontier {
  std::vector<RegionPoint> points;  // sorted by r1 ascending
};

// Pareto-nondominated subset; exact duplicates are kept once.
inline std::vector<RegionPoint> pareto_front(std::vector<RegionPoint> pts) {
  std::sort(pts.begin(), pts.end(), [](const RegionPoint& a, const RegionPoint& b) {
    return a.r1 != b.r1 ? a.r1 > b.r1 : a.r2 > b.r2;
  });
  std::vector<RegionPoint> front;
  double best_r2 = -std::numeric_limits<double>::infinity();
  for (const auto& p : pts) {
    if (p.r2 > best_r2) {
      front.push_back(p);
      best_r2 = p.r2;
    }
  }
  std::reverse(front.begin(), front.end());
  return front;
}

using RegionEvaluator = std::function<ThroughputResult(double tau, double rho, double delta)>;

// Throughput region over a tau x rho x delta grid: evaluates every point,
// drops unstable ones and keeps the Pareto frontier.
inline RegionFrontier throughput_region(const RegionEvaluator& eval, const std::vector<double>& taus,
                                        const std::vector<double>& rhos,
                                        const std::vector<double>& deltas, unsigned workers = 1) {
  for (double t : taus) detail::require(t > 0 && t < 1, "grids.tau", "must lie in (0, 1)");
  for (double r : rhos) detail::require(r >= 0 && r <= 1, "grids.rho", "must lie in [0, 1]");
  for (double d : deltas) detail::require(d >= 0 && d <= 1, "grids.delta", "must lie in [0, 1]");
  const std::size_t n = taus.size() * rhos.size() * deltas.size();
  std::vector<std::optional<RegionPoint>> pts(n);
  parallel_for(n, workers, [&](std::size_t i) {
    const std::size_t d = i % deltas.size();
    const std::size_t r = (i / deltas.size()) % rhos.size();
    const std::size_t t = i / (deltas.size() * rhos.size());
    const ThroughputResult res = eval(taus[t], rhos[r], deltas[d]);
    if (res.stable)
      pts[i] = RegionPoint{res.arrival_rates[0], res.arrival_rates[1], taus[t], rhos[r], deltas[d]};
  });
  std::vector<RegionPoint> stable;
  for (auto& p : pts)
    if (p) stable.push_back(*p);
  return {pareto_front(std::move(stable))};
}

enum class Objective { sum, r1, r2 };

inline Objective parse_objective(const std::string& s) {
  if (s == "sum") return Objective::sum;
  if (s == "r1") return Objective::r1;
  if (s == "r2") return Objective::r2;
  throw ValidationError("objective", "must be sum, r1 or r2");
}

inline double objective_value(const ThroughputResult& r, Objective o) {
  switch (o) {
    case Objective::r1: return r.arrival_rates.at(0);
    case Objective::r2: return r.arrival_rates.at(1);
    case Objective::sum: break;
  }
  return r.sum();
}

inline constexpr double kTauSearchMargin = 1e-3;

// Best tau for an objective that drops to zero outside the stability region.
inline Maximum maximize_over_tau(const std::function<ThroughputResult(double)>& eval, Objective o,
                                 double tol = 1e-4) {
  return maximize_concave_1d([&](double t) { return objective_value(eval(t), o); },
                             kTauSearchMargin, 1.0 - kTauSearchMargin, tol,
                             [&](double t) { return eval(t).stable; });
}

}  // namespace relaynet
