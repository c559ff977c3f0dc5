#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "relaynet/arq.hpp"
#include "relaynet/error.hpp"
#include "relaynet/expectation.hpp"
#include "relaynet/qos.hpp"
#include "relaynet/rates.hpp"

namespace relaynet {

enum class Bottleneck { source_queue, relay_queue, unstable };

inline const char* to_string(Bottleneck b) {
  switch (b) {
    case Bottleneck::source_queue: return "source-queue";
    case Bottleneck::relay_queue: return "relay-queue";
    case Bottleneck::unstable: return "unstable";
  }
  return "?";
}

struct ThroughputResult {
  std::vector<double> arrival_rates;
  std::vector<Bottleneck> bottleneck;
  bool stable = false;

  double sum() const {
    double s = 0.0;
    for (double r : arrival_rates) s += r;
    return s;
  }

  static ThroughputResult unstable(std::size_t n) {
    return {std::vector<double>(n, 0.0), std::vector<Bottleneck>(n, Bottleneck::unstable), false};
  }
};

struct StabilityReport {
  bool stable = false;
  std::vector<double> margins;
};

namespace detail {

// min(source, relay); ties go to the source queue.
inline void assign_min(ThroughputResult& out, std::size_t j, double src, double relay) {
  if (relay < src) {
    out.arrival_rates[j] = std::max(0.0, relay);
    out.bottleneck[j] = Bottleneck::relay_queue;
  } else {
    out.arrival_rates[j] = std::max(0.0, src);
    out.bottleneck[j] = Bottleneck::source_queue;
  }
}

// Source and relay constraints on a constant arrival rate given the service
// LMGFs of both hops (already including any phase-length scaling).
template <class SrcLmgf, class DstLmgf>
std::pair<double, double> lemma_bounds(double theta_j, double theta_r, SrcLmgf&& lambda_src,
                                       DstLmgf&& lambda_dst) {
  const double src = -lambda_src(-theta_j) / theta_j;
  double relay;
  if (theta_r <= theta_j)
    relay = -lambda_dst(-theta_r) / theta_r;
  else
    relay = -(lambda_dst(-theta_r) + lambda_src(theta_r - theta_j)) / theta_j;
  return {src, relay};
}

}  // namespace detail

// Mean-rate stability: margin_j = (1 - tau) E{R_dst_j} - tau E{R_src_j}. In
// full duplex both phases last the whole block.
inline StabilityReport stability_check_variable(const RateModel& model,
                                                const ExpectationBackend& backend) {
  const std::size_t n = model.n_sources();
  const double ts = model.control().time_src();
  const double td = model.control().time_dst();
  StabilityReport r{true, std::vector<double>(n)};
  for (std::size_t j = 0; j < n; ++j) {
    r.margins[j] = td * backend.mean(model, Hop::relay_destination, j) -
                   ts * backend.mean(model, Hop::source_relay, j);
    if (r.margins[j] < 0) r.stable = false;
  }
  return r;
}

// Maximum constant arrival rates of the half-duplex variable-rate scheme.
inline ThroughputResult throughput_variable(const RateModel& model, const QosExponents& qos,
                                            const ExpectationBackend& backend) {
  const std::size_t n = model.n_sources();
  qos.validate(n);
  detail::require(!model.control().full_duplex(), "mode",
                  "use throughput_fullduplex for a full-duplex relay");
  if (!stability_check_variable(model, backend).stable) return ThroughputResult::unstable(n);
  const double tau = *model.control().tau;
  ThroughputResult out{std::vector<double>(n), std::vector<Bottleneck>(n), true};
  for (std::size_t j = 0; j < n; ++j) {
    const auto ls = [&](double s) {
      return backend.lmgf(model, Hop::source_relay, j, s * tau).value;
    };
    const auto ld = [&](double s) {
      return backend.lmgf(model, Hop::relay_destination, j, s * (1.0 - tau)).value;
    };
    const auto [src, relay] = detail::lemma_bounds(qos.theta_src[j], qos.theta_relay, ls, ld);
    detail::assign_min(out, j, src, relay);
  }
  return out;
}

// Mean-rate stability of the ARQ scheme: r_src_j P_j <= r_dst_j P_{j+2}.
inline bool stability_check_fixed(const FixedRates& rates, const OnOffProbs& probs) {
  for (int j = 0; j < 2; ++j)
    if (rates.r_src[j] * probs.p_on[j] > rates.r_dst[j] * probs.p_on[j + 2]) return false;
  return true;
}

// Maximum constant arrival rates of the ARQ scheme from its ON/OFF link model.
inline ThroughputResult throughput_fixed(const FixedRates& rates, const OnOffProbs& probs,
                                         const QosExponents& qos) {
  rates.validate();
  qos.validate(2);
  if (!stability_check_fixed(rates, probs)) return ThroughputResult::unstable(2);
  ThroughputResult out{std::vector<double>(2), std::vector<Bottleneck>(2), true};
  for (std::size_t j = 0; j < 2; ++j) {
    const auto ls = [&](double s) { return lmgf_onoff(rates.r_src[j], probs.p_on[j], s); };
    const auto ld = [&](double s) { return lmgf_onoff(rates.r_dst[j], probs.p_on[j + 2], s); };
    const auto [src, relay] = detail::lemma_bounds(qos.theta_src[j], qos.theta_relay, ls, ld);
    detail::assign_min(out, j, src, relay);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Full duplex

enum class FdCase { source_dominant, relay_slack, smallest_root, matched_capacity, relay_limited };

inline const char* to_string(FdCase c) {
  switch (c) {
    case FdCase::source_dominant: return "1";
    case FdCase::relay_slack: return "2";
    case FdCase::smallest_root: return "3a";
    case FdCase::matched_capacity: return "3b";
    case FdCase::relay_limited: return "3c";
  }
  return "?";
}

struct FdThroughputCase {
  FdCase case_id = FdCase::source_dominant;
  std::optional<double> theta_bar;
  std::optional<double> theta_star;
  std::string diagnostic;
};

struct FdThroughputResult {
  ThroughputResult throughput;
  std::vector<FdThroughputCase> cases;
};

inline constexpr double kFdThetaMin = 1e-6;
inline constexpr double kFdThetaMax = 1e3;
inline constexpr double kFdRootTolerance = 1e-8;
inline constexpr std::size_t kFdScanPoints = 400;

// Root of f on [lo, hi] to absolute tolerance kFdRootTolerance; the caller
// guarantees a sign change.
template <class F>
double bisect_root(F&& f, double lo, double hi) {
  const auto r = boost::math::tools::bisect(
      f, lo, hi, [](double a, double b) { return std::abs(b - a) <= kFdRootTolerance; });
  return 0.5 * (r.first + r.second);
}

// First sign change of f on a log-spaced grid over [lo, hi], refined by
// bisection. `from_positive` restricts to crossings from >= 0 to < 0.
template <class F>
std::optional<double> first_crossing(F&& f, double lo, double hi, bool from_positive = false,
                                     std::size_t n_points = kFdScanPoints) {
  const double step = std::log(hi / lo) / static_cast<double>(n_points - 1);
  double x_prev = lo;
  double f_prev = f(lo);
  if (f_prev == 0.0 && !from_positive) return lo;
  for (std::size_t i = 1; i < n_points; ++i) {
    const double x = i + 1 == n_points ? hi : lo * std::exp(step * static_cast<double>(i));
    const double fx = f(x);
    const bool crossed = from_positive ? (f_prev >= 0 && fx < 0)
                                       : ((f_prev < 0) != (fx < 0) || fx == 0.0);
    if (crossed) {
      if (fx == 0.0) return x;
      return bisect_root(f, x_prev, x);
    }
    x_prev = x;
    f_prev = fx;
  }
  return std::nullopt;
}

// The characteristic functions of one source-destination pair in full duplex.
// S(t) = -log E{e^{-t R_src}} / t, D(t) likewise for the relay link.
class FdPair {
 public:
  FdPair(const RateModel& model, const ExpectationBackend& backend, std::size_t j)
      : model_(model), backend_(backend), j_(j) {}

  double lambda_src(double s) const {
    return backend_.lmgf(model_, Hop::source_relay, j_, s).value;
  }
  double lambda_dst(double s) const {
    return backend_.lmgf(model_, Hop::relay_destination, j_, s).value;
  }
  double S(double t) const { return -lambda_src(-t) / t; }
  double D(double t) const { return -lambda_dst(-t) / t; }
  // Relay constraint with the relay exponent t and source exponent theta_j.
  double G(double t, double theta_j) const {
    return -(lambda_dst(-t) + lambda_src(t - theta_j)) / theta_j;
  }
  // Right-hand side of the smallest-root equation, as a function of t.
  double H(double t, double theta_r) const {
    return -(lambda_dst(-theta_r) + lambda_src(theta_r - t)) / t;
  }
  double inf_src() const { return backend_.infimum(model_, Hop::source_relay, j_); }

 private:
  const RateModel& model_;
  const ExpectationBackend& backend_;
  std::size_t j_;
};

// theta_bar: where G(., theta_j) falls below S(theta_j) on [theta_j, max].
// When G(theta_j) is already below, the relay binds right away and theta_bar
// is theta_j itself. Empty when no crossing exists below the scan limit.
inline std::optional<double> fd_theta_bar(const FdPair& pair, double theta_j) {
  const double target = pair.S(theta_j);
  const auto f = [&](double t) { return pair.G(t, theta_j) - target; };
  if (f(theta_j) < 0) return theta_j;
  return first_crossing(f, theta_j, kFdThetaMax, true);
}

// theta_star for the smallest-root sub-case: first sign change of S - H.
inline std::optional<double> fd_theta_star_smallest(const FdPair& pair, double theta_r) {
  return first_crossing([&](double t) { return pair.S(t) - pair.H(t, theta_r); }, kFdThetaMin,
                        kFdThetaMax);
}

// theta_star for the matched-capacity sub-case: S(t) = D(theta_r), S decreasing.
inline std::optional<double> fd_theta_star_matched(const FdPair& pair, double theta_r) {
  const double target = pair.D(theta_r);
  return first_crossing([&](double t) { return pair.S(t) - target; }, kFdThetaMin, kFdThetaMax);
}

inline FdThroughputResult throughput_fullduplex(const RateModel& model, const QosExponents& qos,
                                                const ExpectationBackend& backend) {
  const std::size_t n = model.n_sources();
  qos.validate(n);
  detail::require(model.control().full_duplex(), "alpha",
                  "full-duplex throughput needs the alpha back-off vector");
  FdThroughputResult res;
  res.cases.resize(n);
  if (!stability_check_variable(model, backend).stable) {
    res.throughput = ThroughputResult::unstable(n);
    return res;
  }
  res.throughput = {std::vector<double>(n), std::vector<Bottleneck>(n), true};
  const double tr = qos.theta_relay;
  for (std::size_t j = 0; j < n; ++j) {
    const FdPair pair(model, backend, j);
    const double tj = qos.theta_src[j];
    auto& c = res.cases[j];
    auto& rate = res.throughput.arrival_rates[j];
    auto& tag = res.throughput.bottleneck[j];
    if (tj >= tr) {
      c.case_id = FdCase::source_dominant;
      const double s = pair.S(tj), d = pair.D(tr);
      rate = std::max(0.0, std::min(s, d));
      tag = d < s ? Bottleneck::relay_queue : Bottleneck::source_queue;
      continue;
    }
    const auto bar = fd_theta_bar(pair, tj);
    c.theta_bar = bar;
    if (!bar) {
      c.diagnostic = "theta_bar not bracketed below " + std::to_string(kFdThetaMax) +
                     "; relay constraint slack on the whole scan";
    }
    if (!bar || tr <= *bar) {
      c.case_id = FdCase::relay_slack;
      rate = std::max(0.0, pair.S(tj));
      tag = Bottleneck::source_queue;
      continue;
    }
    const double d = pair.D(tr);
    const double s_at_r = pair.S(tr);
    if (d >= s_at_r) {
      c.case_id = FdCase::smallest_root;
      const auto star = fd_theta_star_smallest(pair, tr);
      if (!star)
        throw NumericalError("full duplex source " + std::to_string(j + 1) +
                             ": theta* (smallest root) not bracketed in (1e-6, 1e3)");
      c.theta_star = star;
      rate = std::max(0.0, pair.S(*star));
      tag = Bottleneck::relay_queue;
    } else if (d >= pair.inf_src()) {
      c.case_id = FdCase::matched_capacity;
      const auto star = fd_theta_star_matched(pair, tr);
      if (!star)
        throw NumericalError("full duplex source " + std::to_string(j + 1) +
                             ": theta* (matched capacity) not bracketed in (1e-6, 1e3)");
      c.theta_star = star;
      rate = std::max(0.0, pair.S(*star));
      tag = Bottleneck::relay_queue;
    } else {
      c.case_id = FdCase::relay_limited;
      rate = std::max(0.0, d);
      tag = Bottleneck::relay_queue;
    }
  }
  return res;
}

}  // namespace relaynet
