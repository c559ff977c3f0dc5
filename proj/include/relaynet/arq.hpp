#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "relaynet/channel.hpp"
#include "relaynet/error.hpp"
#include "relaynet/parallel.hpp"
#include "relaynet/quadrature.hpp"
#include "relaynet/random.hpp"

namespace relaynet {

// Fixed transmission rates of the ARQ scheme, two sources.
struct FixedRates {
  std::array<double, 2> r_src{};
  std::array<double, 2> r_dst{};

  // Zero is accepted as the degenerate always-decodable limit.
  void validate() const {
    for (double r : r_src)
      detail::require(std::isfinite(r) && r >= 0, "fixed_rates.r_src", "must be finite and >= 0");
    for (double r : r_dst)
      detail::require(std::isfinite(r) && r >= 0, "fixed_rates.r_dst", "must be finite and >= 0");
  }

  static FixedRates uniform(double r) { return {{r, r}, {r, r}}; }
};

// p_mac_case[i] is the probability of multiple-access case i + 1:
//   case 1: nothing decoded, case 2: only S1, case 3: only S2, case 4: both.
// p_on = (P1, P2, P3, P4): links S1-R, S2-R, R-D1, R-D2.
struct OnOffProbs {
  std::array<double, 4> p_mac_case{};
  std::array<double, 4> p_on{};
};

// Same layout, for sampled estimates.
struct OnOffEstimate {
  OnOffProbs probs;
  OnOffProbs std_error;
  std::size_t n_samples = 0;
};

enum class ArqMethod { quadrature, monte_carlo };

inline constexpr double kArqQuadratureTolerance = 1e-9;

namespace detail {

inline void require_two_users(const NetworkParams& p) {
  require(p.n_sources == 2, "n_sources", "the ARQ model is defined for two sources");
}

inline void require_open_unit(double x, const char* field) {
  require(x > 0.0 && x < 1.0, field, "must lie in (0, 1)");
}

}  // namespace detail

// SINR thresholds beta_j = 2^(r_j / (tau B)) - 1 of the multiple-access phase.
inline std::array<double, 2> mac_decode_thresholds(const FixedRates& rates, double tau,
                                                   double bandwidth) {
  rates.validate();
  detail::require_open_unit(tau, "tau");
  detail::require(bandwidth > 0, "bandwidth", "must be positive");
  return {std::exp2(rates.r_src[0] / (tau * bandwidth)) - 1.0,
          std::exp2(rates.r_src[1] / (tau * bandwidth)) - 1.0};
}

// Outcome of the multiple-access decoding procedure for one block, 0-based
// (0 = case 1, ..., 3 = case 4). x_j = SNR_j z_j. The relay first tries the
// source named by `first` while treating the other as noise, then the other
// one, then whatever is left after cancellation.
inline int mac_case(double x1, double x2, const FixedRates& rates, double tau, double bandwidth,
                    int first = 0) {
  const double tb = tau * bandwidth;
  const std::array<double, 2> x{x1, x2};
  const int a = first, b = 1 - first;
  bool decoded[2] = {false, false};
  if (rates.r_src[a] <= tb * std::log2(1.0 + x[a] / (1.0 + x[b]))) {
    decoded[a] = true;
    decoded[b] = rates.r_src[b] <= tb * std::log2(1.0 + x[b]);
  } else if (rates.r_src[b] <= tb * std::log2(1.0 + x[b] / (1.0 + x[a]))) {
    decoded[b] = true;
    decoded[a] = rates.r_src[a] <= tb * std::log2(1.0 + x[a]);
  }
  return (decoded[0] ? 1 : 0) + (decoded[1] ? 2 : 0);
}

// Broadcast decoding at destination j for one block: own message with the
// other as noise, else the other message first and then its own after
// cancellation. x = SNR_r w_j, share = power fraction of the own message.
inline bool bc_link_on(double x, double r_own, double r_other, double share, double tau,
                       double bandwidth) {
  const double tb = (1.0 - tau) * bandwidth;
  const double other = 1.0 - share;
  if (r_own <= tb * std::log2(1.0 + share * x / (1.0 + other * x))) return true;
  return r_other <= tb * std::log2(1.0 + other * x / (1.0 + share * x)) &&
         r_own <= tb * std::log2(1.0 + share * x);
}

// Threshold form of the broadcast ON events. a[0..2] serve R-D1, b[0..2]
// serve R-D2 (in units of w). A threshold whose denominator is not positive
// can never be met and is stored as -infinity.
struct BcThresholds {
  std::array<double, 3> a{};
  std::array<double, 3> b{};
};

namespace detail {

inline std::array<double, 3> bc_threshold_triple(double c_own, double c_other, double share,
                                                 double snr_r) {
  constexpr double kNever = -std::numeric_limits<double>::infinity();
  const double other = 1.0 - share;
  const double d1 = 1.0 - other * c_own;
  const double d3 = 1.0 - share * c_other;
  return {d1 > 0 ? (c_own - 1.0) / (snr_r * d1) : kNever,
          share > 0 ? (c_own - 1.0) / (snr_r * share) : std::numeric_limits<double>::infinity(),
          d3 > 0 ? (c_other - 1.0) / (snr_r * d3) : kNever};
}

// ON probability from a threshold triple under an exponential power with the
// given mean. Three-branch rule on the signs and order of (t1, t3). A zero
// rate gives t1 = 0, which counts as the "decodable with interference" branch.
inline double bc_on_probability(const std::array<double, 3>& t, double mean) {
  const auto tail = [mean](double x) { return x <= 0 ? 1.0 : std::exp(-x / mean); };
  if (t[0] < 0 && t[2] < 0) return 0.0;
  if ((t[0] >= 0 && t[2] < 0) || (t[2] > t[0] && t[0] >= 0)) return tail(t[0]);
  return tail(std::max(t[1], t[2]));
}

}  // namespace detail

inline BcThresholds bc_thresholds(const NetworkParams& params, const FixedRates& rates, double rho,
                                  double tau) {
  params.validate();
  rates.validate();
  detail::require_two_users(params);
  detail::require(rho >= 0.0 && rho <= 1.0, "rho", "must lie in [0, 1]");
  detail::require_open_unit(tau, "tau");
  const double tb = (1.0 - tau) * params.bandwidth;
  const double c = std::exp2(rates.r_dst[0] / tb);
  const double d = std::exp2(rates.r_dst[1] / tb);
  return {detail::bc_threshold_triple(c, d, rho, params.snr_relay),
          detail::bc_threshold_triple(d, c, 1.0 - rho, params.snr_relay)};
}

// Closed-form ON probabilities (P3, P4) of the broadcast links.
inline std::array<double, 2> bc_on_probs(const NetworkParams& params, const FixedRates& rates,
                                         double rho, double tau) {
  const BcThresholds t = bc_thresholds(params, rates, rho, tau);
  return {detail::bc_on_probability(t.a, params.mean_w[0]),
          detail::bc_on_probability(t.b, params.mean_w[1])};
}

namespace detail {

inline void fill_on_from_cases(OnOffProbs& p) {
  p.p_on[0] = p.p_mac_case[1] + p.p_mac_case[3];
  p.p_on[1] = p.p_mac_case[2] + p.p_mac_case[3];
}

}  // namespace detail

// Multiple-access case probabilities and (P1, P2) by closed form plus one
// 1-D Gauss-Kronrod integral. Entries p_on[2..3] are left at zero.
inline OnOffProbs mac_state_probs_quadrature(const NetworkParams& params, const FixedRates& rates,
                                             double tau) {
  params.validate();
  detail::require_two_users(params);
  const auto beta = mac_decode_thresholds(rates, tau, params.bandwidth);
  const double m1 = params.snr_sources[0] * params.mean_z[0];
  const double m2 = params.snr_sources[1] * params.mean_z[1];
  const double b1 = beta[0], b2 = beta[1];

  // Case 2: x1 >= b1 (1 + x2), x2 < b2. Case 3 mirrors it.
  const auto strip = [](double bi, double mi, double bk, double mk) {
    if (bk <= 0) return 0.0;
    const double k = 1.0 / mk + bi / mi;
    return std::exp(-bi / mi) / mk * (-std::expm1(-k * bk)) / k;
  };
  OnOffProbs p;
  p.p_mac_case[1] = strip(b1, m1, b2, m2);
  p.p_mac_case[2] = strip(b2, m2, b1, m1);

  // Case 1: for each x2, x1 lies in [max(0, x2/b2 - 1), b1 (1 + x2)).
  double case1 = 0.0;
  double case1_err = 0.0;
  if (b1 > 0 && b2 > 0) {
    const auto integrand = [&](double x2) {
      const double hi = b1 * (1.0 + x2);
      const double lo = std::max(0.0, x2 / b2 - 1.0);
      if (!(hi > lo)) return 0.0;
      const double mass = std::exp(-lo / m1) - std::exp(-hi / m1);
      return std::exp(-x2 / m2) / m2 * mass;
    };
    const bool bounded = b1 * b2 < 1.0;
    const double upper =
        bounded ? b2 * (1.0 + b1) / (1.0 - b1 * b2) : std::numeric_limits<double>::infinity();
    // The integrand is bounded by the density of x2; its tail past 60 means is
    // below 1e-26. Without the cut a huge b2 hides all the mass near zero.
    const double end = std::min(upper, 60.0 * m2);
    const double split = std::min(b2, end);
    const auto left = integrate(integrand, 0.0, split, 1e-12);
    case1 = left.value;
    case1_err = left.error;
    if (split < end) {
      const auto right = integrate(integrand, split, end, 1e-12);
      case1 += right.value;
      case1_err += right.error;
    }
    require_converged({case1, case1_err}, kArqQuadratureTolerance, "multiple-access case 1");
  }
  p.p_mac_case[0] = case1;
  const double partial = p.p_mac_case[0] + p.p_mac_case[1] + p.p_mac_case[2];
  if (partial > 1.0 + kArqQuadratureTolerance)
    throw NumericalError("multiple-access case probabilities exceed one (sum " +
                         std::to_string(partial) + ")");
  p.p_mac_case[3] = std::max(0.0, 1.0 - partial);
  detail::fill_on_from_cases(p);
  return p;
}

namespace detail {

inline double binomial_se(double p, std::size_t n) {
  return n == 0 ? 0.0 : std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(n));
}

inline constexpr std::size_t kOracleChunk = std::size_t{1} << 18;

}  // namespace detail

// Brute-force oracle: draws (z1, z2), runs the decoding procedure and counts
// the cases. `first` = 1 starts the procedure with S2. Sample i uses counter i
// of two per-link streams, so the result does not depend on `workers`.
inline OnOffEstimate mac_state_mc_oracle(const NetworkParams& params, const FixedRates& rates,
                                         double tau, std::size_t n, std::uint64_t seed,
                                         int first = 0, unsigned workers = 1) {
  params.validate();
  rates.validate();
  detail::require_two_users(params);
  detail::require_open_unit(tau, "tau");
  detail::require(n >= 1, "samples", "must be at least 1");
  const CounterRng g1(derive_seed(seed, 0)), g2(derive_seed(seed, 1));
  const double m1 = params.mean_z[0], m2 = params.mean_z[1];
  const double s1 = params.snr_sources[0], s2 = params.snr_sources[1];
  const std::size_t n_chunks = (n + detail::kOracleChunk - 1) / detail::kOracleChunk;
  std::vector<std::array<std::size_t, 4>> counts(n_chunks);
  parallel_for(n_chunks, workers, [&](std::size_t c) {
    std::array<std::size_t, 4> local{};
    const std::size_t end = std::min(n, (c + 1) * detail::kOracleChunk);
    for (std::size_t i = c * detail::kOracleChunk; i < end; ++i) {
      const double z1 = -m1 * std::log1p(-g1.uniform(i));
      const double z2 = -m2 * std::log1p(-g2.uniform(i));
      ++local[mac_case(s1 * z1, s2 * z2, rates, tau, params.bandwidth, first)];
    }
    counts[c] = local;
  });
  std::array<std::size_t, 4> total{};
  for (const auto& c : counts)
    for (int k = 0; k < 4; ++k) total[k] += c[k];
  OnOffEstimate e;
  e.n_samples = n;
  for (int k = 0; k < 4; ++k) {
    e.probs.p_mac_case[k] = static_cast<double>(total[k]) / static_cast<double>(n);
    e.std_error.p_mac_case[k] = detail::binomial_se(e.probs.p_mac_case[k], n);
  }
  detail::fill_on_from_cases(e.probs);
  for (int j = 0; j < 2; ++j) e.std_error.p_on[j] = detail::binomial_se(e.probs.p_on[j], n);
  return e;
}

// Brute-force oracle for (P3, P4): draws (w1, w2) and runs each destination's
// decoding procedure. Returned in p_on[2..3].
inline OnOffEstimate bc_on_mc_oracle(const NetworkParams& params, const FixedRates& rates,
                                     double rho, double tau, std::size_t n, std::uint64_t seed,
                                     unsigned workers = 1) {
  params.validate();
  rates.validate();
  detail::require_two_users(params);
  detail::require_open_unit(tau, "tau");
  detail::require(rho >= 0.0 && rho <= 1.0, "rho", "must lie in [0, 1]");
  detail::require(n >= 1, "samples", "must be at least 1");
  const CounterRng g1(derive_seed(seed, 2)), g2(derive_seed(seed, 3));
  const double s = params.snr_relay;
  const std::size_t n_chunks = (n + detail::kOracleChunk - 1) / detail::kOracleChunk;
  std::vector<std::array<std::size_t, 2>> counts(n_chunks);
  parallel_for(n_chunks, workers, [&](std::size_t c) {
    std::array<std::size_t, 2> local{};
    const std::size_t end = std::min(n, (c + 1) * detail::kOracleChunk);
    for (std::size_t i = c * detail::kOracleChunk; i < end; ++i) {
      const double w1 = -params.mean_w[0] * std::log1p(-g1.uniform(i));
      const double w2 = -params.mean_w[1] * std::log1p(-g2.uniform(i));
      local[0] += bc_link_on(s * w1, rates.r_dst[0], rates.r_dst[1], rho, tau, params.bandwidth);
      local[1] +=
          bc_link_on(s * w2, rates.r_dst[1], rates.r_dst[0], 1.0 - rho, tau, params.bandwidth);
    }
    counts[c] = local;
  });
  std::array<std::size_t, 2> total{};
  for (const auto& c : counts)
    for (int k = 0; k < 2; ++k) total[k] += c[k];
  OnOffEstimate e;
  e.n_samples = n;
  for (int k = 0; k < 2; ++k) {
    e.probs.p_on[2 + k] = static_cast<double>(total[k]) / static_cast<double>(n);
    e.std_error.p_on[2 + k] = detail::binomial_se(e.probs.p_on[2 + k], n);
  }
  return e;
}

struct ArqOptions {
  ArqMethod method = ArqMethod::quadrature;
  std::size_t samples = 10'000'000;
  std::uint64_t seed = 1;
  unsigned workers = 1;
};

// Multiple-access part of the link-state model by the chosen method.
inline OnOffProbs mac_state_probs(const NetworkParams& params, const FixedRates& rates, double tau,
                                  const ArqOptions& opt = {}) {
  if (opt.method == ArqMethod::quadrature) return mac_state_probs_quadrature(params, rates, tau);
  return mac_state_mc_oracle(params, rates, tau, opt.samples, opt.seed, 0, opt.workers).probs;
}

// Complete link-state model: MAC cases, P1..P4.
inline OnOffProbs arq_probs(const NetworkParams& params, const FixedRates& rates, double rho,
                            double tau, const ArqOptions& opt = {}) {
  OnOffProbs p = mac_state_probs(params, rates, tau, opt);
  if (opt.method == ArqMethod::quadrature) {
    const auto bc = bc_on_probs(params, rates, rho, tau);
    p.p_on[2] = bc[0];
    p.p_on[3] = bc[1];
  } else {
    const auto bc = bc_on_mc_oracle(params, rates, rho, tau, opt.samples, opt.seed, opt.workers);
    p.p_on[2] = bc.probs.p_on[2];
    p.p_on[3] = bc.probs.p_on[3];
  }
  return p;
}

}  // namespace relaynet
