#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "relaynet/error.hpp"
#include "relaynet/random.hpp"

namespace relaynet {

// Required decay rates of the buffer-overflow tails (1/bits).
struct QosExponents {
  std::vector<double> theta_src;
  double theta_relay = 1.0;

  void validate(std::size_t n_sources) const {
    detail::require(theta_src.size() == n_sources, "theta_src", "length must equal n_sources");
    for (double t : theta_src)
      detail::require(std::isfinite(t) && t > 0, "theta_src", "must be positive");
    detail::require(std::isfinite(theta_relay) && theta_relay > 0, "theta_relay",
                    "must be positive");
  }

  static QosExponents two_user(double theta1, double theta2, double theta_relay) {
    QosExponents q{{theta1, theta2}, theta_relay};
    q.validate(2);
    return q;
  }
};

// Estimate of a log-moment generating function (natural log). Closed forms
// carry std_error == 0.
struct LmgfEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n_samples = 0;
};

// Streaming log-mean-exp with a running max shift, plus the delta-method
// standard error of the estimate.
class LogMeanExp {
 public:
  void add(double x) {
    if (!std::isfinite(x)) throw NumericalError("non-finite sample in log-MGF estimate");
    if (x > shift_) {
      if (n_ > 0) {
        const double scale = std::exp(shift_ - x);
        mean_ *= scale;
        m2_ *= scale * scale;
      }
      shift_ = x;
    }
    const double y = std::exp(x - shift_);
    ++n_;
    const double d = y - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (y - mean_);
  }

  LmgfEstimate result() const {
    if (n_ == 0) throw NumericalError("log-MGF estimate over zero samples");
    LmgfEstimate e;
    e.value = shift_ + std::log(mean_);
    e.n_samples = n_;
    if (n_ > 1) {
      const double var = std::max(0.0, m2_ / static_cast<double>(n_ - 1));
      e.std_error = std::sqrt(var) / (mean_ * std::sqrt(static_cast<double>(n_)));
    }
    return e;
  }

 private:
  std::size_t n_ = 0;
  double shift_ = -std::numeric_limits<double>::infinity();
  double mean_ = 0.0;
  double m2_ = 0.0;
};

// log E{e^{s X}} over an explicit sample of X.
inline LmgfEstimate lmgf_of_samples(std::span<const double> values, double s) {
  LogMeanExp acc;
  for (double v : values) acc.add(s * v);
  return acc.result();
}

inline double lmgf_constant(double rate, double theta) { return theta * rate; }

// Monte-Carlo log-MGF of an i.i.d. block process. Independence across blocks
// collapses the asymptotic LMGF to the single-block log E{e^{theta a}}.
template <class Sampler>
  requires std::invocable<Sampler&, RandomStream&>
LmgfEstimate lmgf_iid_mc(Sampler&& rate_sampler, double theta, std::size_t n, std::uint64_t seed) {
  detail::require(theta != 0.0 && std::isfinite(theta), "theta", "must be finite and nonzero");
  detail::require(n >= 1000, "n", "at least 1000 samples are required");
  RandomStream stream(seed);
  LogMeanExp acc;
  for (std::size_t i = 0; i < n; ++i) acc.add(theta * static_cast<double>(rate_sampler(stream)));
  return acc.result();
}

// ON-OFF service: rate r with probability p_on, zero otherwise.
inline double lmgf_onoff(double rate, double p_on, double theta) {
  detail::require(p_on >= 0.0 && p_on <= 1.0, "p_on", "must lie in [0, 1]");
  if (p_on == 0.0) return 0.0;
  // log(p e^{x} + 1 - p) written to stay accurate when x or 1 - p is small
  const double x = theta * rate;
  if (x <= 0.0) return std::log1p(p_on * std::expm1(x));
  return x + std::log(p_on + (1.0 - p_on) * std::exp(-x));
}

// Maximum constant arrival rate a service with log-MGF Lambda can carry under
// QoS exponent theta: -Lambda(-theta)/theta.
inline double effective_capacity(double lmgf_at_minus_theta, double theta) {
  detail::require(theta > 0.0, "theta", "must be positive");
  return -lmgf_at_minus_theta / theta;
}

// LMGF of the departure process of a source queue fed at constant rate
// a_rate and provisioned for exponent theta_tilde; this is the arrival
// process seen by the relay buffer.
template <class ServiceLmgf>
  requires std::invocable<ServiceLmgf&, double>
double lambda_relay_arrival(double theta, double a_rate, double theta_tilde,
                            ServiceLmgf&& lmgf_service) {
  detail::require(theta >= 0.0, "theta", "must be nonnegative");
  detail::require(theta_tilde > 0.0, "theta_tilde", "must be positive");
  if (theta <= theta_tilde) return a_rate * theta;
  return a_rate * theta_tilde + static_cast<double>(lmgf_service(theta - theta_tilde));
}

}  // namespace relaynet
