#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "relaynet/channel.hpp"
#include "relaynet/error.hpp"

namespace relaynet {

inline constexpr double kSimplexTolerance = 1e-12;

using DecodingOrder = std::vector<std::size_t>;  // zero-based source indices, first decoded first

struct WeightedOrder {
  DecodingOrder order;
  double weight = 0.0;
};

namespace detail {

inline bool is_permutation_of_n(std::span<const std::size_t> order, std::size_t n) {
  if (order.size() != n) return false;
  std::vector<bool> seen(n, false);
  for (std::size_t k : order) {
    if (k >= n || seen[k]) return false;
    seen[k] = true;
  }
  return true;
}

inline void require_simplex(std::span<const double> weights, const char* field) {
  double sum = 0.0;
  for (double x : weights) {
    require(std::isfinite(x) && x >= 0.0 && x <= 1.0, field, "entries must lie in [0, 1]");
    sum += x;
  }
  require(std::abs(sum - 1.0) <= kSimplexTolerance, field, "entries must sum to 1");
}

inline std::size_t factorial(std::size_t n) {
  std::size_t f = 1;
  for (std::size_t k = 2; k <= n; ++k) f *= k;
  return f;
}

}  // namespace detail

// Time sharing between successive-decoding orders at the relay. Dense
// vectors index the N! orders in lexicographic permutation order; for N > 6
// only an explicit sparse list of orders is accepted.
class TimeSharing {
 public:
  static constexpr std::size_t kMaxDenseSources = 6;

  TimeSharing() = default;

  static TimeSharing two_user(double delta) {
    return dense(2, std::vector<double>{delta, 1.0 - delta});
  }

  static TimeSharing dense(std::size_t n, std::span<const double> weights) {
    detail::require(n <= kMaxDenseSources, "delta",
                    "dense time sharing is limited to 6 sources; give sparse per-order weights");
    detail::require(weights.size() == detail::factorial(n), "delta", "length must equal N!");
    detail::require_simplex(weights, "delta");
    TimeSharing ts;
    DecodingOrder order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t k = 0;
    do {
      if (weights[k] > 0.0) ts.orders_.push_back({order, weights[k]});
      ++k;
    } while (std::next_permutation(order.begin(), order.end()));
    return ts;
  }

  static TimeSharing uniform(std::size_t n) {
    const std::size_t count = detail::factorial(n);
    std::vector<double> w(count, 1.0 / static_cast<double>(count));
    // absorb rounding so the weights sum to one exactly enough
    w.back() = 1.0 - std::accumulate(w.begin(), w.end() - 1, 0.0);
    return dense(n, w);
  }

  static TimeSharing sparse(std::vector<WeightedOrder> orders) {
    TimeSharing ts;
    ts.orders_ = std::move(orders);
    return ts;
  }

  void validate(std::size_t n) const {
    detail::require(!orders_.empty(), "delta", "at least one decoding order is required");
    std::vector<double> w;
    for (const auto& o : orders_) {
      detail::require(detail::is_permutation_of_n(o.order, n), "delta",
                      "decoding order is not a permutation of the sources");
      w.push_back(o.weight);
    }
    detail::require_simplex(w, "delta");
  }

  const std::vector<WeightedOrder>& orders() const noexcept { return orders_; }

  // Weight of the order {1,2} for a two-source schedule.
  double two_user_delta() const {
    for (const auto& o : orders_)
      if (o.order.size() == 2 && o.order[0] == 0) return o.weight;
    return 0.0;
  }

 private:
  std::vector<WeightedOrder> orders_;
};

// The knobs being optimized: time split tau (half duplex only), relay power
// split rho, decoding-order time sharing delta, and in full duplex the source
// power back-off alpha.
struct ControlParams {
  std::optional<double> tau;
  std::vector<double> rho;
  TimeSharing delta;
  std::optional<std::vector<double>> alpha;

  bool full_duplex() const noexcept { return alpha.has_value(); }

  void validate(std::size_t n_sources) const {
    if (full_duplex()) {
      detail::require(!tau.has_value(), "tau", "has no meaning for a full-duplex relay");
      detail::require(alpha->size() == n_sources, "alpha", "length must equal n_sources");
      for (double a : *alpha)
        detail::require(std::isfinite(a) && a >= 0.0 && a <= 1.0, "alpha", "must lie in [0, 1]");
    } else {
      detail::require(tau.has_value(), "tau", "is required for a half-duplex relay");
      detail::require(*tau > 0.0 && *tau < 1.0, "tau", "must lie in (0, 1)");
    }
    detail::require(rho.size() == n_sources, "rho", "length must equal n_sources");
    detail::require_simplex(rho, "rho");
    delta.validate(n_sources);
  }

  double time_src() const { return tau.value_or(1.0); }
  double time_dst() const { return tau ? 1.0 - *tau : 1.0; }

  static ControlParams two_user(double tau, double rho, double delta) {
    ControlParams c;
    c.tau = tau;
    c.rho = {rho, 1.0 - rho};
    c.delta = TimeSharing::two_user(delta);
    c.validate(2);
    return c;
  }

  static ControlParams full_duplex_two_user(double rho, double delta, double alpha1,
                                            double alpha2) {
    ControlParams c;
    c.rho = {rho, 1.0 - rho};
    c.delta = TimeSharing::two_user(delta);
    c.alpha = std::vector<double>{alpha1, alpha2};
    c.validate(2);
    return c;
  }
};

// Instantaneous link capacities for one block (bits per channel use times B).
struct ServiceRates {
  std::vector<double> r_src;
  std::vector<double> r_dst;
};

namespace detail {

// Successive decoding: the source decoded at position i sees every source
// decoded after it as noise.
inline void sic_rates(std::span<const double> snr, std::span<const double> z,
                      std::span<const std::size_t> order, double bandwidth,
                      std::span<double> out) noexcept {
  double interference = 0.0;
  for (std::size_t i = order.size(); i-- > 0;) {
    const std::size_t k = order[i];
    const double signal = snr[k] * z[k];
    out[k] = bandwidth * std::log1p(signal / (1.0 + interference)) * std::numbers::log2e;
    interference += signal;
  }
}

inline void timeshared_rates(std::span<const double> snr, std::span<const double> z,
                             const TimeSharing& delta, double bandwidth, std::span<double> out,
                             std::span<double> scratch) noexcept {
  std::fill(out.begin(), out.end(), 0.0);
  for (const auto& o : delta.orders()) {
    sic_rates(snr, z, o.order, bandwidth, scratch);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += o.weight * scratch[k];
  }
}

// Superposition broadcast: destination j treats the shares of every
// destination with a strictly stronger channel as noise.
inline void broadcast_rates(double snr_relay, std::span<const double> rho,
                            std::span<const double> w, double bandwidth,
                            std::span<double> out) noexcept {
  const std::size_t n = w.size();
  for (std::size_t j = 0; j < n; ++j) {
    double interference = 0.0;
    for (std::size_t l = 0; l < n; ++l)
      if (l != j && w[j] < w[l]) interference += rho[l];
    const double gain = snr_relay * w[j];
    out[j] = bandwidth * std::log1p(rho[j] * gain / (1.0 + interference * gain)) * std::numbers::log2e;
  }
}

inline void require_fading(std::span<const double> x, std::size_t n, const char* field) {
  require(x.size() == n, field, "length must equal n_sources");
  for (double v : x) require(v >= 0.0, field, "fading powers must be nonnegative");
}

}  // namespace detail

inline std::vector<double> mac_rates_order(const NetworkParams& params,
                                           std::span<const double> z,
                                           std::span<const std::size_t> order) {
  detail::require_fading(z, params.n_sources, "z");
  detail::require(detail::is_permutation_of_n(order, params.n_sources), "order",
                  "is not a permutation of the sources");
  std::vector<double> out(params.n_sources);
  detail::sic_rates(params.snr_sources, z, order, params.bandwidth, out);
  return out;
}

inline std::vector<double> mac_rates_timeshared(const NetworkParams& params,
                                                std::span<const double> z,
                                                const TimeSharing& delta) {
  detail::require_fading(z, params.n_sources, "z");
  delta.validate(params.n_sources);
  std::vector<double> out(params.n_sources), scratch(params.n_sources);
  detail::timeshared_rates(params.snr_sources, z, delta, params.bandwidth, out, scratch);
  return out;
}

inline std::vector<double> bc_rates(const NetworkParams& params, std::span<const double> w,
                                    std::span<const double> rho) {
  detail::require_fading(w, params.n_sources, "w");
  detail::require(rho.size() == params.n_sources, "rho", "length must equal n_sources");
  detail::require_simplex(rho, "rho");
  std::vector<double> out(params.n_sources);
  detail::broadcast_rates(params.snr_relay, rho, w, params.bandwidth, out);
  return out;
}

// Full-duplex multiple access: source j transmits with alpha_j of its power.
inline std::vector<double> fd_mac_rates(const NetworkParams& params, std::span<const double> z,
                                        const TimeSharing& delta,
                                        std::span<const double> alpha) {
  detail::require(alpha.size() == params.n_sources, "alpha", "length must equal n_sources");
  for (double a : alpha)
    detail::require(std::isfinite(a) && a >= 0.0 && a <= 1.0, "alpha", "must lie in [0, 1]");
  detail::require_fading(z, params.n_sources, "z");
  delta.validate(params.n_sources);
  std::vector<double> snr(params.n_sources);
  for (std::size_t j = 0; j < snr.size(); ++j) snr[j] = alpha[j] * params.snr_sources[j];
  std::vector<double> out(params.n_sources), scratch(params.n_sources);
  detail::timeshared_rates(snr, z, delta, params.bandwidth, out, scratch);
  return out;
}

// Per-block rate kernel for a fixed (params, control) pair. Validates once so
// the hot loops in the estimators and the simulator do not.
class RateModel {
 public:
  RateModel(const NetworkParams& params, const ControlParams& ctrl)
      : params_(params), ctrl_(ctrl), snr_(params.snr_sources) {
    params.validate();
    ctrl.validate(params.n_sources);
    if (ctrl.alpha)
      for (std::size_t j = 0; j < snr_.size(); ++j) snr_[j] *= (*ctrl.alpha)[j];
  }

  const NetworkParams& params() const noexcept { return params_; }
  const ControlParams& control() const noexcept { return ctrl_; }
  std::size_t n_sources() const noexcept { return params_.n_sources; }
  std::span<const double> effective_snr() const noexcept { return snr_; }

  // Rates of the source -> relay links (not scaled by tau).
  void src_rates(std::span<const double> z, std::span<double> out,
                 std::span<double> scratch) const noexcept {
    detail::timeshared_rates(snr_, z, ctrl_.delta, params_.bandwidth, out, scratch);
  }

  // Rates of the relay -> destination links (not scaled by 1 - tau).
  void dst_rates(std::span<const double> w, std::span<double> out) const noexcept {
    detail::broadcast_rates(params_.snr_relay, ctrl_.rho, w, params_.bandwidth, out);
  }

  ServiceRates rates(const FadingSample& s) const {
    ServiceRates r{std::vector<double>(n_sources()), std::vector<double>(n_sources())};
    std::vector<double> scratch(n_sources());
    src_rates(s.z, r.r_src, scratch);
    dst_rates(s.w, r.r_dst);
    return r;
  }

 private:
  NetworkParams params_;
  ControlParams ctrl_;
  std::vector<double> snr_;
};

}  // namespace relaynet
