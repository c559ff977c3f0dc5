#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "relaynet/arq.hpp"
#include "relaynet/channel.hpp"
#include "relaynet/error.hpp"
#include "relaynet/parallel.hpp"
#include "relaynet/qos.hpp"
#include "relaynet/random.hpp"
#include "relaynet/rates.hpp"

namespace relaynet {

enum class SimMode { variable_rate, fixed_rate };

struct SimConfig {
  std::uint64_t n_blocks = 1'000'000;
  std::size_t n_reps = 10;
  std::uint64_t warmup = 10'000;
  std::vector<double> thresholds;
  // Optional per-buffer grids (source_1..N, relay_1..N) replacing `thresholds`.
  std::vector<std::vector<double>> buffer_thresholds;
  std::vector<double> arrival_rates;
  SimMode mode = SimMode::variable_rate;
  std::optional<FixedRates> fixed_rates;  // required in fixed-rate mode
  std::uint64_t seed = 1;
  unsigned workers = 1;

  void validate(std::size_t n_sources) const {
    detail::require(n_blocks >= 1, "sim.n_blocks", "must be at least 1");
    detail::require(n_reps >= 1, "sim.n_reps", "must be at least 1");
    detail::require(warmup < n_blocks, "sim.warmup", "must be smaller than n_blocks");
    if (buffer_thresholds.empty()) {
      check_grid(thresholds, "sim.thresholds");
    } else {
      detail::require(buffer_thresholds.size() == 2 * n_sources, "sim.buffer_thresholds",
                      "needs one grid per buffer (2 n_sources)");
      for (const auto& g : buffer_thresholds) check_grid(g, "sim.buffer_thresholds");
    }
    detail::require(arrival_rates.size() == n_sources, "sim.arrival_rates",
                    "length must equal n_sources");
    for (double a : arrival_rates)
      detail::require(std::isfinite(a) && a >= 0, "sim.arrival_rates",
                      "must be finite and nonnegative");
    if (mode == SimMode::fixed_rate) {
      detail::require(fixed_rates.has_value(), "fixed_rates", "required in fixed-rate mode");
      detail::require(n_sources == 2, "n_sources", "the ARQ model is defined for two sources");
      fixed_rates->validate();
    }
  }

  const std::vector<double>& grid(std::size_t buffer) const {
    return buffer_thresholds.empty() ? thresholds : buffer_thresholds[buffer];
  }

 private:
  static void check_grid(const std::vector<double>& g, const char* field) {
    detail::require(!g.empty(), field, "must not be empty");
    for (std::size_t k = 0; k < g.size(); ++k) {
      detail::require(std::isfinite(g[k]) && g[k] >= 0, field, "must be finite and nonnegative");
      if (k > 0) detail::require(g[k] > g[k - 1], field, "must be strictly increasing");
    }
  }
};

// Least-squares line through log P(Q >= q) against q over the usable points.
struct SlopeFit {
  bool usable = false;
  double slope = 0.0;
  double intercept = 0.0;
  std::vector<std::size_t> fit_range;  // threshold indices used
  std::string reason;
};

// Buffers are ordered source_1..source_N, relay_1..relay_N.
struct SimResult {
  std::vector<std::string> buffers;
  std::vector<std::vector<double>> thresholds;     // [buffer][threshold]
  std::vector<std::vector<double>> overflow_prob;
  std::vector<std::vector<double>> std_error;
  std::vector<std::vector<std::uint64_t>> events;  // pooled over replications
  std::vector<SlopeFit> fits;
  std::vector<double> max_queue;
  // Pooled over replications and all blocks, per stream: what left source j
  // and what entered relay buffer j. Equal by construction.
  std::vector<double> source_departures;
  std::vector<double> relay_arrivals;
  std::uint64_t observed_blocks = 0;  // per replication
  std::size_t n_reps = 0;
};

inline constexpr std::uint64_t kFitMinEvents = 100;
inline constexpr double kFitSkipFraction = 0.1;
inline constexpr std::size_t kFitMinPoints = 4;

// Slope fit of one overflow curve. Drops the smallest 10% of the grid and any
// point with fewer than 100 overflow events. Throws NumericalError when fewer
// than 4 points remain.
inline SlopeFit fit_slope(const std::vector<double>& thresholds, const std::vector<double>& prob,
                          const std::vector<std::uint64_t>& events,
                          std::uint64_t min_events = kFitMinEvents) {
  detail::require(thresholds.size() == prob.size() && prob.size() == events.size(), "curve",
                  "thresholds, probabilities and event counts must have equal length");
  const std::size_t skip =
      static_cast<std::size_t>(std::ceil(kFitSkipFraction * static_cast<double>(thresholds.size())));
  SlopeFit fit;
  for (std::size_t k = skip; k < thresholds.size(); ++k)
    if (events[k] >= min_events && prob[k] > 0) fit.fit_range.push_back(k);
  if (fit.fit_range.size() < kFitMinPoints)
    throw NumericalError("unusable slope fit: only " + std::to_string(fit.fit_range.size()) +
                         " thresholds with at least " + std::to_string(min_events) +
                         " overflow events");
  double sx = 0, sy = 0;
  for (std::size_t k : fit.fit_range) {
    sx += thresholds[k];
    sy += std::log(prob[k]);
  }
  const double m = static_cast<double>(fit.fit_range.size());
  const double mx = sx / m, my = sy / m;
  double sxx = 0, sxy = 0;
  for (std::size_t k : fit.fit_range) {
    const double dx = thresholds[k] - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(prob[k]) - my);
  }
  fit.usable = true;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

namespace detail {

struct RepTally {
  std::vector<std::vector<std::uint64_t>> hist;  // [buffer][number of thresholds <= Q]
  std::vector<double> max_queue;
  std::vector<double> departures, relay_in;
};

// One replication of the four-buffer (2N-buffer) fluid network.
inline RepTally run_replication(const NetworkParams& params, const ControlParams& ctrl,
                                const SimConfig& cfg, std::uint64_t rep_seed) {
  const std::size_t n = params.n_sources;
  const BlockFading<> fading(params, rep_seed);
  const RateModel model(params, ctrl);
  const double ts = ctrl.time_src(), td = ctrl.time_dst();

  RepTally t;
  t.hist.resize(2 * n);
  for (std::size_t k = 0; k < 2 * n; ++k) t.hist[k].assign(cfg.grid(k).size() + 1, 0);
  t.max_queue.assign(2 * n, 0.0);
  t.departures.assign(n, 0.0);
  t.relay_in.assign(n, 0.0);

  std::vector<double> z(n), w(n), s_src(n), s_dst(n), scratch(n), q(2 * n, 0.0);
  for (std::uint64_t b = 0; b < cfg.n_blocks; ++b) {
    fading.fill(b, z, w);
    if (cfg.mode == SimMode::variable_rate) {
      model.src_rates(z, s_src, scratch);
      model.dst_rates(w, s_dst);
      for (std::size_t j = 0; j < n; ++j) {
        s_src[j] *= ts;
        s_dst[j] *= td;
      }
    } else {
      const FixedRates& r = *cfg.fixed_rates;
      const double tau = *ctrl.tau, bw = params.bandwidth, rho = ctrl.rho[0];
      const int c = mac_case(params.snr_sources[0] * z[0], params.snr_sources[1] * z[1], r, tau, bw);
      s_src[0] = (c & 1) ? r.r_src[0] : 0.0;
      s_src[1] = (c & 2) ? r.r_src[1] : 0.0;
      const double x1 = params.snr_relay * w[0], x2 = params.snr_relay * w[1];
      s_dst[0] = bc_link_on(x1, r.r_dst[0], r.r_dst[1], rho, tau, bw) ? r.r_dst[0] : 0.0;
      s_dst[1] = bc_link_on(x2, r.r_dst[1], r.r_dst[0], 1.0 - rho, tau, bw) ? r.r_dst[1] : 0.0;
    }
    for (std::size_t j = 0; j < n; ++j) {
      double& qs = q[j];
      double& qr = q[n + j];
      qs += cfg.arrival_rates[j];
      const double d = std::min(qs, s_src[j]);
      qs = std::max(qs - d, 0.0);
      qr += d;
      const double dr = std::min(qr, s_dst[j]);
      qr = std::max(qr - dr, 0.0);
      t.departures[j] += d;
      t.relay_in[j] += d;
    }
    if (b < cfg.warmup) continue;
    for (std::size_t k = 0; k < 2 * n; ++k) {
      const auto& g = cfg.grid(k);
      const auto idx =
          static_cast<std::size_t>(std::upper_bound(g.begin(), g.end(), q[k]) - g.begin());
      ++t.hist[k][idx];
      t.max_queue[k] = std::max(t.max_queue[k], q[k]);
    }
  }
  return t;
}

}  // namespace detail

// Seeded fluid simulation. Replication r uses fading seed derive_seed(seed, r)
// and the results are reduced in replication order, so the output depends
// only on the config (not on the worker count).
inline SimResult simulate_queues(const NetworkParams& params, const ControlParams& ctrl,
                                 const SimConfig& cfg) {
  params.validate();
  ctrl.validate(params.n_sources);
  cfg.validate(params.n_sources);
  if (cfg.mode == SimMode::fixed_rate)
    detail::require(!ctrl.full_duplex(), "mode", "the ARQ model is half duplex");
  const std::size_t n = params.n_sources;
  const std::size_t nb = 2 * n;

  std::vector<detail::RepTally> reps(cfg.n_reps);
  parallel_for(cfg.n_reps, cfg.workers, [&](std::size_t r) {
    reps[r] = detail::run_replication(params, ctrl, cfg, derive_seed(cfg.seed, r));
  });

  SimResult res;
  res.n_reps = cfg.n_reps;
  res.observed_blocks = cfg.n_blocks - cfg.warmup;
  for (std::size_t j = 0; j < n; ++j) res.buffers.push_back("source_" + std::to_string(j + 1));
  for (std::size_t j = 0; j < n; ++j) res.buffers.push_back("relay_" + std::to_string(j + 1));
  for (std::size_t k = 0; k < nb; ++k) {
    const std::size_t n_thr = cfg.grid(k).size();
    res.thresholds.push_back(cfg.grid(k));
    res.overflow_prob.emplace_back(n_thr, 0.0);
    res.std_error.emplace_back(n_thr, 0.0);
    res.events.emplace_back(n_thr, 0);
  }
  res.max_queue.assign(nb, 0.0);
  res.source_departures.assign(n, 0.0);
  res.relay_arrivals.assign(n, 0.0);

  const double t_obs = static_cast<double>(res.observed_blocks);
  const double n_reps = static_cast<double>(cfg.n_reps);
  for (std::size_t k = 0; k < nb; ++k) {
    const std::size_t n_thr = res.thresholds[k].size();
    std::vector<double> sum(n_thr, 0.0), sum_sq(n_thr, 0.0);
    for (const auto& rep : reps) {
      // P(Q >= thr_i) counts blocks whose histogram bin index exceeds i.
      std::uint64_t tail = 0;
      for (std::size_t i = n_thr; i-- > 0;) {
        tail += rep.hist[k][i + 1];
        const double p = static_cast<double>(tail) / t_obs;
        sum[i] += p;
        sum_sq[i] += p * p;
        res.events[k][i] += tail;
      }
      res.max_queue[k] = std::max(res.max_queue[k], rep.max_queue[k]);
    }
    for (std::size_t i = 0; i < n_thr; ++i) {
      const double mean = sum[i] / n_reps;
      res.overflow_prob[k][i] = mean;
      if (cfg.n_reps > 1) {
        const double var = std::max(0.0, (sum_sq[i] - n_reps * mean * mean) / (n_reps - 1.0));
        res.std_error[k][i] = std::sqrt(var / n_reps);
      }
    }
  }
  for (const auto& rep : reps)
    for (std::size_t j = 0; j < n; ++j) {
      res.source_departures[j] += rep.departures[j];
      res.relay_arrivals[j] += rep.relay_in[j];
    }
  for (std::size_t k = 0; k < nb; ++k) {
    try {
      res.fits.push_back(fit_slope(res.thresholds[k], res.overflow_prob[k], res.events[k]));
    } catch (const NumericalError& e) {
      SlopeFit f;
      f.reason = e.what();
      res.fits.push_back(std::move(f));
    }
  }
  return res;
}

enum class BufferVerdict { binding, slack, violated, unusable };

inline const char* to_string(BufferVerdict v) {
  switch (v) {
    case BufferVerdict::binding: return "binding";
    case BufferVerdict::slack: return "slack";
    case BufferVerdict::violated: return "violated";
    case BufferVerdict::unusable: return "unusable";
  }
  return "?";
}

struct BufferReport {
  std::string buffer;
  BufferVerdict verdict = BufferVerdict::unusable;
  double required = 0.0;  // theta demanded of this buffer
  double fitted = 0.0;    // |slope|
  double margin = 0.0;    // fitted - required
};

inline constexpr double kBindingTolerance = 0.15;

// Compares each buffer's fitted decay rate with the exponent it must meet.
// Binding: within 15% of it. Slack: steeper. Violated: shallower.
inline std::vector<BufferReport> bottleneck_report(const SimResult& result,
                                                   const QosExponents& qos) {
  const std::size_t n = result.buffers.size() / 2;
  qos.validate(n);
  std::vector<BufferReport> out;
  for (std::size_t k = 0; k < result.buffers.size(); ++k) {
    BufferReport r;
    r.buffer = result.buffers[k];
    r.required = k < n ? qos.theta_src[k] : qos.theta_relay;
    const SlopeFit& f = result.fits[k];
    if (f.usable) {
      r.fitted = std::abs(f.slope);
      r.margin = r.fitted - r.required;
      if (std::abs(r.margin) <= kBindingTolerance * r.required)
        r.verdict = BufferVerdict::binding;
      else
        r.verdict = r.margin > 0 ? BufferVerdict::slack : BufferVerdict::violated;
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace relaynet
