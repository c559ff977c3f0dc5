#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "relaynet/error.hpp"
#include "relaynet/random.hpp"

namespace relaynet {

// Physical scenario of an N-source relay network. SNRs are linear; fading
// means are E{|g_j|^2} (source -> relay) and E{|h_j|^2} (relay -> dest j).
struct NetworkParams {
  std::size_t n_sources = 2;
  std::vector<double> snr_sources;
  double snr_relay = 1.0;
  std::vector<double> mean_z;
  std::vector<double> mean_w;
  double bandwidth = 1.0;

  void validate() const {
    detail::require(n_sources >= 2, "n_sources", "must be at least 2");
    detail::require(snr_sources.size() == n_sources, "snr_sources",
                    "length must equal n_sources");
    detail::require(mean_z.size() == n_sources, "mean_z", "length must equal n_sources");
    detail::require(mean_w.size() == n_sources, "mean_w", "length must equal n_sources");
    for (double s : snr_sources)
      detail::require(std::isfinite(s) && s > 0, "snr_sources", "must be positive");
    detail::require(std::isfinite(snr_relay) && snr_relay > 0, "snr_relay", "must be positive");
    for (double m : mean_z) detail::require(std::isfinite(m) && m > 0, "mean_z", "must be positive");
    for (double m : mean_w) detail::require(std::isfinite(m) && m > 0, "mean_w", "must be positive");
    detail::require(std::isfinite(bandwidth) && bandwidth > 0, "bandwidth", "must be positive");
  }

  // Two-source network with shared fading means per hop.
  static NetworkParams two_user(double snr1, double snr2, double snr_r, double mean_z = 1.0,
                                double mean_w = 1.0, double bandwidth = 1.0) {
    NetworkParams p;
    p.n_sources = 2;
    p.snr_sources = {snr1, snr2};
    p.snr_relay = snr_r;
    p.mean_z = {mean_z, mean_z};
    p.mean_w = {mean_w, mean_w};
    p.bandwidth = bandwidth;
    p.validate();
    return p;
  }
};

// One block of fading powers: z_j = |g_j|^2, w_j = |h_j|^2.
struct FadingSample {
  std::vector<double> z;
  std::vector<double> w;

  friend bool operator==(const FadingSample&, const FadingSample&) = default;
};

// Relay placement on the line between the sources and the destinations.
struct PlacementParams {
  double total_distance = 2.0;
  double position = 0.5;  // fraction of the distance covered by the first hop
  double pathloss_exponent = 4.0;

  void validate() const {
    detail::require(std::isfinite(total_distance) && total_distance > 0, "total_distance",
                    "must be positive");
    detail::require(position > 0 && position < 1, "position", "must lie in (0, 1)");
    detail::require(std::isfinite(pathloss_exponent) && pathloss_exponent > 0,
                    "pathloss_exponent", "must be positive");
  }
};

struct MeanPowers {
  double mean_z;
  double mean_w;
};

inline double snr_from_db(double db) { return std::pow(10.0, db / 10.0); }

inline MeanPowers pathloss_means(const PlacementParams& p) {
  p.validate();
  const double first = p.total_distance * p.position;
  const double second = p.total_distance * (1.0 - p.position);
  return {std::pow(1.0 / first, p.pathloss_exponent),
          std::pow(1.0 / second, p.pathloss_exponent)};
}

// A fading-power law, parameterized by its mean.
template <class D>
concept PowerDistribution = requires(const D& d, double u, double mean) {
  { d.quantile(u, mean) } -> std::convertible_to<double>;
  { d.cdf(u, mean) } -> std::convertible_to<double>;
};

// Rayleigh fading: the power |h|^2 is exponential.
struct ExponentialPower {
  double quantile(double u, double mean) const noexcept { return -mean * std::log1p(-u); }
  double cdf(double x, double mean) const noexcept {
    return x <= 0 ? 0.0 : -std::expm1(-x / mean);
  }
};

// I.i.d. block fading. The sampler is immutable: block t of link k is a pure
// function of (seed, k, t), so it can be shared freely between threads.
template <PowerDistribution Dist = ExponentialPower>
class BlockFading {
 public:
  BlockFading(const NetworkParams& params, std::uint64_t seed, Dist dist = {})
      : mean_z_(params.mean_z), mean_w_(params.mean_w), dist_(dist) {
    params.validate();
    const std::size_t n = params.n_sources;
    links_.reserve(2 * n);
    for (std::size_t k = 0; k < 2 * n; ++k) links_.emplace_back(derive_seed(seed, k));
  }

  std::size_t n_sources() const noexcept { return mean_z_.size(); }

  double z(std::uint64_t block, std::size_t j) const noexcept {
    return dist_.quantile(links_[j].uniform(block), mean_z_[j]);
  }
  double w(std::uint64_t block, std::size_t j) const noexcept {
    return dist_.quantile(links_[n_sources() + j].uniform(block), mean_w_[j]);
  }

  void fill(std::uint64_t block, std::span<double> z_out, std::span<double> w_out) const noexcept {
    for (std::size_t j = 0; j < n_sources(); ++j) {
      z_out[j] = z(block, j);
      w_out[j] = w(block, j);
    }
  }

  FadingSample sample(std::uint64_t block) const {
    FadingSample s{std::vector<double>(n_sources()), std::vector<double>(n_sources())};
    fill(block, s.z, s.w);
    return s;
  }

 private:
  std::vector<double> mean_z_;
  std::vector<double> mean_w_;
  Dist dist_;
  std::vector<CounterRng> links_;
};

inline std::vector<FadingSample> sample_fading(const NetworkParams& params, std::uint64_t seed,
                                               std::size_t n) {
  detail::require(n >= 1, "n", "must be at least 1");
  const BlockFading<> fading(params, seed);
  std::vector<FadingSample> out;
  out.reserve(n);
  for (std::size_t t = 0; t < n; ++t) out.push_back(fading.sample(t));
  return out;
}

}  // namespace relaynet
