#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "relaynet/channel.hpp"
#include "relaynet/error.hpp"
#include "relaynet/qos.hpp"
#include "relaynet/quadrature.hpp"
#include "relaynet/random.hpp"
#include "relaynet/rates.hpp"

namespace relaynet {

// The two hops of the network: multiple access (source j -> relay) and
// broadcast (relay -> destination j).
enum class Hop { source_relay, relay_destination };

// Expectations of functionals of a link's instantaneous rate R (unscaled by
// the phase duration). All throughput formulas are written against this.
class ExpectationBackend {
 public:
  virtual ~ExpectationBackend() = default;

  // log E{e^{s R}}
  virtual LmgfEstimate lmgf(const RateModel& model, Hop hop, std::size_t j, double s) const = 0;
  virtual double mean(const RateModel& model, Hop hop, std::size_t j) const = 0;
  // Essential infimum of R (zero under Rayleigh fading).
  virtual double infimum(const RateModel& model, Hop hop, std::size_t j) const = 0;
  virtual std::string name() const = 0;
};

// Everything a hop's rate distribution depends on. MAC-phase rates do not
// depend on rho and broadcast rates do not depend on delta, which is what
// makes caching across parameter grids effective.
inline std::vector<double> hop_key(const RateModel& model, Hop hop) {
  const auto& p = model.params();
  std::vector<double> key{hop == Hop::source_relay ? 0.0 : 1.0, p.bandwidth};
  if (hop == Hop::source_relay) {
    for (double s : model.effective_snr()) key.push_back(s);
    key.insert(key.end(), p.mean_z.begin(), p.mean_z.end());
    for (const auto& o : model.control().delta.orders()) {
      key.push_back(-1.0);
      for (std::size_t k : o.order) key.push_back(static_cast<double>(k));
      key.push_back(o.weight);
    }
  } else {
    key.push_back(p.snr_relay);
    key.insert(key.end(), p.mean_w.begin(), p.mean_w.end());
    key.insert(key.end(), model.control().rho.begin(), model.control().rho.end());
  }
  return key;
}

// Monte-Carlo expectations over a fixed, seeded set of fading draws. The same
// draws are reused for every query, so objectives built on this backend are
// smooth (deterministic) functions of the control parameters.
class MonteCarloBackend final : public ExpectationBackend {
 public:
  static constexpr std::size_t kDefaultSamples = 1'000'000;

  explicit MonteCarloBackend(std::size_t n_samples = kDefaultSamples, std::uint64_t seed = 1)
      : n_(n_samples), seed_(seed) {
    detail::require(n_samples >= 1000, "samples", "at least 1000 samples are required");
  }

  LmgfEstimate lmgf(const RateModel& model, Hop hop, std::size_t j, double s) const override {
    const auto rates = rate_samples(model, hop);
    return lmgf_of_samples((*rates)[j], s);
  }

  double mean(const RateModel& model, Hop hop, std::size_t j) const override {
    const auto rates = rate_samples(model, hop);
    double sum = 0.0;
    for (double r : (*rates)[j]) sum += r;
    return sum / static_cast<double>(n_);
  }

  double infimum(const RateModel& model, Hop hop, std::size_t j) const override {
    const auto rates = rate_samples(model, hop);
    return *std::min_element((*rates)[j].begin(), (*rates)[j].end());
  }

  std::string name() const override { return "mc"; }
  std::size_t samples() const noexcept { return n_; }

 private:
  using Table = std::vector<std::vector<double>>;  // [link][sample]
  static constexpr std::size_t kMaxCached = 8;

  // Unit-mean exponential draws per link, generated once per source count.
  std::shared_ptr<const Table> unit_draws(std::size_t n_sources, Hop hop) const {
    std::lock_guard lock(mutex_);
    auto& slot = hop == Hop::source_relay ? unit_z_ : unit_w_;
    if (!slot || slot->size() != n_sources) {
      auto t = std::make_shared<Table>(n_sources, std::vector<double>(n_));
      const std::uint64_t base = hop == Hop::source_relay ? 0 : n_sources;
      for (std::size_t j = 0; j < n_sources; ++j) {
        const CounterRng rng(derive_seed(seed_, base + j));
        for (std::size_t i = 0; i < n_; ++i) (*t)[j][i] = -std::log1p(-rng.uniform(i));
      }
      slot = std::move(t);
    }
    return slot;
  }

  std::shared_ptr<const Table> rate_samples(const RateModel& model, Hop hop) const {
    auto key = hop_key(model, hop);
    {
      std::lock_guard lock(mutex_);
      if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    const std::size_t n_src = model.n_sources();
    const auto unit = unit_draws(n_src, hop);
    const auto& p = model.params();
    const auto& means = hop == Hop::source_relay ? p.mean_z : p.mean_w;
    auto table = std::make_shared<Table>(n_src, std::vector<double>(n_));
    std::vector<double> x(n_src), out(n_src), scratch(n_src);
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < n_src; ++j) x[j] = means[j] * (*unit)[j][i];
      if (hop == Hop::source_relay)
        model.src_rates(x, out, scratch);
      else
        model.dst_rates(x, out);
      for (std::size_t j = 0; j < n_src; ++j) (*table)[j][i] = out[j];
    }
    std::lock_guard lock(mutex_);
    if (cache_.size() >= kMaxCached) cache_.clear();
    cache_[std::move(key)] = table;
    return table;
  }

  std::size_t n_;
  std::uint64_t seed_;
  mutable std::mutex mutex_;
  mutable std::shared_ptr<const Table> unit_z_, unit_w_;
  mutable std::map<std::vector<double>, std::shared_ptr<const Table>> cache_;
};

// Deterministic two-dimensional quadrature over independent exponential
// fading powers. Two sources only; this is the golden reference for the
// Monte-Carlo backend.
class QuadratureBackend final : public ExpectationBackend {
 public:
  explicit QuadratureBackend(double rel_tol = 1e-10) : rel_tol_(rel_tol) {}

  LmgfEstimate lmgf(const RateModel& model, Hop hop, std::size_t j, double s) const override {
    const double e = expect(model, hop, j, [s](double r) { return std::exp(s * r); });
    return {std::log(e), 0.0, 0};
  }

  double mean(const RateModel& model, Hop hop, std::size_t j) const override {
    return expect(model, hop, j, [](double r) { return r; });
  }

  double infimum(const RateModel& model, Hop, std::size_t) const override {
    check(model);
    return 0.0;
  }

  std::string name() const override { return "quadrature"; }

  // E{g(R_j)} on the chosen hop.
  template <class G>
  double expect(const RateModel& model, Hop hop, std::size_t j, G g) const {
    check(model);
    const auto& p = model.params();
    if (hop == Hop::source_relay) {
      const auto inner = [&](double z2) {
        return expect_checked(
            [&](double z1) {
              const std::array<double, 2> z{z1, z2};
              std::array<double, 2> out{}, scratch{};
              model.src_rates(z, out, scratch);
              return g(out[j]);
            },
            p.mean_z[0]);
      };
      return expect_checked(inner, p.mean_z[1]);
    }
    // Broadcast: only the ordering of the two powers matters for the
    // interference indicator, so integrate the other power out exactly.
    const std::size_t l = 1 - j;
    const double share = model.control().rho[j];
    const double other = model.control().rho[l];
    const double s = p.snr_relay;
    const double b = p.bandwidth;
    const double mean_other = p.mean_w[l];
    return expect_checked(
        [&](double w) {
          const double p_weaker = std::exp(-w / mean_other);  // P(w_l > w_j)
          const double with_noise = b * std::log2(1.0 + share * s * w / (1.0 + other * s * w));
          const double clean = b * std::log2(1.0 + share * s * w);
          return p_weaker * g(with_noise) + (1.0 - p_weaker) * g(clean);
        },
        p.mean_w[j]);
  }

 private:
  static void check(const RateModel& model) {
    detail::require(model.n_sources() == 2, "backend",
                    "quadrature supports exactly two sources; use the mc backend");
  }

  template <class F>
  double expect_checked(F&& f, double mean) const {
    const auto r = expect_exponential(f, mean, rel_tol_);
    require_converged(r, std::max(1e-300, 1e-6 * std::abs(r.value)), "rate expectation");
    return r.value;
  }

  double rel_tol_;
};

// Constant link rates, for reasoning about deterministic channels.
class DeterministicBackend final : public ExpectationBackend {
 public:
  DeterministicBackend(std::vector<double> src_rates, std::vector<double> dst_rates)
      : src_(std::move(src_rates)), dst_(std::move(dst_rates)) {}

  LmgfEstimate lmgf(const RateModel& m, Hop hop, std::size_t j, double s) const override {
    return {s * mean(m, hop, j), 0.0, 0};
  }
  double mean(const RateModel&, Hop hop, std::size_t j) const override {
    return hop == Hop::source_relay ? src_.at(j) : dst_.at(j);
  }
  double infimum(const RateModel& m, Hop hop, std::size_t j) const override {
    return mean(m, hop, j);
  }
  std::string name() const override { return "deterministic"; }

 private:
  std::vector<double> src_, dst_;
};

// Memoizes another backend, keyed by the exact hop parameters and argument.
// Values are deterministic, so concurrent inserts of the same key are benign.
class CachedBackend final : public ExpectationBackend {
 public:
  explicit CachedBackend(const ExpectationBackend& inner) : inner_(inner) {}

  LmgfEstimate lmgf(const RateModel& m, Hop hop, std::size_t j, double s) const override {
    auto key = make_key(m, hop, j, 0, s);
    if (auto hit = find(key)) return *hit;
    const auto v = inner_.lmgf(m, hop, j, s);
    store(std::move(key), v);
    return v;
  }
  double mean(const RateModel& m, Hop hop, std::size_t j) const override {
    auto key = make_key(m, hop, j, 1, 0.0);
    if (auto hit = find(key)) return hit->value;
    const double v = inner_.mean(m, hop, j);
    store(std::move(key), {v, 0.0, 0});
    return v;
  }
  double infimum(const RateModel& m, Hop hop, std::size_t j) const override {
    auto key = make_key(m, hop, j, 2, 0.0);
    if (auto hit = find(key)) return hit->value;
    const double v = inner_.infimum(m, hop, j);
    store(std::move(key), {v, 0.0, 0});
    return v;
  }
  std::string name() const override { return inner_.name(); }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return memo_.size();
  }

 private:
  static std::vector<double> make_key(const RateModel& m, Hop hop, std::size_t j, int kind,
                                      double s) {
    auto key = hop_key(m, hop);
    key.push_back(static_cast<double>(j));
    key.push_back(kind);
    key.push_back(s);
    return key;
  }
  std::optional<LmgfEstimate> find(const std::vector<double>& key) const {
    std::lock_guard lock(mutex_);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    return std::nullopt;
  }
  void store(std::vector<double> key, const LmgfEstimate& v) const {
    std::lock_guard lock(mutex_);
    memo_[std::move(key)] = v;
  }

  const ExpectationBackend& inner_;
  mutable std::mutex mutex_;
  mutable std::map<std::vector<double>, LmgfEstimate> memo_;
};

}  // namespace relaynet
