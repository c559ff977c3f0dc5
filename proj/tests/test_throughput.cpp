#include <cmath>
#include <functional>

#include <gtest/gtest.h>

#include "relaynet/arq.hpp"
#include "relaynet/throughput.hpp"

using namespace relaynet;

namespace {
RateModel hd(double tau, double rho = 0.5, double delta = 0.5) {
  return RateModel(NetworkParams::two_user(1, 1, 1), ControlParams::two_user(tau, rho, delta));
}
RateModel fd(double a1 = 0.5, double a2 = 0.5) {
  return RateModel(NetworkParams::two_user(2, 2, 3),
                   ControlParams::full_duplex_two_user(0.5, 0.5, a1, a2));
}
}  // namespace

TEST(ThroughputVariable, DeterministicRates) {
  const DeterministicBackend d({2.0, 1.0}, {3.0, 3.0});
  const auto r = throughput_variable(hd(0.4), QosExponents::two_user(1, 1, 0.5), d);
  ASSERT_TRUE(r.stable);
  EXPECT_NEAR(r.arrival_rates[0], std::min(0.4 * 2.0, 0.6 * 3.0), 1e-12);
  EXPECT_NEAR(r.arrival_rates[1], 0.4, 1e-12);
  EXPECT_EQ(r.bottleneck[0], Bottleneck::source_queue);
  // Stricter relay exponent: relay bound = src + (theta_r / theta_j) * margin.
  const auto strict = throughput_variable(hd(0.4), QosExponents::two_user(1, 1, 2), d);
  EXPECT_NEAR(strict.arrival_rates[0], 0.8, 1e-12);
  EXPECT_EQ(strict.bottleneck[0], Bottleneck::source_queue);
}

// With constant rates a relay-bound source is unstable, so it must get zero.
TEST(ThroughputVariable, DeterministicRelayBindingIsUnstable) {
  const DeterministicBackend d({2.0, 1.0}, {3.0, 3.0});
  const auto r = throughput_variable(hd(0.7), QosExponents::two_user(1, 1, 0.5), d);
  EXPECT_FALSE(r.stable);
}

TEST(ThroughputVariable, TieGoesToSource) {
  const DeterministicBackend d({2.0, 2.0}, {2.0, 2.0});
  const auto r = throughput_variable(hd(0.5), QosExponents::two_user(1, 1, 1), d);
  EXPECT_NEAR(r.arrival_rates[0], 1.0, 1e-12);
  EXPECT_EQ(r.bottleneck[0], Bottleneck::source_queue);
}

TEST(ThroughputVariable, UnstableGivesZero) {
  const DeterministicBackend d({2.0, 2.0}, {0.5, 0.5});
  const auto r = throughput_variable(hd(0.5), QosExponents::two_user(1, 1, 1), d);
  EXPECT_FALSE(r.stable);
  EXPECT_EQ(r.sum(), 0.0);
  EXPECT_EQ(r.bottleneck[1], Bottleneck::unstable);
}

TEST(ThroughputVariable, FrozenSimulationConfig) {
  const RateModel m(NetworkParams::two_user(10, 10, 1000), ControlParams::two_user(0.5, 0.5, 0.5));
  const auto r = throughput_variable(m, QosExponents::two_user(0.1, 0.1, 0.1), QuadratureBackend());
  for (int j = 0; j < 2; ++j) {
    EXPECT_NEAR(r.arrival_rates[j], 1.0005513192511504, 1e-9);
    EXPECT_EQ(r.bottleneck[j], Bottleneck::source_queue);
  }
}

TEST(ThroughputVariable, NonIncreasingInTheta) {
  const QuadratureBackend q;
  const auto m = hd(0.3, 0.5, 0.7);
  double prev_src = 1e9, prev_rel = 1e9;
  for (double t = 0.05; t < 10; t *= 1.6) {
    const double a = throughput_variable(m, QosExponents::two_user(t, 1, 1), q).arrival_rates[0];
    const double b = throughput_variable(m, QosExponents::two_user(1, 1, t), q).arrival_rates[0];
    EXPECT_LE(a, prev_src + 1e-10) << t;
    EXPECT_LE(b, prev_rel + 1e-10) << t;
    prev_src = a;
    prev_rel = b;
  }
}

TEST(ThroughputVariable, SmallThetaApproachesMeanBound) {
  const QuadratureBackend q;
  const auto m = hd(0.3, 0.5, 0.7);
  const auto r = throughput_variable(m, QosExponents::two_user(1e-6, 1e-6, 1e-6), q);
  for (std::size_t j = 0; j < 2; ++j) {
    const double bound = std::min(0.3 * q.mean(m, Hop::source_relay, j),
                                  0.7 * q.mean(m, Hop::relay_destination, j));
    EXPECT_NEAR(r.arrival_rates[j], bound, 1e-5);
  }
}

TEST(StabilityVariable, Limits) {
  const QuadratureBackend q;
  EXPECT_TRUE(stability_check_variable(hd(1e-4), q).stable);
  EXPECT_FALSE(stability_check_variable(hd(1 - 1e-4), q).stable);
}

TEST(ThroughputFixed, HandEvaluated) {
  OnOffProbs p;
  p.p_on = {0.5, 0.5, 0.8, 0.8};
  const auto r = throughput_fixed(FixedRates::uniform(0.3), p, QosExponents::two_user(1, 1, 1));
  ASSERT_TRUE(r.stable);
  EXPECT_NEAR(r.arrival_rates[0], 0.13880, 1e-5);
  EXPECT_EQ(r.bottleneck[0], Bottleneck::source_queue);
  EXPECT_NEAR(-lmgf_onoff(0.3, 0.8, -1.0), 0.23237, 1e-5);
}

TEST(ThroughputFixed, AlwaysOnAndAlwaysOff) {
  OnOffProbs p;
  p.p_on = {1, 1, 1, 1};
  const FixedRates rates{{0.3, 0.5}, {0.4, 0.5}};
  const auto r = throughput_fixed(rates, p, QosExponents::two_user(1, 1, 0.5));
  EXPECT_NEAR(r.arrival_rates[0], 0.3, 1e-12);
  EXPECT_NEAR(r.arrival_rates[1], 0.5, 1e-12);
  p.p_on = {0, 1, 1, 1};
  EXPECT_EQ(throughput_fixed(rates, p, QosExponents::two_user(1, 1, 0.5)).arrival_rates[0], 0.0);
}

TEST(StabilityFixed, Examples) {
  OnOffProbs p;
  p.p_on = {0, 0, 0.1, 0.1};
  EXPECT_TRUE(stability_check_fixed(FixedRates::uniform(1), p));
  p.p_on = {0.9, 0.5, 0.5, 0.5};
  EXPECT_FALSE(stability_check_fixed(FixedRates::uniform(1), p));
}

TEST(ThroughputFixed, FrozenSimulationConfig) {
  const auto net = NetworkParams::two_user(snr_from_db(6.02), snr_from_db(4.77), snr_from_db(7.78),
                                           2.0, 2.0);
  const auto rates = FixedRates::uniform(0.3);
  const auto p = arq_probs(net, rates, 0.7, 0.39);
  const auto r = throughput_fixed(rates, p, QosExponents::two_user(0.1, 0.1, 0.1));
  EXPECT_NEAR(r.arrival_rates[0], 0.26986590140031363, 1e-9);
  EXPECT_NEAR(r.arrival_rates[1], 0.2618375073261088, 1e-9);
}

TEST(ThroughputFixed, NeverExceedsEitherRate) {
  const auto net = NetworkParams::two_user(2, 1.5, 3);
  for (double r : {0.1, 0.4, 0.9})
    for (double tau : {0.2, 0.4, 0.6}) {
      const FixedRates rates{{r, r}, {1.1 * r, 0.9 * r}};
      const auto res = throughput_fixed(rates, arq_probs(net, rates, 0.5, tau),
                                        QosExponents::two_user(0.5, 0.5, 0.5));
      for (int j = 0; j < 2; ++j) {
        EXPECT_LE(res.arrival_rates[j], rates.r_src[j] + 1e-12);
        EXPECT_LE(res.arrival_rates[j], rates.r_dst[j] + 1e-12);
      }
    }
}

TEST(ThroughputFullDuplex, DeterministicEqualRates) {
  const DeterministicBackend d({1.5, 1.5}, {1.5, 1.5});
  const auto r = throughput_fullduplex(fd(), QosExponents::two_user(2, 2, 1), d);
  EXPECT_EQ(r.cases[0].case_id, FdCase::source_dominant);
  EXPECT_NEAR(r.throughput.arrival_rates[0], 1.5, 1e-12);
}

TEST(ThroughputFullDuplex, RequiresAlpha) {
  EXPECT_THROW(throughput_fullduplex(hd(0.5), QosExponents::two_user(1, 1, 1), QuadratureBackend()),
               ValidationError);
}

TEST(ThroughputFullDuplex, ContinuousAcrossCaseBoundary) {
  const QuadratureBackend q;
  const auto m = fd();
  const double tr = 1.0;
  const auto at = [&](double tj) {
    return throughput_fullduplex(m, QosExponents::two_user(tj, tj, tr), q).throughput.arrival_rates[0];
  };
  const double mid = at(tr);
  EXPECT_NEAR(at(tr - 1e-4), mid, 1e-3);
  EXPECT_NEAR(at(tr + 1e-4), mid, 1e-3);
}

TEST(ThroughputFullDuplex, ThetaStarMatchesDenseScan) {
  const QuadratureBackend q;
  const auto m = fd(0.6, 0.4);
  const auto res = throughput_fullduplex(m, QosExponents::two_user(0.5, 0.5, 2.0), q);
  std::size_t checked = 0;
  for (std::size_t j = 0; j < 2; ++j) {
    const auto& c = res.cases[j];
    if (!c.theta_star) continue;
    const FdPair pair(m, q, j);
    const auto f = c.case_id == FdCase::smallest_root
                       ? std::function<double(double)>([&](double t) { return pair.S(t) - pair.H(t, 2.0); })
                       : std::function<double(double)>([&](double t) { return pair.S(t) - pair.D(2.0); });
    // Log grid ten times denser than the solver's scan.
    const std::size_t n = 4000;
    const double ratio = std::pow(kFdThetaMax / kFdThetaMin, 1.0 / (n - 1));
    double t_prev = kFdThetaMin, prev = f(t_prev), root = NAN;
    for (std::size_t i = 1; i < n; ++i) {
      const double t = t_prev * ratio, v = f(t);
      if ((prev < 0) != (v < 0)) {
        const auto br = boost::math::tools::bisect(
            f, t_prev, t, [](double a, double b) { return std::abs(b - a) < 1e-10; });
        root = 0.5 * (br.first + br.second);
        break;
      }
      t_prev = t;
      prev = v;
    }
    EXPECT_NEAR(*c.theta_star, root, 1e-6) << j;
    ++checked;
  }
  EXPECT_GT(checked, 0u);
}
