#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "relaynet/channel.hpp"
#include "relaynet/random.hpp"
#include "relaynet/rates.hpp"

using namespace relaynet;

namespace {
const std::vector<std::size_t> k12{0, 1}, k21{1, 0};
NetworkParams unit() { return NetworkParams::two_user(1, 1, 1); }
}  // namespace

TEST(MacRatesOrder, HandEvaluated) {
  const std::vector<double> z{1, 1};
  auto r = mac_rates_order(unit(), z, k12);
  EXPECT_NEAR(r[0], 0.58496250072, 1e-10);
  EXPECT_NEAR(r[1], 1.0, 1e-12);
  r = mac_rates_order(unit(), z, k21);
  EXPECT_NEAR(r[0], 1.0, 1e-12);
  EXPECT_NEAR(r[1], 0.58496250072, 1e-10);
}

TEST(MacRatesOrder, ZeroChannel) {
  for (const auto& order : {k12, k21}) {
    const auto r = mac_rates_order(unit(), std::vector<double>{0.0, 3.0}, order);
    EXPECT_EQ(r[0], 0.0);
  }
}

TEST(MacRatesOrder, RejectsNonPermutation) {
  const std::vector<double> z{1, 1};
  EXPECT_THROW(mac_rates_order(unit(), z, std::vector<std::size_t>{0, 0}), ValidationError);
  EXPECT_THROW(mac_rates_order(unit(), z, std::vector<std::size_t>{0}), ValidationError);
  EXPECT_THROW(mac_rates_order(unit(), z, std::vector<std::size_t>{0, 2}), ValidationError);
}

TEST(MacRatesTimeshared, Examples) {
  const std::vector<double> z{1, 1};
  const auto a = mac_rates_timeshared(unit(), z, TimeSharing::two_user(1.0));
  const auto b = mac_rates_order(unit(), z, k12);
  EXPECT_DOUBLE_EQ(a[0], b[0]);
  EXPECT_DOUBLE_EQ(a[1], b[1]);
  const auto h = mac_rates_timeshared(unit(), z, TimeSharing::two_user(0.5));
  EXPECT_NEAR(h[0], 0.79248125036, 1e-10);
  EXPECT_NEAR(h[1], 0.79248125036, 1e-10);
}

TEST(MacRatesTimeshared, ThreeUsersUniformSymmetric) {
  NetworkParams p;
  p.n_sources = 3;
  p.snr_sources = {2, 2, 2};
  p.snr_relay = 1;
  p.mean_z = {1, 1, 1};
  p.mean_w = {1, 1, 1};
  const auto r = mac_rates_timeshared(p, std::vector<double>{0.7, 0.7, 0.7}, TimeSharing::uniform(3));
  EXPECT_NEAR(r[0], r[1], 1e-12);
  EXPECT_NEAR(r[1], r[2], 1e-12);
  EXPECT_NEAR(r[0] + r[1] + r[2], std::log2(1 + 3 * 1.4), 1e-12);
}

TEST(MacRatesTimeshared, RejectsOffSimplex) {
  const std::vector<double> w{0.6, 0.6};
  EXPECT_THROW(TimeSharing::dense(2, w), ValidationError);
  EXPECT_THROW(TimeSharing::two_user(1.2), ValidationError);
}

TEST(MacRatesTimeshared, RefusesDenseBeyondSixSources) {
  std::vector<double> w(5040, 1.0 / 5040);
  EXPECT_THROW(TimeSharing::dense(7, w), ValidationError);
}

TEST(MacRatesTimeshared, AffineInDelta) {
  const std::vector<double> z{0.4, 1.9};
  const auto p = NetworkParams::two_user(3, 2, 1);
  const auto r0 = mac_rates_timeshared(p, z, TimeSharing::two_user(0.0));
  const auto r1 = mac_rates_timeshared(p, z, TimeSharing::two_user(1.0));
  for (double d : {0.1, 0.37, 0.8}) {
    const auto r = mac_rates_timeshared(p, z, TimeSharing::two_user(d));
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(r[j], d * r1[j] + (1 - d) * r0[j], 1e-12);
  }
}

TEST(MacRates, SumRateOrderInvariant) {
  RandomStream rs(5);
  const auto p = NetworkParams::two_user(3.1, 0.7, 1);
  for (int i = 0; i < 200; ++i) {
    const std::vector<double> z{rs.exponential(1), rs.exponential(2)};
    const auto a = mac_rates_order(p, z, k12), b = mac_rates_order(p, z, k21);
    const double c = std::log2(1 + 3.1 * z[0] + 0.7 * z[1]);
    EXPECT_NEAR(a[0] + a[1], c, 1e-12);
    EXPECT_NEAR(b[0] + b[1], c, 1e-12);
  }
}

TEST(MacRates, Monotonicity) {
  const auto p = NetworkParams::two_user(2, 2, 1);
  const std::vector<double> zs{0.0, 0.3, 1.0, 2.5};
  for (std::size_t i = 1; i < zs.size(); ++i) {
    const auto lo = mac_rates_order(p, std::vector<double>{zs[i - 1], 1.0}, k12);
    const auto hi = mac_rates_order(p, std::vector<double>{zs[i], 1.0}, k12);
    EXPECT_GE(hi[0], lo[0]);
    const auto lo2 = mac_rates_order(p, std::vector<double>{1.0, zs[i - 1]}, k12);
    const auto hi2 = mac_rates_order(p, std::vector<double>{1.0, zs[i]}, k12);
    EXPECT_LE(hi2[0], lo2[0]);  // interferer grows
  }
}

TEST(BcRates, Examples) {
  auto r = bc_rates(unit(), std::vector<double>{1, 2}, std::vector<double>{1.0, 0.0});
  EXPECT_EQ(r[1], 0.0);
  EXPECT_NEAR(r[0], 1.0, 1e-12);
  r = bc_rates(unit(), std::vector<double>{1, 2}, std::vector<double>{0.5, 0.5});
  EXPECT_NEAR(r[0], 0.41503749928, 1e-10);
  EXPECT_NEAR(r[1], 1.0, 1e-12);
  r = bc_rates(unit(), std::vector<double>{1.5, 1.5}, std::vector<double>{0.5, 0.5});
  EXPECT_NEAR(r[0], std::log2(1.75), 1e-12);
  EXPECT_NEAR(r[1], std::log2(1.75), 1e-12);
}

TEST(BcRates, StrongestSeesNoInterference) {
  NetworkParams p;
  p.n_sources = 3;
  p.snr_sources = {1, 1, 1};
  p.snr_relay = 4;
  p.mean_z = {1, 1, 1};
  p.mean_w = {1, 1, 1};
  const auto r = bc_rates(p, std::vector<double>{0.5, 2.0, 1.0}, std::vector<double>{0.2, 0.3, 0.5});
  EXPECT_NEAR(r[1], std::log2(1 + 0.3 * 4 * 2.0), 1e-12);
  EXPECT_NEAR(r[2], std::log2(1 + 0.5 * 4 / (1 + 0.3 * 4)), 1e-12);
  EXPECT_NEAR(r[0], std::log2(1 + 0.2 * 4 * 0.5 / (1 + 0.8 * 4 * 0.5)), 1e-12);
}

TEST(BcRates, RejectsOffSimplex) {
  EXPECT_THROW(bc_rates(unit(), std::vector<double>{1, 1}, std::vector<double>{0.7, 0.7}),
               ValidationError);
}

TEST(FdMacRates, Examples) {
  const std::vector<double> z{1, 1};
  const auto full = fd_mac_rates(unit(), z, TimeSharing::two_user(0.3), std::vector<double>{1, 1});
  const auto ts = mac_rates_timeshared(unit(), z, TimeSharing::two_user(0.3));
  EXPECT_EQ(full, ts);
  const auto off = fd_mac_rates(unit(), std::vector<double>{1, 2}, TimeSharing::two_user(0.5),
                                std::vector<double>{0.0, 0.5});
  EXPECT_EQ(off[0], 0.0);
  EXPECT_NEAR(off[1], std::log2(2.0), 1e-12);
  const auto h = fd_mac_rates(unit(), z, TimeSharing::two_user(1.0), std::vector<double>{0.5, 0.5});
  EXPECT_NEAR(h[0], 0.41503749928, 1e-10);
  EXPECT_NEAR(h[1], 0.58496250072, 1e-10);
  EXPECT_THROW(fd_mac_rates(unit(), z, TimeSharing::two_user(1.0), std::vector<double>{1.2, 0.5}),
               ValidationError);
}

TEST(ControlParams, Validation) {
  try {
    ControlParams::two_user(1.2, 0.5, 0.5);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.field(), "tau");
  }
  EXPECT_THROW(ControlParams::two_user(0.5, 1.5, 0.5), ValidationError);
  ControlParams fd = ControlParams::full_duplex_two_user(0.5, 0.5, 1, 1);
  EXPECT_EQ(fd.time_src(), 1.0);
  EXPECT_EQ(fd.time_dst(), 1.0);
  fd.tau = 0.5;
  EXPECT_THROW(fd.validate(2), ValidationError);
}

TEST(RateModel, MatchesFreeFunctions) {
  const auto p = NetworkParams::two_user(2, 3, 5);
  const auto c = ControlParams::two_user(0.4, 0.3, 0.6);
  const RateModel m(p, c);
  const FadingSample s{{0.8, 1.3}, {0.4, 2.2}};
  const auto r = m.rates(s);
  EXPECT_EQ(r.r_src, mac_rates_timeshared(p, s.z, c.delta));
  EXPECT_EQ(r.r_dst, bc_rates(p, s.w, c.rho));
}
