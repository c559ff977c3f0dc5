#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "relaynet/arq.hpp"

using namespace relaynet;

namespace {
// Three-user ARQ validation network.
NetworkParams sim3() {
  return NetworkParams::two_user(snr_from_db(6.02), snr_from_db(4.77), snr_from_db(7.78), 2.0, 2.0);
}
}  // namespace

TEST(MacDecodeThresholds, Examples) {
  const auto b = mac_decode_thresholds(FixedRates::uniform(0.3), 0.39, 1.0);
  EXPECT_NEAR(b[0], 0.70436, 1e-5);
  EXPECT_NEAR(b[1], 0.70436, 1e-5);
  const auto one = mac_decode_thresholds(FixedRates::uniform(0.4), 0.4, 1.0);
  EXPECT_NEAR(one[0], 1.0, 1e-15);
  const auto tiny = mac_decode_thresholds(FixedRates::uniform(1e-12), 0.5, 1.0);
  EXPECT_LT(tiny[0], 1e-11);
}

TEST(MacStateProbs, ZeroRatesAlwaysDecode) {
  const auto p = arq_probs(sim3(), FixedRates::uniform(0.0), 0.5, 0.5);
  EXPECT_NEAR(p.p_mac_case[3], 1.0, 1e-12);
  for (double x : p.p_on) EXPECT_NEAR(x, 1.0, 1e-12);
}

TEST(MacStateProbs, HugeRatesNeverDecode) {
  const auto p = mac_state_probs_quadrature(sim3(), FixedRates::uniform(200.0), 0.5);
  EXPECT_NEAR(p.p_mac_case[0], 1.0, 1e-9);
}

TEST(MacStateProbs, FrozenGolden) {
  const auto p = arq_probs(sim3(), FixedRates::uniform(0.3), 0.7, 0.39);
  const double pm[4] = {0.02711679409148087, 0.09843234169435222, 0.07198026476088515,
                        0.8024705994532817};
  const double on[4] = {0.9009029411476339, 0.8744508642141668, 0.9431117690186318,
                        0.8932640644953659};
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(p.p_mac_case[i], pm[i], 1e-9) << i;
    EXPECT_NEAR(p.p_on[i], on[i], 1e-9) << i;
  }
}

TEST(MacStateProbs, SumsToOneAndOnFromCases) {
  for (double tau : {0.1, 0.39, 0.7})
    for (double r : {0.05, 0.3, 1.2}) {
      const auto p = mac_state_probs_quadrature(sim3(), FixedRates{{r, 0.5 * r}, {r, r}}, tau);
      EXPECT_NEAR(std::accumulate(p.p_mac_case.begin(), p.p_mac_case.end(), 0.0), 1.0, 1e-9);
      for (double x : p.p_mac_case) {
        EXPECT_GE(x, 0.0);
        EXPECT_LE(x, 1.0);
      }
      EXPECT_DOUBLE_EQ(p.p_on[0], p.p_mac_case[1] + p.p_mac_case[3]);
      EXPECT_DOUBLE_EQ(p.p_on[1], p.p_mac_case[2] + p.p_mac_case[3]);
    }
}

TEST(MacStateOracle, AgreesWithQuadrature) {
  const auto net = sim3();
  const FixedRates rates{{0.3, 0.45}, {0.3, 0.3}};
  const auto q = mac_state_probs_quadrature(net, rates, 0.39);
  const auto mc = mac_state_mc_oracle(net, rates, 0.39, 2'000'000, 5);
  for (int i = 0; i < 4; ++i)
    EXPECT_NEAR(q.p_mac_case[i], mc.probs.p_mac_case[i], 3 * mc.std_error.p_mac_case[i] + 1e-12);
}

TEST(MacStateOracle, DecodingOrderIrrelevant) {
  const auto net = sim3();
  const FixedRates rates{{0.3, 0.45}, {0.3, 0.3}};
  const auto a = mac_state_mc_oracle(net, rates, 0.39, 1'000'000, 6, 0);
  const auto b = mac_state_mc_oracle(net, rates, 0.39, 1'000'000, 6, 1);
  for (int j = 0; j < 2; ++j) EXPECT_EQ(a.probs.p_on[j], b.probs.p_on[j]);
}

TEST(MacStateOracle, ZeroRateSourceAlwaysOn) {
  const auto e = mac_state_mc_oracle(sim3(), FixedRates{{0.0, 2.0}, {1, 1}}, 0.4, 100'000, 2);
  EXPECT_EQ(e.probs.p_on[0], 1.0);
}

TEST(MacStateOracle, WorkerCountInvariant) {
  const FixedRates rates = FixedRates::uniform(0.3);
  const auto a = mac_state_mc_oracle(sim3(), rates, 0.39, 600'000, 9, 0, 1);
  const auto b = mac_state_mc_oracle(sim3(), rates, 0.39, 600'000, 9, 0, 3);
  EXPECT_EQ(a.probs.p_mac_case, b.probs.p_mac_case);
}

TEST(BcOnProbs, AgreesWithOracle) {
  const auto net = sim3();
  for (double rho : {0.2, 0.45, 0.5, 0.7}) {
    const FixedRates rates{{0.3, 0.3}, {0.3, 0.4}};
    const auto q = bc_on_probs(net, rates, rho, 0.39);
    const auto mc = bc_on_mc_oracle(net, rates, rho, 0.39, 2'000'000, 8);
    EXPECT_NEAR(q[0], mc.probs.p_on[2], 3 * mc.std_error.p_on[2] + 1e-12) << rho;
    EXPECT_NEAR(q[1], mc.probs.p_on[3], 3 * mc.std_error.p_on[3] + 1e-12) << rho;
  }
}

TEST(BcOnProbs, UnsatisfiableBranchGivesZero) {
  // Rate far above what the share can carry: a1 and a3 both negative.
  const auto net = sim3();
  const FixedRates rates{{0.3, 0.3}, {5.0, 5.0}};
  const auto t = bc_thresholds(net, rates, 0.5, 0.5);
  ASSERT_LT(t.a[0], 0);
  ASSERT_LT(t.a[2], 0);
  EXPECT_EQ(bc_on_probs(net, rates, 0.5, 0.5)[0], 0.0);
}

TEST(OnProbs, Monotonicity) {
  const auto net = sim3();
  double prev = 2.0;
  for (double r = 0.05; r < 2.0; r += 0.15) {
    const double p1 = mac_state_probs_quadrature(net, FixedRates{{r, 0.3}, {1, 1}}, 0.4).p_on[0];
    EXPECT_LE(p1, prev + 1e-12);
    prev = p1;
  }
  prev = -1.0;
  for (double tau = 0.1; tau < 0.95; tau += 0.05) {
    const double p1 = mac_state_probs_quadrature(net, FixedRates::uniform(0.3), tau).p_on[0];
    EXPECT_GE(p1, prev - 1e-12);
    prev = p1;
  }
}

// P3 rises with rho until the two SIC thresholds a2 = (c-1)/rho and
// a3 = (c-1)/(1 - c rho) meet at rho = 1/(1+c), c = 2^(r/((1-tau)B)); beyond
// that a3 governs and P3 eases off slightly until rho = 0.5.
TEST(OnProbs, P3GrowsWithRhoBelowHalf) {
  const auto net = sim3();
  const double c = std::exp2(0.3 / 0.6), knee = 1.0 / (1.0 + c);
  const auto p3 = [&](double rho) { return bc_on_probs(net, FixedRates::uniform(0.3), rho, 0.4)[0]; };
  double prev = -1.0;
  for (double rho = 0.01; rho < knee; rho += 0.01) {
    EXPECT_GE(p3(rho), prev - 1e-12) << rho;
    prev = p3(rho);
  }
  for (double rho = knee + 0.01; rho < 0.5; rho += 0.01) EXPECT_LT(p3(rho), p3(rho - 0.01)) << rho;
  EXPECT_GT(p3(0.49), p3(0.01));
}

TEST(ArqProbs, Validation) {
  EXPECT_THROW(arq_probs(sim3(), FixedRates::uniform(-0.1), 0.5, 0.5), ValidationError);
  EXPECT_THROW(arq_probs(sim3(), FixedRates::uniform(0.3), 0.5, 1.0), ValidationError);
  EXPECT_THROW(arq_probs(sim3(), FixedRates::uniform(0.3), 1.5, 0.5), ValidationError);
}
