#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "relaynet/config.hpp"
#include "relaynet/csv.hpp"

using namespace relaynet;
using nlohmann::json;

namespace {
json base() {
  return json::parse(R"({
    "network": {"snr": [1, 1], "snr_relay": 1},
    "qos": {"theta_src": 1, "theta_relay": 1},
    "control": {"tau": 0.5, "rho": 0.5, "delta": 0.5}
  })");
}

std::string field_of(const json& j) {
  try {
    parse_config(j);
  } catch (const ValidationError& e) {
    return e.field();
  }
  return "<accepted>";
}
}  // namespace

TEST(ParseConfig, Minimal) {
  const auto c = parse_config(base());
  EXPECT_EQ(c.network.n_sources, 2u);
  EXPECT_EQ(*c.control->tau, 0.5);
  EXPECT_EQ(c.qos->theta_src.size(), 2u);
  EXPECT_EQ(c.backend, BackendKind::quadrature);
}

TEST(ParseConfig, DecibelsAndBroadcastMeans) {
  auto j = base();
  j["network"] = json::parse(R"({"snr_db": [10, 0], "snr_relay_db": 30, "mean_z": 2})");
  const auto c = parse_config(j);
  EXPECT_NEAR(c.network.snr_sources[0], 10.0, 1e-12);
  EXPECT_NEAR(c.network.snr_relay, 1000.0, 1e-9);
  EXPECT_EQ(c.network.mean_z, (std::vector<double>{2, 2}));
}

TEST(ParseConfig, RejectsUnknownKeys) {
  auto j = base();
  j["colour"] = 1;
  EXPECT_EQ(field_of(j), "colour");
  j = base();
  j["control"]["tua"] = 0.5;
  EXPECT_EQ(field_of(j), "control.tua");
}

TEST(ParseConfig, OutOfRangeNamesField) {
  auto j = base();
  j["control"]["tau"] = 1.2;
  EXPECT_EQ(field_of(j), "control.tau");
  j = base();
  j["qos"]["theta_relay"] = -1;
  EXPECT_NE(field_of(j).find("theta_relay"), std::string::npos);
  j = base();
  j["network"]["snr"] = json::array({1, "x"});
  EXPECT_NE(field_of(j).find("network.snr"), std::string::npos);
}

TEST(ParseConfig, Grids) {
  auto j = base();
  j["grids"] = json::parse(R"({"tau": {"start": 0.1, "stop": 0.5, "num": 5},
                              "rho": [0.2, 0.4], "delta": {"start": 0, "stop": 1, "step": 0.25}})");
  const auto c = parse_config(j);
  EXPECT_EQ(c.require_grid("tau").size(), 5u);
  EXPECT_NEAR(c.require_grid("tau")[4], 0.5, 1e-15);
  EXPECT_EQ(c.require_grid("delta").size(), 5u);
  EXPECT_THROW(c.require_grid("d"), ValidationError);
}

TEST(ParseConfig, PlacementMeans) {
  auto j = base();
  j["network"]["placement"] = json::parse(R"({"distance": 2, "position": 0.5, "exponent": 4})");
  const auto n = parse_config(j).network_at(0.58);
  EXPECT_NEAR(n.mean_z[0], 0.5522, 1e-4);
  EXPECT_NEAR(n.mean_w[1], 2.0086, 1e-4);
}

TEST(LoadConfig, ShippedScenariosParse) {
  const std::filesystem::path dir = RELAYNET_SCENARIO_DIR;
  std::size_t n = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.path().extension() == ".json") {
      EXPECT_NO_THROW(load_config(e.path())) << e.path();
      ++n;
    }
  EXPECT_GE(n, 10u);
}

TEST(Csv, LocaleFreeRoundTrip) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(std::uint64_t{42}), "42");
  EXPECT_EQ(std::stod(format_number(1.0005513192511504)), 1.0005513192511504);
  std::ostringstream out;
  ThroughputResult r{{0.5, 0.25}, {Bottleneck::source_queue, Bottleneck::relay_queue}, true};
  write_throughput_csv(out, r);
  EXPECT_EQ(out.str(), "source,arrival_rate,bottleneck\n1,0.5,source-queue\n2,0.25,relay-queue\n");
}
