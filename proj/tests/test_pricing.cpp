#include <gtest/gtest.h>

#include <numeric>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "senseauction/pricing.hpp"
#include "senseauction/properties.hpp"

using namespace senseauction;
using fixtures::from_edges;
using fixtures::raw_edge;

namespace {

CandidateEdge valued_edge(std::uint32_t d, std::uint32_t r, double P_d, double P_r, double zeta, double trip_km) {
  auto e = raw_edge(d, r, P_r - P_d, zeta);
  e.P_d = P_d;
  e.P_r = P_r;
  e.trip_km = trip_km;
  return e;
}

}  // namespace

TEST(Vcg, SinglePairPaysAllWelfareToBoth) {
  const auto p = from_edges({valued_edge(0, 0, 4.0, 9.0, 0.2, 2.0)}, Objective::welfare, false);
  const auto s = settle_epoch(Mechanism::vcg, p, {}, false);
  ASSERT_EQ(s.priced.size(), 1u);
  const auto& m = s.priced[0];
  EXPECT_NEAR(m.bonus_d, 5.0, 1e-12);
  EXPECT_NEAR(m.bonus_r, 5.0, 1e-12);
  EXPECT_NEAR(m.q_d, 9.0, 1e-12);  // P_r
  EXPECT_NEAR(m.q_r, 4.0, 1e-12);  // P_d
  EXPECT_NEAR(s.revenue, -5.0, 1e-12);
}

TEST(Vcg, WorkedMarket) {
  const auto s = settle_epoch(Mechanism::vcg, fixtures::two_rider_market(), {1.5, 2.75}, false);
  ASSERT_EQ(s.priced.size(), 1u);
  const auto& m = s.priced[0];
  EXPECT_EQ(m.rider, RiderId{2});
  EXPECT_NEAR(m.bonus_d, 6.0, 1e-9);
  EXPECT_NEAR(m.bonus_r, 4.56, 1e-9);
  EXPECT_NEAR(m.q_d, 13.2, 1e-9);
  EXPECT_NEAR(m.q_r, 8.64, 1e-9);
  EXPECT_NEAR(s.revenue, -4.56, 1e-9);
  const auto u = participant_utilities(m);
  EXPECT_NEAR(u.driver, 6.0, 1e-9);
  EXPECT_NEAR(u.rider, 4.56, 1e-9);
}

TEST(Vcg, RevenueIsNeverPositive) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const auto inst = properties::random_instance(rng, {});
    const auto s = settle_epoch(Mechanism::vcg, inst.problem, inst.rates, false);
    EXPECT_LE(s.revenue, 1e-9);
    for (const auto& m : s.priced) {
      EXPECT_GE(m.bonus_d, -1e-9);
      EXPECT_GE(m.bonus_r, -1e-9);
    }
  }
}

TEST(Settlement, EmptyMatching) {
  const auto p = from_edges({raw_edge(0, 0, -1.0, 1.0)}, Objective::welfare, false);
  for (auto mech : {Mechanism::vcg, Mechanism::ds}) {
    const auto s = settle_epoch(mech, p, {}, true);
    EXPECT_TRUE(s.priced.empty());
    EXPECT_EQ(s.revenue, 0.0);
    EXPECT_EQ(s.welfare_total, 0.0);
  }
}

TEST(Ds, WorkedMarket) {
  const auto s = settle_epoch(Mechanism::ds, fixtures::two_rider_market(), {1.5, 2.75}, true);
  ASSERT_EQ(s.priced.size(), 1u);
  const auto& m = s.priced[0];
  EXPECT_EQ(m.rider, RiderId{1});
  // U* = 0.8; without the driver 0, without r1 0.3.
  EXPECT_NEAR(m.share_d, 0.8 / 1.3, 1e-12);
  EXPECT_NEAR(m.share_r, 0.5 / 1.3, 1e-12);
  EXPECT_NEAR(m.bonus_d, 1.44 * 0.8 / 1.3, 1e-9);
  EXPECT_NEAR(m.bonus_r, 1.44 * 0.5 / 1.3, 1e-9);
  EXPECT_NEAR(m.bonus_d, 0.8862, 5e-5);
  EXPECT_NEAR(m.bonus_r, 0.5538, 5e-5);
  EXPECT_EQ(m.floor_clip, 0.0);
  EXPECT_NEAR(s.revenue, 0.0, 1e-9);
}

TEST(Ds, SinglePairSplitsWelfareInHalf) {
  const auto p = from_edges({valued_edge(0, 0, 4.0, 9.0, 0.2, 2.0)}, Objective::sensing, true);
  const auto s = settle_epoch(Mechanism::ds, p, {}, false);
  ASSERT_EQ(s.priced.size(), 1u);
  EXPECT_NEAR(s.priced[0].share_d, 0.5, 1e-12);
  EXPECT_NEAR(s.priced[0].share_r, 0.5, 1e-12);
  EXPECT_NEAR(s.priced[0].bonus_d, 2.5, 1e-12);
  EXPECT_NEAR(s.revenue, 0.0, 1e-12);
}

TEST(Ds, SharesSumToOneAndBudgetBalances) {
  std::mt19937_64 rng(12);
  int priced = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto inst = properties::random_instance(rng, {});
    const auto s = settle_epoch(Mechanism::ds, inst.problem, inst.rates, false);
    if (s.priced.empty()) continue;
    ++priced;
    double shares = 0.0;
    for (const auto& m : s.priced) shares += m.share_d + m.share_r;
    EXPECT_NEAR(shares, 1.0, 1e-9);
    EXPECT_NEAR(s.revenue, 0.0, 1e-9);
  }
  EXPECT_GT(priced, 150);
}

TEST(Ds, FloorClipRaisesRevenueByTheClip) {
  // trip 1 km: floor alpha h = 1.5; q_r = 2.0 - 0.75 = 1.25 is clipped to 1.5.
  const auto p = from_edges({valued_edge(0, 0, 0.5, 2.0, 0.2, 1.0)}, Objective::sensing, true);
  const Rates rates{1.5, 2.75};
  const auto s = settle_epoch(Mechanism::ds, p, rates, true);
  ASSERT_EQ(s.priced.size(), 1u);
  const auto& m = s.priced[0];
  EXPECT_NEAR(m.q_r, 1.5, 1e-12);
  EXPECT_NEAR(m.floor_clip, 0.25, 1e-12);
  EXPECT_NEAR(s.revenue, rates.alpha * 1.0 - (m.P_r - m.bonus_r), 1e-12);
  EXPECT_NEAR(s.revenue, 0.25, 1e-12);

  const auto off = settle_epoch(Mechanism::ds, p, rates, false);
  EXPECT_NEAR(off.priced[0].q_r, 1.25, 1e-12);
  EXPECT_NEAR(off.revenue, 0.0, 1e-12);
}

TEST(Ds, NoSensingChangeSplitsEvenly) {
  const auto p = from_edges({valued_edge(0, 0, 1.0, 3.0, 0.0, 1.0), valued_edge(1, 1, 1.0, 5.0, 0.0, 1.0)},
                            Objective::sensing, true);
  const auto s = settle_epoch(Mechanism::ds, p, {}, false);
  ASSERT_EQ(s.priced.size(), 2u);
  for (const auto& m : s.priced) {
    EXPECT_NEAR(m.share_d, 0.25, 1e-12);
    EXPECT_NEAR(m.share_r, 0.25, 1e-12);
    EXPECT_NEAR(m.bonus_d, 1.5, 1e-12);
  }
}

TEST(Ds, IndividuallyRationalWithoutFloor) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 200; ++trial) {
    const auto inst = properties::random_instance(rng, {});
    const auto s = settle_epoch(Mechanism::ds, inst.problem, inst.rates, false);
    for (const auto& m : s.priced) {
      const auto u = participant_utilities(m);
      EXPECT_GE(u.driver, -1e-9);
      EXPECT_GE(u.rider, -1e-9);
    }
  }
}

TEST(Ds, MissingMarginalThrows) {
  const auto p = from_edges({valued_edge(0, 0, 1.0, 3.0, 0.5, 1.0)}, Objective::sensing, true);
  const auto solution = solve_sensing_max(p);
  EXPECT_THROW(ds_prices(p, solution, Marginals{}, {}, true), ContractViolation);
  EXPECT_THROW(vcg_prices(p, solution, Marginals{}), ContractViolation);
}

TEST(Settlement, CsvRows) {
  const auto s = settle_epoch(Mechanism::vcg, fixtures::two_rider_market(), {1.5, 2.75}, false);
  EXPECT_STREQ(settlement_csv_header(), "epoch,mechanism,d,r,P_d,P_r,sigma,zeta,rho_d,rho_r,q_d,q_r,u_d,u_r");
  std::ostringstream os;
  write_settlement_rows(os, 7, s);
  EXPECT_EQ(os.str().rfind("7,vcg,0,2,7.2,13.2,6,0.3,6,4.56,13.2,8.64,", 0), 0u) << os.str();
}

TEST(PropertySuite, SmallRunPasses) {
  properties::SuiteOptions options;
  options.trials = 60;
  options.random_sizes = true;
  const auto report = properties::run_suite(options);
  for (const auto& f : report.failures) ADD_FAILURE() << f.trial << ' ' << f.property << ": " << f.detail;
  for (const auto& t : report.tally) EXPECT_EQ(t.pass + t.fail + t.skipped, options.trials);
}

TEST(PropertySuite, SkippingTheFloorIsCaught) {
  properties::SuiteOptions options;
  options.trials = 200;
  options.inject.skip_welfare_floor = true;
  const auto report = properties::run_suite(options);
  const auto index = [](std::string_view name) {
    return std::find(std::begin(properties::kPropertyNames), std::end(properties::kPropertyNames), name) -
           std::begin(properties::kPropertyNames);
  };
  EXPECT_EQ(report.tally[index("exact_sensing_floor")].fail, 0u);
  EXPECT_GT(report.tally[index("feasible_sensing_floor")].fail, 0u);
  EXPECT_FALSE(report.ok());
}

TEST(PropertySuite, RejectsOversizedInstances) {
  properties::SuiteOptions options;
  options.drivers = 9;
  EXPECT_THROW(properties::run_suite(options), ConfigError);
  options.drivers = 0;
  EXPECT_THROW(properties::run_suite(options), ConfigError);
}
