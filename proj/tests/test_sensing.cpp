#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "senseauction/sensing.hpp"

using namespace senseauction;

namespace {

std::vector<CellId> random_route(std::mt19937_64& rng, std::size_t cells) {
  std::vector<CellId> all(cells);
  for (CellId g = 0; g < cells; ++g) all[g] = g;
  std::shuffle(all.begin(), all.end(), rng);
  const std::size_t k = std::uniform_int_distribution<std::size_t>(1, std::min<std::size_t>(cells, 6))(rng);
  return {all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k)};
}

}  // namespace

TEST(SensingQuality, SmallCounts) {
  const auto p = SensingParams::uniform(1, 1, 0.2);
  EXPECT_EQ(sensing_quality(p, 0), 0.0);
  EXPECT_EQ(sensing_quality(p, 1), 1.0);
  EXPECT_EQ(sensing_quality(SensingParams::uniform(1, 1, 0.7), 1), 1.0);
  EXPECT_NEAR(sensing_quality(p, 32), 2.0, 1e-12);
}

TEST(SensingUtility, EmptyAndFullCoverage) {
  const auto p = SensingParams::uniform(4, 1);
  CoverageState s(4, 1);
  EXPECT_EQ(total_sensing_utility(p, s), 0.0);
  const std::vector<CellId> all{0, 1, 2, 3};
  s.commit_route(all, 0);
  EXPECT_NEAR(total_sensing_utility(p, s), 1.0, 1e-12);
}

TEST(SensingUtility, TwoCellHandValue) {
  const auto p = SensingParams::uniform(2, 1, 0.2);
  CoverageState s(2, 1);
  const std::vector<CellId> first{0};
  for (int i = 0; i < 32; ++i) s.commit_route(first, 0);
  const std::vector<CellId> second{1};
  s.commit_route(second, 0);
  EXPECT_NEAR(total_sensing_utility(p, s), 0.5 * 2.0 + 0.5 * 1.0, 1e-12);
}

TEST(MarginalGain, FreshCellsCountOneEach) {
  const auto p = SensingParams::uniform(10, 1);
  CoverageState s(10, 1);
  const std::vector<CellId> one{3};
  EXPECT_EQ(marginal_gain(p, s, one), 1.0);
  const std::vector<CellId> five{0, 2, 4, 6, 8};
  EXPECT_EQ(marginal_gain(p, s, five), 5.0);
}

TEST(MarginalGain, ThirtyOneVisits) {
  const auto p = SensingParams::uniform(1, 1, 0.2);
  CoverageState s(1, 1);
  const std::vector<CellId> cell{0};
  for (int i = 0; i < 31; ++i) s.commit_route(cell, 0);
  EXPECT_NEAR(marginal_gain(p, s, cell), 2.0 - std::pow(31.0, 0.2), 1e-12);
}

TEST(Coverage, CommitsAccumulate) {
  CoverageState s(5, 2);
  const std::vector<CellId> r{0, 1, 2};
  s.commit_route(r, 0);
  for (CellId g : r) EXPECT_EQ(s.count(g), 1u);
  s.commit_route(r, 0);
  for (CellId g : r) EXPECT_EQ(s.count(g), 2u);
  EXPECT_EQ(s.count(3), 0u);
  EXPECT_THROW(s.commit_route(r, 1), ContractViolation);
}

TEST(Coverage, SecondEpochSeesFirstEpochCommits) {
  const auto p = SensingParams::uniform(6, 1, 0.2);
  CoverageState s(6, 1);
  const std::vector<CellId> a{0, 1, 2};
  const std::vector<CellId> b{2, 3};
  s.commit_route(a, 0);
  s.advance_epoch();
  // Replay: counts after epoch 1 are {1,1,1,0,...}.
  const double expected = (std::pow(2.0, 0.2) - 1.0) + 1.0;
  EXPECT_NEAR(marginal_gain(p, s, b), expected, 1e-12);
  s.commit_route(b, 0);
  EXPECT_EQ(s.count(2), 2u);
  EXPECT_EQ(s.count(3), 1u);
}

TEST(Coverage, DistinctVehiclesCountOncePerInterval) {
  CoverageState s(3, 2, true);
  const std::vector<CellId> r{0, 1};
  s.commit_route(r, 0, DriverId{7});
  s.commit_route(r, 0, DriverId{7});
  s.commit_route(r, 0, DriverId{8});
  EXPECT_EQ(s.count(0), 2u);
  s.advance_interval();
  s.commit_route(r, 1, DriverId{7});
  EXPECT_EQ(s.count(0), 1u);
}

TEST(Coverage, IntervalResetMakesEveryCellFresh) {
  const auto p = SensingParams::uniform(8, 2);
  CoverageState s(8, 2);
  std::mt19937_64 rng(4);
  for (int i = 0; i < 20; ++i) {
    const auto r = random_route(rng, 8);
    s.commit_route(r, 0);
  }
  s.advance_interval();
  for (int i = 0; i < 20; ++i) {
    const auto r = random_route(rng, 8);
    EXPECT_EQ(marginal_gain(p, s, r), static_cast<double>(r.size()));
  }
  EXPECT_THROW(s.advance_interval(), ContractViolation);
}

TEST(Coverage, CoverageFraction) {
  CoverageState s(4, 1);
  EXPECT_EQ(coverage_fraction(s, 0), 0.0);
  const std::vector<CellId> r{1, 3};
  s.commit_route(r, 0);
  EXPECT_EQ(coverage_fraction(s, 0), 0.5);
}

TEST(SensingProperties, GainStrictlyDiminishes) {
  const auto p = SensingParams::uniform(1, 1, 0.2);
  double prev = sensing_quality(p, 1) - sensing_quality(p, 0);
  for (std::uint32_t n = 1; n <= 10000; ++n) {
    const double g = sensing_quality(p, n + 1) - sensing_quality(p, n);
    EXPECT_LT(g, prev) << "N = " << n;
    prev = g;
  }
}

TEST(SensingProperties, Submodular) {
  const auto p = SensingParams::uniform(12, 1, 0.2);
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 300; ++trial) {
    CoverageState s(12, 1);
    for (int k = 0; k < trial % 7; ++k) {
      const auto r = random_route(rng, 12);
      s.commit_route(r, 0);
    }
    const auto a = random_route(rng, 12);
    const auto b = random_route(rng, 12);
    const double before = marginal_gain(p, s, b);
    s.commit_route(a, 0);
    EXPECT_LE(marginal_gain(p, s, b), before + 1e-15);
  }
}

TEST(SensingProperties, CommittedGainsAddUpToPhiWithUniformWeights) {
  const std::size_t cells = 9;
  const std::size_t intervals = 3;
  const auto p = SensingParams::uniform(cells, intervals, 0.2);
  CoverageState s(cells, intervals);
  std::mt19937_64 rng(17);
  double incremental = 0.0;
  for (std::size_t t = 0; t < intervals; ++t) {
    if (t > 0) s.advance_interval();
    for (int k = 0; k < 25; ++k) {
      const auto r = random_route(rng, cells);
      incremental += marginal_gain(p, s, r) * p.temporal_weights[t] * p.spatial_weights[0];
      s.commit_route(r, t);
    }
  }
  EXPECT_NEAR(incremental, total_sensing_utility(p, s), 1e-9);
}

TEST(SensingParams, Validation) {
  auto p = SensingParams::uniform(3, 2);
  EXPECT_NO_THROW(p.validate());
  p.exponent = 1.0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = SensingParams::uniform(3, 2);
  p.spatial_weights[0] = 0.9;
  EXPECT_THROW(p.validate(), ConfigError);
}
