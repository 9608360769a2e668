#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "senseauction/assignment.hpp"
#include "senseauction/properties.hpp"

using namespace senseauction;
using fixtures::chosen_pairs;
using fixtures::enumerated_choice;
using fixtures::from_edges;
using fixtures::raw_edge;

namespace {

using Pairs = std::vector<std::pair<DriverId, RiderId>>;

MatchingProblem with_objective(MatchingProblem p, Objective o, bool floor) {
  p.objective = o;
  p.welfare_floor = floor;
  return p;
}

// Random instance with ties: some drivers are exact copies of another
// driver's edges, and sigma/zeta are drawn from a coarse lattice.
MatchingProblem tied_instance(std::mt19937_64& rng, Objective o, bool floor) {
  std::uniform_int_distribution<int> size(1, 6);
  std::uniform_int_distribution<int> level(-3, 4);
  std::uniform_int_distribution<int> zlevel(0, 3);
  std::bernoulli_distribution edge(0.6);
  std::bernoulli_distribution copy(0.4);
  const int nd = size(rng);
  const int nr = size(rng);
  std::vector<CandidateEdge> edges;
  std::vector<double> zeta(nr);
  for (auto& z : zeta) z = 0.5 * zlevel(rng);
  for (int d = 0; d < nd; ++d) {
    if (d > 0 && copy(rng)) {
      std::vector<CandidateEdge> dup;
      for (const auto& e : edges) {
        if (e.driver.value == static_cast<std::uint32_t>(d - 1)) {
          auto c = e;
          c.driver = DriverId{static_cast<std::uint32_t>(d)};
          dup.push_back(c);
        }
      }
      edges.insert(edges.end(), dup.begin(), dup.end());
      continue;
    }
    for (int r = 0; r < nr; ++r) {
      if (edge(rng)) edges.push_back(raw_edge(d, r, 1.0 * level(rng), zeta[r], 0.5 * (1 + zlevel(rng))));
    }
  }
  return from_edges(edges, o, floor);
}

}  // namespace

TEST(WorkedMarket, WelfareMaxPicksShortTrip) {
  const auto p = fixtures::two_rider_market();
  const auto s = solve_welfare_max(p);
  EXPECT_EQ(chosen_pairs(p, s), (Pairs{{DriverId{0}, RiderId{2}}}));
  EXPECT_NEAR(s.objective_value, 6.0, 1e-9);
}

TEST(WorkedMarket, SensingMaxPicksUnsensedTrip) {
  const auto p = with_objective(fixtures::two_rider_market(), Objective::sensing, true);
  const auto s = solve_sensing_max(p);
  EXPECT_EQ(chosen_pairs(p, s), (Pairs{{DriverId{0}, RiderId{1}}}));
  EXPECT_NEAR(s.objective_value, 0.8, 1e-12);
  EXPECT_NEAR(s.welfare_total, 1.44, 1e-9);
}

TEST(WorkedMarket, Marginals) {
  const auto p = fixtures::two_rider_market();
  const auto s = solve_welfare_max(p);
  const auto m = compute_marginals(p, s);
  EXPECT_NEAR(m.without_rider.at(RiderId{2}), 1.44, 1e-9);
  EXPECT_NEAR(m.without_driver.at(DriverId{0}), 0.0, 1e-12);
  // r1 is unmatched: removing it leaves the optimum unchanged.
  EXPECT_NEAR(marginal_objective(p, RiderId{1}), s.objective_value, 1e-12);
}

TEST(Solver, EmptyProblem) {
  MatchingProblem p;
  const auto s = solve_welfare_max(p);
  EXPECT_TRUE(s.chosen.empty());
  EXPECT_EQ(s.objective_value, 0.0);
}

TEST(Solver, NegativeWelfareIsNeverMatchedForWelfare) {
  const auto p = from_edges({raw_edge(0, 0, -1, 0.5), raw_edge(0, 1, -2, 0.5), raw_edge(1, 1, -0.1, 0.1)},
                            Objective::welfare, false);
  EXPECT_TRUE(solve_welfare_max(p).chosen.empty());
}

TEST(Solver, FloorBlocksLoneNegativeEdge) {
  const auto p = from_edges({raw_edge(0, 0, -5, 3)}, Objective::sensing, true);
  const auto s = solve_sensing_max(p);
  EXPECT_TRUE(s.chosen.empty());
  const auto free = solve_sensing_max(with_objective(p, Objective::sensing, false));
  EXPECT_EQ(free.chosen.size(), 1u);
}

TEST(Solver, FloorAllowsNegativeEdgeCarriedByAnother) {
  const auto p = from_edges({raw_edge(0, 0, -5, 3), raw_edge(1, 1, 6, 0.1)}, Objective::sensing, true);
  const auto s = solve_sensing_max(p);
  EXPECT_EQ(s.chosen.size(), 2u);
  EXPECT_NEAR(s.objective_value, 3.1, 1e-12);
  EXPECT_NEAR(s.welfare_total, 1.0, 1e-12);
  EXPECT_EQ(chosen_pairs(p, s), enumerated_choice(p));
}

TEST(Solver, ObjectiveMismatchThrows) {
  const auto p = fixtures::two_rider_market();
  EXPECT_THROW(solve_sensing_max(p), ContractViolation);
  EXPECT_THROW(solve_welfare_max(with_objective(p, Objective::sensing, true)), ContractViolation);
}

TEST(Solver, UnknownParticipantThrows) {
  const auto p = fixtures::two_rider_market();
  EXPECT_THROW(marginal_objective(p, DriverId{9}), ContractViolation);
}

TEST(Solver, PickupBreaksWelfareTies) {
  const auto p = from_edges({raw_edge(0, 0, 2, 0, 1.5), raw_edge(1, 0, 2, 0, 0.7)}, Objective::welfare, false);
  EXPECT_EQ(chosen_pairs(p, solve_welfare_max(p)), (Pairs{{DriverId{1}, RiderId{0}}}));
}

TEST(Solver, ExactTiesGoToLowestDriver) {
  const auto p = from_edges({raw_edge(3, 0, 2, 0), raw_edge(1, 0, 2, 0), raw_edge(2, 0, 2, 0)}, Objective::welfare, false);
  EXPECT_EQ(chosen_pairs(p, solve_welfare_max(p)), (Pairs{{DriverId{1}, RiderId{0}}}));
}

struct TieCase {
  Objective objective;
  bool floor;
};

class TieBreak : public ::testing::TestWithParam<TieCase> {};

TEST_P(TieBreak, MatchesEnumeration) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 600; ++trial) {
    const auto p = tied_instance(rng, GetParam().objective, GetParam().floor);
    const auto s = solve_matching(p);
    ASSERT_EQ(chosen_pairs(p, s), enumerated_choice(p)) << "trial " << trial;
    EXPECT_TRUE(s.optimal);
  }
}

INSTANTIATE_TEST_SUITE_P(Objectives, TieBreak,
                         ::testing::Values(TieCase{Objective::welfare, false}, TieCase{Objective::sensing, true},
                                           TieCase{Objective::sensing, false}),
                         [](const auto& info) {
                           return std::string(to_string(info.param.objective)) + (info.param.floor ? "Floor" : "Free");
                         });

TEST(Solver, RandomInstancesMatchEnumeration) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> size(1, 6);
  for (int trial = 0; trial < 300; ++trial) {
    properties::InstanceShape shape;
    shape.drivers = size(rng);
    shape.riders = size(rng);
    shape.rider_zeta = trial % 2 == 0;
    auto p = properties::random_instance(rng, shape).problem;
    for (auto [o, floor] : {std::pair{Objective::welfare, false}, {Objective::sensing, true}}) {
      p.objective = o;
      p.welfare_floor = floor;
      ASSERT_EQ(chosen_pairs(p, solve_matching(p)), enumerated_choice(p)) << "trial " << trial;
    }
  }
}

TEST(Solver, SolutionIsAMatching) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    properties::InstanceShape shape;
    shape.drivers = 8;
    shape.riders = 8;
    auto p = properties::random_instance(rng, shape).problem;
    p.objective = Objective::sensing;
    p.welfare_floor = true;
    const auto s = solve_sensing_max(p);
    std::set<DriverId> ds;
    std::set<RiderId> rs;
    double sigma = 0.0;
    for (std::size_t i : s.chosen) {
      EXPECT_TRUE(ds.insert(p.edges[i].driver).second);
      EXPECT_TRUE(rs.insert(p.edges[i].rider).second);
      sigma += p.edges[i].sigma;
    }
    EXPECT_GE(sigma, -1e-9);
    EXPECT_TRUE(std::is_sorted(s.chosen.begin(), s.chosen.end()));
  }
}

TEST(Solver, RemovingAParticipantNeverHelps) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    properties::InstanceShape shape;
    shape.drivers = 5;
    shape.riders = 5;
    auto p = properties::random_instance(rng, shape).problem;
    for (auto o : {Objective::welfare, Objective::sensing}) {
      p.objective = o;
      p.welfare_floor = o == Objective::sensing;
      const double full = solve_matching(p).objective_value;
      for (auto d : p.drivers) EXPECT_LE(marginal_objective(p, d), full + 1e-9);
      for (auto r : p.riders) EXPECT_LE(marginal_objective(p, r), full + 1e-9);
    }
  }
}

TEST(Solver, FloorIsIrrelevantWhenItDoesNotBind) {
  std::mt19937_64 rng(3);
  int slack = 0;
  for (int trial = 0; trial < 300; ++trial) {
    properties::InstanceShape shape;
    shape.drivers = 5;
    shape.riders = 5;
    auto p = properties::random_instance(rng, shape).problem;
    p.objective = Objective::sensing;
    p.welfare_floor = false;
    const auto free = solve_sensing_max(p);
    if (free.welfare_total < 0.0) continue;
    ++slack;
    p.welfare_floor = true;
    EXPECT_EQ(solve_sensing_max(p).chosen, free.chosen);
  }
  EXPECT_GT(slack, 50);
}

TEST(Solver, DeterministicAndOrderInvariant) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    properties::InstanceShape shape;
    shape.drivers = 6;
    shape.riders = 6;
    auto p = properties::random_instance(rng, shape).problem;
    p.objective = Objective::sensing;
    p.welfare_floor = true;
    const auto a = chosen_pairs(p, solve_sensing_max(p));
    EXPECT_EQ(chosen_pairs(p, solve_sensing_max(p)), a);
    auto q = p;
    std::shuffle(q.edges.begin(), q.edges.end(), rng);
    canonicalize(q);
    EXPECT_EQ(chosen_pairs(q, solve_sensing_max(q)), a);
  }
}

TEST(Solver, ParallelMarginalsMatchSerial) {
  std::mt19937_64 rng(6);
  properties::InstanceShape shape;
  auto p = properties::random_instance(rng, shape).problem;
  const auto s = solve_welfare_max(p);
  const auto a = compute_marginals(p, s, 1);
  const auto b = compute_marginals(p, s, 4);
  EXPECT_EQ(a.without_driver, b.without_driver);
  EXPECT_EQ(a.without_rider, b.without_rider);
}

TEST(Problem, DuplicateEdgeRejected) {
  auto p = from_edges({raw_edge(0, 0, 1, 0), raw_edge(0, 0, 2, 0)}, Objective::welfare, false);
  EXPECT_THROW(p.validate(), ContractViolation);
}

class Candidates : public ::testing::Test {
 protected:
  GridWorld world = build_grid(10, 10, 1.0, std::vector<double>(100, 1.0));
  ProspectModel prospect = build_prospect_model(world);
  SensingParams sensing = SensingParams::uniform(100, 1);
  CoverageState coverage{100, 1};

  RiderRequest rider(std::uint32_t id, Point o, Point d) {
    RiderRequest r;
    r.id = RiderId{id};
    r.origin = o;
    r.dest = d;
    r.route = route(world, o, d);
    return r;
  }
  DriverState driver(std::uint32_t id, Point at) {
    DriverState d;
    d.id = DriverId{id};
    d.location = at;
    return d;
  }
};

TEST_F(Candidates, RadiusCutsEdges) {
  const std::vector<DriverState> ds{driver(0, {5.0, 5.0})};
  const std::vector<RiderRequest> near{rider(0, {5.5, 5.0}, {8.5, 5.0})};
  const auto p = build_candidates(ds, near, world, {}, prospect, sensing, coverage, 2.0);
  ASSERT_EQ(p.edges.size(), 1u);
  EXPECT_NEAR(p.edges[0].tau, 0.5, 1e-12);
  EXPECT_EQ(p.edges[0].tau, p.edges[0].tau_min_d);
  EXPECT_NEAR(p.edges[0].trip_km, 3.0, 1e-12);
  EXPECT_NEAR(p.edges[0].sigma, p.edges[0].P_r - p.edges[0].P_d, 1e-12);
  EXPECT_NEAR(p.edges[0].zeta, marginal_gain(sensing, coverage, near[0].route.cells), 1e-12);

  const std::vector<RiderRequest> far{rider(0, {8.0, 5.0}, {8.5, 5.0})};
  const auto q = build_candidates(ds, far, world, {}, prospect, sensing, coverage, 2.0);
  EXPECT_TRUE(q.edges.empty());
  EXPECT_EQ(q.riders.size(), 1u);
}

TEST_F(Candidates, ExtraPickupIsMeasuredFromNearestOption) {
  const std::vector<DriverState> ds{driver(0, {5.0, 5.0})};
  const std::vector<RiderRequest> rs{rider(0, {5.5, 5.0}, {5.5, 8.5}), rider(1, {5.0, 6.0}, {5.0, 8.5})};
  const Rates rates;
  const auto p = build_candidates(ds, rs, world, rates, prospect, sensing, coverage, 2.0);
  ASSERT_EQ(p.edges.size(), 2u);
  const auto& e = p.edges[1];
  EXPECT_NEAR(e.tau, 1.0, 1e-12);
  EXPECT_NEAR(e.tau_min_d, 0.5, 1e-12);
  EXPECT_NEAR(e.tau_min_r, 1.0, 1e-12);
  EXPECT_NEAR(e.P_d, rates.alpha * e.trip_km + 1.0 * 0.5 + e.opportunity_cost, 1e-12);
  EXPECT_NEAR(e.P_r, rates.beta * e.trip_km, 1e-12);
}

TEST_F(Candidates, BusyDriverRejected) {
  auto d = driver(0, {1.0, 1.0});
  d.status = DriverStatus::in_service;
  const std::vector<DriverState> ds{d};
  const std::vector<RiderRequest> rs;
  EXPECT_THROW(build_candidates(ds, rs, world, {}, prospect, sensing, coverage, 2.0), ContractViolation);
}
