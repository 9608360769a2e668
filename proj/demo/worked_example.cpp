// One driver, two riders 0.5 km away. The short trip to r2 creates more
// welfare; the long trip to r1 passes through cells nobody has sensed yet.

#include <cstdio>

#include "senseauction/senseauction.hpp"

using namespace senseauction;

namespace {

MatchingProblem two_rider_market(const Rates& rates) {
  MatchingProblem p;
  p.drivers = {DriverId{0}};
  p.riders = {RiderId{1}, RiderId{2}};
  const double trip[] = {7.2, 4.8};
  const double cost[] = {7.56, 0.0};
  const double zeta[] = {0.8, 0.3};
  for (int k = 0; k < 2; ++k) {
    CandidateEdge e;
    e.driver = DriverId{0};
    e.rider = p.riders[k];
    e.tau = e.tau_min_d = e.tau_min_r = 0.5;
    e.trip_km = trip[k];
    e.opportunity_cost = cost[k];
    e.zeta = zeta[k];
    reprice(e, rates, 1.5, 1.5);
    p.edges.push_back(e);
  }
  return p;
}

void show(const EpochSettlement& s) {
  std::printf("%s:\n", to_string(s.mechanism));
  for (const auto& m : s.priced) {
    const auto u = participant_utilities(m);
    std::printf("  match (d%u, r%u)  rho_d %.4f  rho_r %.4f  q_d %.4f  q_r %.4f  u_d %.4f  u_r %.4f\n", m.driver.value,
                m.rider.value, m.bonus_d, m.bonus_r, m.q_d, m.q_r, u.driver, u.rider);
  }
  std::printf("  revenue %.4f\n", s.revenue);
}

}  // namespace

int main() {
  const Rates rates{1.5, 2.75};
  const auto problem = two_rider_market(rates);
  for (const auto& e : problem.edges) {
    std::printf("(d%u, r%u): P_d %.2f  P_r %.2f  sigma %.2f  zeta %.2f\n", e.driver.value, e.rider.value, e.P_d, e.P_r,
                e.sigma, e.zeta);
  }
  show(settle_epoch(Mechanism::vcg, problem, rates, false));
  show(settle_epoch(Mechanism::ds, problem, rates, true));
}
