#pragma once

// Shared test instances and an enumeration oracle for the solver tie-break.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstddef>
#include <utility>
#include <vector>

#include "senseauction/assignment.hpp"
#include "senseauction/market.hpp"

namespace fixtures {

using namespace senseauction;

/// One driver 0.5 km from two riders. r1: 7.2 km trip to a low-prospect cell
/// (f = 7.56) through unsensed cells; r2: 4.8 km trip, no opportunity cost.
inline MatchingProblem two_rider_market(double zeta_r1 = 0.8, double zeta_r2 = 0.3) {
  const Rates rates{1.5, 2.75};
  MatchingProblem p;
  p.drivers = {DriverId{0}};
  p.riders = {RiderId{1}, RiderId{2}};
  const double trip[] = {7.2, 4.8};
  const double cost[] = {7.56, 0.0};
  const double zeta[] = {zeta_r1, zeta_r2};
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

/// Edge with explicit welfare and sensing gain (valuations split as P_r = sigma, P_d = 0).
inline CandidateEdge raw_edge(std::uint32_t d, std::uint32_t r, double sigma, double zeta, double tau = 0.5) {
  CandidateEdge e;
  e.driver = DriverId{d};
  e.rider = RiderId{r};
  e.tau = e.tau_min_d = e.tau_min_r = tau;
  e.P_r = sigma;
  e.P_d = 0.0;
  e.sigma = sigma;
  e.zeta = zeta;
  return e;
}

inline MatchingProblem from_edges(std::vector<CandidateEdge> edges, Objective objective, bool floor) {
  MatchingProblem p;
  for (const auto& e : edges) {
    p.drivers.push_back(e.driver);
    p.riders.push_back(e.rider);
  }
  p.edges = std::move(edges);
  p.objective = objective;
  p.welfare_floor = floor;
  canonicalize(p);
  return p;
}

/// The matching the solver must return, by enumeration: feasible matchings
/// are visited riders in id order, each trying drivers by id and then
/// "unmatched"; the first one with the best key (within 1e-9 per component)
/// wins. Keys: welfare (sum sigma, -sum tau); sensing (sum zeta, sum sigma, -sum tau).
inline std::vector<std::pair<DriverId, RiderId>> enumerated_choice(const MatchingProblem& p) {
  std::vector<std::vector<std::size_t>> by_rider(p.riders.size());
  for (std::size_t r = 0; r < p.riders.size(); ++r) {
    for (std::size_t i = 0; i < p.edges.size(); ++i) {
      if (p.edges[i].rider == p.riders[r]) by_rider[r].push_back(i);
    }
    std::sort(by_rider[r].begin(), by_rider[r].end(),
              [&](std::size_t a, std::size_t b) { return p.edges[a].driver < p.edges[b].driver; });
  }
  auto key_of = [&](const std::vector<std::size_t>& chosen) {
    double z = 0, s = 0, t = 0;
    for (std::size_t i : chosen) {
      z += p.edges[i].zeta;
      s += p.edges[i].sigma;
      t += p.edges[i].tau;
    }
    return p.objective == Objective::welfare ? std::vector<double>{s, -t} : std::vector<double>{z, s, -t};
  };
  auto better = [](const std::vector<double>& a, const std::vector<double>& b) {
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (a[k] > b[k] + 1e-9) return true;
      if (a[k] < b[k] - 1e-9) return false;
    }
    return false;
  };
  std::vector<std::size_t> chosen;
  std::vector<DriverId> taken;
  std::vector<std::size_t> best;
  std::vector<double> best_key;
  bool have = false;
  auto walk = [&](auto&& self, std::size_t r) -> void {
    if (r == by_rider.size()) {
      double s = 0;
      for (std::size_t i : chosen) s += p.edges[i].sigma;
      if (p.welfare_floor && s < 0.0) return;
      auto k = key_of(chosen);
      if (!have || better(k, best_key)) {
        have = true;
        best = chosen;
        best_key = k;
      }
      return;
    }
    for (std::size_t i : by_rider[r]) {
      if (std::find(taken.begin(), taken.end(), p.edges[i].driver) != taken.end()) continue;
      taken.push_back(p.edges[i].driver);
      chosen.push_back(i);
      self(self, r + 1);
      chosen.pop_back();
      taken.pop_back();
    }
    self(self, r + 1);
  };
  walk(walk, 0);
  std::vector<std::pair<DriverId, RiderId>> out;
  for (std::size_t i : best) out.emplace_back(p.edges[i].driver, p.edges[i].rider);
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<std::pair<DriverId, RiderId>> chosen_pairs(const MatchingProblem& p, const MatchingSolution& s) {
  std::vector<std::pair<DriverId, RiderId>> out;
  for (std::size_t i : s.chosen) out.emplace_back(p.edges[i].driver, p.edges[i].rider);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace fixtures
