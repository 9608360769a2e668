#pragma once

// Exhaustive enumeration of every one-to-one matching of a small problem.
// Shares nothing with the branch-and-bound solver: no edge filtering, no
// decomposition, no bounds. Used by the property harness and the tests.

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "senseauction/assignment.hpp"

namespace senseauction::oracle {

inline constexpr std::size_t kMaxSide = 8;

struct BruteForceResult {
  double best_objective = 0.0;
  std::size_t matchings_enumerated = 0;
};

/// Optimal objective over all matchings (empty one included) that satisfy the
/// welfare floor when the problem asks for it.
inline BruteForceResult brute_force_optimum(const MatchingProblem& problem) {
  if (problem.drivers.size() > kMaxSide || problem.riders.size() > kMaxSide) {
    throw std::invalid_argument("brute force is limited to 8 drivers x 8 riders");
  }
  const auto& edges = problem.edges;
  std::vector<std::vector<std::size_t>> by_rider(problem.riders.size());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    for (std::size_t r = 0; r < problem.riders.size(); ++r) {
      if (problem.riders[r] == edges[i].rider) by_rider[r].push_back(i);
    }
  }
  std::vector<DriverId> taken;
  std::vector<std::size_t> chosen;
  BruteForceResult result;
  result.best_objective = 0.0;

  auto evaluate = [&] {
    ++result.matchings_enumerated;
    double welfare = 0.0;
    double value = 0.0;
    for (std::size_t i : chosen) {
      welfare += edges[i].sigma;
      value += problem.objective == Objective::welfare ? edges[i].sigma : edges[i].zeta;
    }
    if (problem.welfare_floor && welfare < 0.0) return;
    if (value > result.best_objective) result.best_objective = value;
  };

  auto enumerate = [&](auto&& self, std::size_t r) -> void {
    if (r == by_rider.size()) {
      evaluate();
      return;
    }
    self(self, r + 1);
    for (std::size_t i : by_rider[r]) {
      bool busy = false;
      for (DriverId d : taken) busy = busy || d == edges[i].driver;
      if (busy) continue;
      taken.push_back(edges[i].driver);
      chosen.push_back(i);
      self(self, r + 1);
      chosen.pop_back();
      taken.pop_back();
    }
  };
  enumerate(enumerate, 0);
  return result;
}

/// True when the chosen edges form a one-to-one matching meeting the floor.
inline bool is_feasible(const MatchingProblem& problem, const std::vector<std::size_t>& chosen,
                        bool check_floor = true) {
  std::vector<DriverId> ds;
  std::vector<RiderId> rs;
  double welfare = 0.0;
  for (std::size_t i : chosen) {
    if (i >= problem.edges.size()) return false;
    const auto& e = problem.edges[i];
    for (DriverId d : ds) {
      if (d == e.driver) return false;
    }
    for (RiderId r : rs) {
      if (r == e.rider) return false;
    }
    ds.push_back(e.driver);
    rs.push_back(e.rider);
    welfare += e.sigma;
  }
  return !(check_floor && problem.welfare_floor && welfare < 0.0);
}

}  // namespace senseauction::oracle
