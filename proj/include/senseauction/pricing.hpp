#pragma once

// Payments and charges for a solved matching.
//
// VCG: each matched participant x gets the pivot bonus V* - V_{x-}.
// DS:  the matched welfare V is split in proportion to each participant's
//      sensing contribution U* - U*_{x-}; riders' charges may be clipped from
//      below at alpha * h_r, the clipped amount staying with the platform.

#include <algorithm>
#include <cstddef>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "senseauction/assignment.hpp"
#include "senseauction/csv.hpp"
#include "senseauction/error.hpp"
#include "senseauction/market.hpp"

namespace senseauction {

enum class Mechanism { vcg, ds };

inline const char* to_string(Mechanism m) { return m == Mechanism::vcg ? "vcg" : "ds"; }

inline Objective objective_for(Mechanism m) { return m == Mechanism::vcg ? Objective::welfare : Objective::sensing; }

struct PricedMatch {
  DriverId driver;
  RiderId rider;
  std::size_t edge = 0;  // index into the settled problem's edges
  double tau = 0.0;
  double trip_km = 0.0;
  double P_d = 0.0;
  double P_r = 0.0;
  double sigma = 0.0;
  double zeta = 0.0;
  double bonus_d = 0.0;  // rho_d
  double bonus_r = 0.0;  // rho_r
  double q_d = 0.0;      // payment to the driver
  double q_r = 0.0;      // charge to the rider
  double share_d = 0.0;  // DS only
  double share_r = 0.0;  // DS only
  double floor_clip = 0.0;
};

inline Utilities participant_utilities(const PricedMatch& m) {
  return participant_utilities(m.q_d, m.q_r, m.P_d, m.P_r);
}

struct EpochSettlement {
  Mechanism mechanism = Mechanism::vcg;
  MatchingSolution solution;
  std::vector<PricedMatch> priced;
  double revenue = 0.0;        // sum q_r - sum q_d
  double welfare_total = 0.0;  // V
  double sensing_total = 0.0;  // U
};

namespace detail {

inline PricedMatch base_match(const MatchingProblem& problem, std::size_t edge) {
  const auto& e = problem.edges[edge];
  PricedMatch m;
  m.driver = e.driver;
  m.rider = e.rider;
  m.edge = edge;
  m.tau = e.tau;
  m.trip_km = e.trip_km;
  m.P_d = e.P_d;
  m.P_r = e.P_r;
  m.sigma = e.sigma;
  m.zeta = e.zeta;
  return m;
}

template <class Map, class Key>
double lookup_marginal(const Map& map, Key id) {
  const auto it = map.find(id);
  if (it == map.end()) throw ContractViolation("missing marginal value for a matched participant");
  return it->second;
}

inline void total_up(EpochSettlement& s) {
  s.revenue = 0.0;
  for (const auto& m : s.priced) s.revenue += m.q_r - m.q_d;
  s.welfare_total = s.solution.welfare_total;
  s.sensing_total = s.solution.sensing_total;
}

}  // namespace detail

/// Pivot payments on a welfare-maximizing matching. Revenue is the (non-positive) deficit.
inline EpochSettlement vcg_prices(const MatchingProblem& problem, const MatchingSolution& solution,
                                  const Marginals& marginals) {
  EpochSettlement s;
  s.mechanism = Mechanism::vcg;
  s.solution = solution;
  const double v_star = solution.welfare_total;
  for (std::size_t edge : solution.chosen) {
    auto m = detail::base_match(problem, edge);
    m.bonus_d = v_star - detail::lookup_marginal(marginals.without_driver, m.driver);
    m.bonus_r = v_star - detail::lookup_marginal(marginals.without_rider, m.rider);
    m.q_d = m.P_d + m.bonus_d;
    m.q_r = m.P_r - m.bonus_r;
    s.priced.push_back(m);
  }
  detail::total_up(s);
  return s;
}

/// Proportional-share payments on a sensing-maximizing matching.
inline EpochSettlement ds_prices(const MatchingProblem& problem, const MatchingSolution& solution,
                                 const Marginals& marginals, const Rates& rates, bool floor_enabled) {
  EpochSettlement s;
  s.mechanism = Mechanism::ds;
  s.solution = solution;
  const double u_star = solution.sensing_total;
  const double v = solution.welfare_total;

  std::vector<PricedMatch> priced;
  std::vector<double> contrib_d;
  std::vector<double> contrib_r;
  double total = 0.0;
  for (std::size_t edge : solution.chosen) {
    auto m = detail::base_match(problem, edge);
    // Removing a participant cannot raise the optimum; clamp rounding noise.
    contrib_d.push_back(std::max(0.0, u_star - detail::lookup_marginal(marginals.without_driver, m.driver)));
    contrib_r.push_back(std::max(0.0, u_star - detail::lookup_marginal(marginals.without_rider, m.rider)));
    total += contrib_d.back() + contrib_r.back();
    priced.push_back(m);
  }

  const double participants = 2.0 * static_cast<double>(priced.size());
  for (std::size_t k = 0; k < priced.size(); ++k) {
    auto& m = priced[k];
    if (total > 0.0) {
      m.share_d = contrib_d[k] / total;
      m.share_r = contrib_r[k] / total;
    } else {
      // No participant changes U*: split V evenly.
      m.share_d = 1.0 / participants;
      m.share_r = 1.0 / participants;
    }
    m.bonus_d = v * m.share_d;
    m.bonus_r = v * m.share_r;
    m.q_d = m.P_d + m.bonus_d;
    m.q_r = m.P_r - m.bonus_r;
    if (floor_enabled) {
      const double floor = rates.alpha * m.trip_km;
      if (m.q_r < floor) {
        m.floor_clip = floor - m.q_r;
        m.q_r = floor;
      }
    }
  }
  s.priced = std::move(priced);
  detail::total_up(s);
  return s;
}

/// Solve, compute marginals, price. The problem's objective and welfare floor
/// are set from the mechanism.
inline EpochSettlement settle_epoch(Mechanism mechanism, MatchingProblem problem, const Rates& rates,
                                    bool floor_enabled, unsigned jobs = 1) {
  problem.objective = objective_for(mechanism);
  problem.welfare_floor = mechanism == Mechanism::ds;
  const auto solution = solve_matching(problem);
  const auto marginals = compute_marginals(problem, solution, jobs);
  if (mechanism == Mechanism::vcg) return vcg_prices(problem, solution, marginals);
  return ds_prices(problem, solution, marginals, rates, floor_enabled);
}

inline const char* settlement_csv_header() {
  return "epoch,mechanism,d,r,P_d,P_r,sigma,zeta,rho_d,rho_r,q_d,q_r,u_d,u_r";
}

inline void write_settlement_rows(std::ostream& os, std::size_t epoch, const EpochSettlement& s) {
  for (const auto& m : s.priced) {
    const auto u = participant_utilities(m);
    os << epoch << ',' << to_string(s.mechanism) << ',' << m.driver.value << ',' << m.rider.value;
    for (double v : {m.P_d, m.P_r, m.sigma, m.zeta, m.bonus_d, m.bonus_r, m.q_d, m.q_r, u.driver, u.rider}) {
      os << ',' << format_number(v);
    }
    os << '\n';
  }
}

}  // namespace senseauction
