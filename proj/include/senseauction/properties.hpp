#pragma once

// Randomized property checks for the two mechanisms: exactness against
// brute force, feasibility, budget balance, individual rationality, group
// incentive compatibility, the unilateral reporting lemmas and envy-freeness.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iterator>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "senseauction/assignment.hpp"
#include "senseauction/csv.hpp"
#include "senseauction/error.hpp"
#include "senseauction/oracle.hpp"
#include "senseauction/pricing.hpp"

namespace senseauction::properties {

/// A random matching problem with truthful rates kept next to the reports.
struct Instance {
  MatchingProblem problem;
  Rates rates;
  std::map<DriverId, double> b_true;
  std::map<RiderId, double> delta_true;
};

struct InstanceShape {
  std::size_t drivers = 6;
  std::size_t riders = 6;
  double edge_probability = 0.7;
  double max_tau_km = 2.0;
  bool rider_zeta = false;  // one zeta per rider, as in the simulation
};

/// Riders' trips are 0.5-8 km; half of them carry an opportunity cost of up to
/// 15 CNY so negative-welfare edges are common; bids are random per participant
/// and zeta per edge, or per rider when the shape asks for it.
inline Instance random_instance(std::mt19937_64& rng, const InstanceShape& shape, const Rates& rates = {}) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> bid(1.0, 2.0);
  Instance inst;
  inst.rates = rates;
  auto& p = inst.problem;
  for (std::size_t i = 0; i < shape.drivers; ++i) {
    p.drivers.push_back(DriverId{static_cast<std::uint32_t>(i)});
    inst.b_true[p.drivers.back()] = bid(rng);
  }
  std::vector<double> trip(shape.riders);
  std::vector<double> cost(shape.riders);
  std::vector<double> zeta(shape.riders);
  for (std::size_t j = 0; j < shape.riders; ++j) {
    p.riders.push_back(RiderId{static_cast<std::uint32_t>(j)});
    inst.delta_true[p.riders.back()] = bid(rng);
    trip[j] = 0.5 + 7.5 * unit(rng);
    cost[j] = unit(rng) < 0.5 ? 0.0 : 15.0 * unit(rng);
    zeta[j] = 0.01 + 1.99 * unit(rng);
  }
  for (std::size_t i = 0; i < shape.drivers; ++i) {
    for (std::size_t j = 0; j < shape.riders; ++j) {
      if (unit(rng) >= shape.edge_probability) continue;
      CandidateEdge e;
      e.driver = p.drivers[i];
      e.rider = p.riders[j];
      e.tau = shape.max_tau_km * unit(rng);
      e.trip_km = trip[j];
      e.opportunity_cost = cost[j];
      e.zeta = shape.rider_zeta ? zeta[j] : 0.01 + 1.99 * unit(rng);
      p.edges.push_back(e);
    }
  }
  std::map<DriverId, double> min_d;
  std::map<RiderId, double> min_r;
  for (const auto& e : p.edges) {
    auto [itd, newd] = min_d.emplace(e.driver, e.tau);
    if (!newd) itd->second = std::min(itd->second, e.tau);
    auto [itr, newr] = min_r.emplace(e.rider, e.tau);
    if (!newr) itr->second = std::min(itr->second, e.tau);
  }
  for (auto& e : p.edges) {
    e.tau_min_d = min_d[e.driver];
    e.tau_min_r = min_r[e.rider];
    reprice(e, rates, inst.b_true[e.driver], inst.delta_true[e.rider]);
  }
  canonicalize(p);
  return inst;
}

/// Re-prices every edge with the given reports (missing entries keep their current report).
inline void apply_reports(MatchingProblem& problem, const Rates& rates, const std::map<DriverId, double>& b,
                          const std::map<RiderId, double>& delta) {
  for (auto& e : problem.edges) {
    const auto bi = b.find(e.driver);
    const auto di = delta.find(e.rider);
    reprice(e, rates, bi == b.end() ? e.b_reported : bi->second, di == delta.end() ? e.delta_reported : di->second);
  }
}

enum class Status { pass, fail, skipped };

struct Outcome {
  Status status = Status::pass;
  std::string detail;

  static Outcome ok() { return {}; }
  static Outcome skip(std::string why) { return {Status::skipped, std::move(why)}; }
  static Outcome failed(std::string why) { return {Status::fail, std::move(why)}; }
};

inline constexpr double kTol = 1e-9;

/// Fault injection for the harness's own negative control.
struct Injection {
  bool skip_welfare_floor = false;
};

inline MatchingSolution solve_as(const MatchingProblem& problem, Objective objective, bool floor,
                                 const Injection& inject = {}) {
  MatchingProblem p = problem;
  p.objective = objective;
  p.welfare_floor = floor && !inject.skip_welfare_floor;
  return solve_matching(p);
}

/// Solver optimum equals the brute-force optimum of the program the solver was handed.
inline Outcome check_exactness(const MatchingProblem& base, Objective objective, bool floor,
                               const Injection& inject = {}) {
  MatchingProblem p = base;
  p.objective = objective;
  p.welfare_floor = floor && !inject.skip_welfare_floor;
  const auto sol = solve_matching(p);
  const auto brute = oracle::brute_force_optimum(p);
  if (std::abs(sol.objective_value - brute.best_objective) > kTol) {
    return Outcome::failed(std::string(to_string(objective)) + " objective " + format_number(sol.objective_value) +
                           " != brute force " + format_number(brute.best_objective));
  }
  return Outcome::ok();
}

/// One-to-one matching that honors the welfare floor of the original program.
inline Outcome check_feasibility(const MatchingProblem& base, Objective objective, bool floor,
                                 const Injection& inject = {}) {
  MatchingProblem p = base;
  p.objective = objective;
  p.welfare_floor = floor;
  const auto sol = solve_as(base, objective, floor, inject);
  if (!oracle::is_feasible(p, sol.chosen)) {
    return Outcome::failed(std::string(to_string(objective)) + " solution violates one-to-one or the welfare floor (sum sigma = " +
                           format_number(sol.welfare_total) + ")");
  }
  return Outcome::ok();
}

inline Outcome check_budget_balance(const Instance& inst) {
  const auto ds_off = settle_epoch(Mechanism::ds, inst.problem, inst.rates, false);
  if (std::abs(ds_off.revenue) > kTol) return Outcome::failed("DS revenue without floor = " + format_number(ds_off.revenue));
  const auto ds_on = settle_epoch(Mechanism::ds, inst.problem, inst.rates, true);
  if (ds_on.revenue < -kTol) return Outcome::failed("DS revenue with floor = " + format_number(ds_on.revenue));
  const auto vcg = settle_epoch(Mechanism::vcg, inst.problem, inst.rates, false);
  if (vcg.revenue > kTol) return Outcome::failed("VCG revenue = " + format_number(vcg.revenue));
  return Outcome::ok();
}

inline Outcome check_individual_rationality(const Instance& inst) {
  for (bool floor : {false, true}) {
    const auto s = settle_epoch(Mechanism::ds, inst.problem, inst.rates, floor);
    for (const auto& m : s.priced) {
      if (m.q_d < m.P_d - kTol) return Outcome::failed("DS driver paid below valuation");
      if (m.bonus_r < -kTol || m.bonus_d < -kTol) return Outcome::failed("DS negative bonus");
      if (!floor && m.q_r > m.P_r + kTol) return Outcome::failed("DS rider charged above valuation");
      if (floor && m.q_r > std::max(m.P_r, inst.rates.alpha * m.trip_km) + kTol) {
        return Outcome::failed("DS rider charged above max(P_r, alpha h)");
      }
    }
  }
  const auto vcg = settle_epoch(Mechanism::vcg, inst.problem, inst.rates, false);
  for (const auto& m : vcg.priced) {
    if (m.bonus_d < -kTol || m.bonus_r < -kTol) return Outcome::failed("VCG negative pivot bonus");
    if (m.q_d < m.P_d - kTol || m.q_r > m.P_r + kTol) return Outcome::failed("VCG price outside valuation");
  }
  return Outcome::ok();
}

inline Outcome check_share_normalization(const Instance& inst) {
  const auto s = settle_epoch(Mechanism::ds, inst.problem, inst.rates, false);
  if (s.priced.empty()) return Outcome::ok();
  double total = 0.0;
  for (const auto& m : s.priced) total += m.share_d + m.share_r;
  if (std::abs(total - 1.0) > kTol) return Outcome::failed("DS shares sum to " + format_number(total));
  return Outcome::ok();
}

namespace detail {

inline std::vector<std::pair<DriverId, RiderId>> matched_pairs(const EpochSettlement& s) {
  std::vector<std::pair<DriverId, RiderId>> out;
  for (const auto& m : s.priced) out.emplace_back(m.driver, m.rider);
  return out;
}

// Utilities measured against truthful valuations of the same edges.
inline Utilities true_utilities(const PricedMatch& m, const MatchingProblem& truthful) {
  const auto& e = truthful.edges[m.edge];
  return participant_utilities(m.q_d, m.q_r, e.P_d, e.P_r);
}

}  // namespace detail

/// Perturbs the reports of all matched participants; with the matching held
/// fixed the cohort's true total utility must equal the truthful welfare.
inline Outcome check_group_ic(const Instance& inst, std::mt19937_64& rng, double lo = -0.3, double hi = 0.5) {
  const auto truthful = settle_epoch(Mechanism::ds, inst.problem, inst.rates, false);
  if (truthful.priced.empty()) return Outcome::skip("nothing matched");
  std::uniform_real_distribution<double> eps(lo, hi);
  auto b = inst.b_true;
  auto delta = inst.delta_true;
  for (const auto& m : truthful.priced) {
    b[m.driver] += eps(rng);
    delta[m.rider] += eps(rng);
  }
  MatchingProblem reported = inst.problem;
  apply_reports(reported, inst.rates, b, delta);
  const auto s = settle_epoch(Mechanism::ds, reported, inst.rates, false);
  if (detail::matched_pairs(s) != detail::matched_pairs(truthful)) return Outcome::skip("matching changed");
  if (s.welfare_total < 0.0) return Outcome::skip("welfare floor violated");
  double total = 0.0;
  for (const auto& m : s.priced) {
    const auto u = detail::true_utilities(m, inst.problem);
    total += u.driver + u.rider;
  }
  if (std::abs(total - truthful.welfare_total) > kTol) {
    return Outcome::failed("cohort utility " + format_number(total) + " != truthful welfare " +
                           format_number(truthful.welfare_total));
  }
  return Outcome::ok();
}

/// Unilateral misreport by one participant. Matched participants with a
/// positive extra pick-up see utility move with the sign of the misreport,
/// by exactly extra * eps * (1 - share); unmatched participants stay at zero.
inline Outcome check_reporting_lemmas(const Instance& inst, std::mt19937_64& rng, double lo = -0.3,
                                      double hi = 0.5) {
  const auto truthful = settle_epoch(Mechanism::ds, inst.problem, inst.rates, false);
  std::uniform_real_distribution<double> eps_dist(lo, hi);
  std::uniform_int_distribution<std::size_t> pick(0, inst.problem.drivers.size() + inst.problem.riders.size() - 1);
  const std::size_t who = pick(rng);
  const bool is_driver = who < inst.problem.drivers.size();
  const double eps = eps_dist(rng);

  auto b = inst.b_true;
  auto delta = inst.delta_true;
  DriverId d{};
  RiderId r{};
  if (is_driver) {
    d = inst.problem.drivers[who];
    b[d] += eps;
  } else {
    r = inst.problem.riders[who - inst.problem.drivers.size()];
    delta[r] += eps;
  }
  MatchingProblem reported = inst.problem;
  apply_reports(reported, inst.rates, b, delta);
  const auto s = settle_epoch(Mechanism::ds, reported, inst.rates, false);
  if (detail::matched_pairs(s) != detail::matched_pairs(truthful)) return Outcome::skip("matching changed");

  const auto find = [&](const EpochSettlement& st) -> const PricedMatch* {
    for (const auto& m : st.priced) {
      if ((is_driver && m.driver == d) || (!is_driver && m.rider == r)) return &m;
    }
    return nullptr;
  };
  const PricedMatch* before = find(truthful);
  const PricedMatch* after = find(s);
  if (before == nullptr) {
    // Unmatched before and after: no payment, no charge, zero utility.
    return after == nullptr ? Outcome::ok() : Outcome::failed("unmatched participant became matched");
  }
  const double share_before = is_driver ? before->share_d : before->share_r;
  const double share_after = is_driver ? after->share_d : after->share_r;
  if (std::abs(share_before - share_after) > 1e-12) return Outcome::skip("sensing share changed");

  const auto& edge = inst.problem.edges[before->edge];
  const double extra = is_driver ? edge.tau - edge.tau_min_d : edge.tau - edge.tau_min_r;
  const auto u_before = detail::true_utilities(*before, inst.problem);
  const auto u_after = detail::true_utilities(*after, inst.problem);
  const double gain = is_driver ? u_after.driver - u_before.driver : u_after.rider - u_before.rider;
  const double expected = extra * eps * (1.0 - share_before);
  if (std::abs(gain - expected) > kTol) {
    return Outcome::failed("utility change " + format_number(gain) + " != extra*eps*(1-share) " + format_number(expected));
  }
  if (extra > 1e-12 && 1.0 - share_before > 1e-12 && eps != 0.0) {
    if ((gain > 0.0) != (eps > 0.0) || gain == 0.0) return Outcome::failed("utility change has the wrong sign");
  } else if (gain * eps < -kTol) {
    return Outcome::failed("utility change opposes the misreport");
  }
  return Outcome::ok();
}

/// Adds an exact duplicate of one rider (or driver); when both copies are
/// matched their DS utilities must coincide.
inline Outcome check_envy_free(const Instance& inst, std::mt19937_64& rng) {
  Instance dup = inst;
  auto& p = dup.problem;
  std::uniform_int_distribution<std::size_t> coin(0, 1);
  const bool duplicate_rider = coin(rng) == 1;
  std::vector<CandidateEdge> extra;
  if (duplicate_rider) {
    std::uniform_int_distribution<std::size_t> pick(0, p.riders.size() - 1);
    const RiderId src = p.riders[pick(rng)];
    const RiderId twin{static_cast<std::uint32_t>(p.riders.back().value + 1)};
    for (const auto& e : p.edges) {
      if (e.rider != src) continue;
      auto copy = e;
      copy.rider = twin;
      extra.push_back(copy);
    }
    p.riders.push_back(twin);
    dup.delta_true[twin] = dup.delta_true[src];
    p.edges.insert(p.edges.end(), extra.begin(), extra.end());
    canonicalize(p);
    const auto s = settle_epoch(Mechanism::ds, p, dup.rates, false);
    const PricedMatch* a = nullptr;
    const PricedMatch* b = nullptr;
    for (const auto& m : s.priced) {
      if (m.rider == src) a = &m;
      if (m.rider == twin) b = &m;
    }
    if (a == nullptr || b == nullptr) return Outcome::skip("duplicates not both matched");
    const double ua = participant_utilities(*a).rider;
    const double ub = participant_utilities(*b).rider;
    if (std::abs(ua - ub) > kTol) return Outcome::failed("duplicate riders' utilities differ");
    return Outcome::ok();
  }
  std::uniform_int_distribution<std::size_t> pick(0, p.drivers.size() - 1);
  const DriverId src = p.drivers[pick(rng)];
  const DriverId twin{static_cast<std::uint32_t>(p.drivers.back().value + 1)};
  for (const auto& e : p.edges) {
    if (e.driver != src) continue;
    auto copy = e;
    copy.driver = twin;
    extra.push_back(copy);
  }
  p.drivers.push_back(twin);
  dup.b_true[twin] = dup.b_true[src];
  p.edges.insert(p.edges.end(), extra.begin(), extra.end());
  canonicalize(p);
  const auto s = settle_epoch(Mechanism::ds, p, dup.rates, false);
  const PricedMatch* a = nullptr;
  const PricedMatch* b = nullptr;
  for (const auto& m : s.priced) {
    if (m.driver == src) a = &m;
    if (m.driver == twin) b = &m;
  }
  if (a == nullptr || b == nullptr) return Outcome::skip("duplicates not both matched");
  const double ua = participant_utilities(*a).driver;
  const double ub = participant_utilities(*b).driver;
  if (std::abs(ua - ub) > kTol) return Outcome::failed("duplicate drivers' utilities differ");
  return Outcome::ok();
}

// ---- suite ------------------------------------------------------------------

inline constexpr const char* kPropertyNames[] = {
    "exact_welfare",       "exact_sensing_floor", "exact_sensing_free", "feasible_sensing_floor",
    "budget_balance",      "individual_rationality", "share_normalization", "group_ic",
    "reporting_lemmas",    "envy_free"};
inline constexpr std::size_t kPropertyCount = std::size(kPropertyNames);

struct SuiteOptions {
  std::size_t trials = 1000;
  std::size_t drivers = 6;
  std::size_t riders = 6;
  bool random_sizes = false;  // sizes uniform in [1, drivers] x [1, riders]
  bool mix_rider_zeta = true;  // every other instance uses one zeta per rider
  std::uint64_t seed = 1;
  Injection inject;
};

struct Failure {
  std::size_t trial = 0;
  std::string property;
  std::string detail;
  Instance instance;
};

struct Tally {
  std::size_t pass = 0;
  std::size_t fail = 0;
  std::size_t skipped = 0;
};

struct SuiteReport {
  std::array<Tally, kPropertyCount> tally{};
  std::vector<Failure> failures;

  bool ok() const { return failures.empty(); }
};

/// Every property on one instance, in kPropertyNames order.
inline std::array<Outcome, kPropertyCount> check_all(const Instance& inst, std::mt19937_64& rng,
                                                     const Injection& inject = {}) {
  return {check_exactness(inst.problem, Objective::welfare, false, inject),
          check_exactness(inst.problem, Objective::sensing, true, inject),
          check_exactness(inst.problem, Objective::sensing, false, inject),
          check_feasibility(inst.problem, Objective::sensing, true, inject),
          check_budget_balance(inst),
          check_individual_rationality(inst),
          check_share_normalization(inst),
          check_group_ic(inst, rng),
          check_reporting_lemmas(inst, rng),
          check_envy_free(inst, rng)};
}

inline SuiteReport run_suite(const SuiteOptions& options) {
  if (options.drivers == 0 || options.riders == 0) throw ConfigError("instance sizes must be at least 1x1");
  if (options.drivers > oracle::kMaxSide || options.riders > oracle::kMaxSide) {
    throw ConfigError("instance sizes are limited to 8x8");
  }
  SuiteReport report;
  std::mt19937_64 rng(options.seed);
  for (std::size_t trial = 0; trial < options.trials; ++trial) {
    InstanceShape shape;
    shape.drivers = options.drivers;
    shape.riders = options.riders;
    if (options.random_sizes) {
      shape.drivers = std::uniform_int_distribution<std::size_t>(1, options.drivers)(rng);
      shape.riders = std::uniform_int_distribution<std::size_t>(1, options.riders)(rng);
    }
    shape.rider_zeta = options.mix_rider_zeta && trial % 2 == 1;
    const Instance inst = random_instance(rng, shape);
    const auto outcomes = check_all(inst, rng, options.inject);
    for (std::size_t k = 0; k < kPropertyCount; ++k) {
      auto& t = report.tally[k];
      switch (outcomes[k].status) {
        case Status::pass: ++t.pass; break;
        case Status::skipped: ++t.skipped; break;
        case Status::fail:
          ++t.fail;
          report.failures.push_back({trial, kPropertyNames[k], outcomes[k].detail, inst});
          break;
      }
    }
  }
  return report;
}

}  // namespace senseauction::properties
