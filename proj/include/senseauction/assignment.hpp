#pragma once

// Candidate edges and exact solvers for the two matching programs:
//   welfare:  max sum sigma x   s.t. one-to-one
//   sensing:  max sum zeta x    s.t. one-to-one, sum sigma x >= 0 (when welfare_floor)
//
// Each connected component of the candidate graph is solved as a maximum
// weight assignment over lexicographic keys. The welfare floor is the only
// thing coupling components, so a branch and bound over the whole graph runs
// only when the per-component optima violate it.
//
// Ties on the objective are broken by a lexicographic key:
//   welfare:  (sum sigma, -sum tau)
//   sensing:  (sum zeta, sum sigma, -sum tau)
// and then by the assignment itself: riders in id order, each preferring the
// lowest driver id, unmatched last.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <future>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "senseauction/error.hpp"
#include "senseauction/gridworld.hpp"
#include "senseauction/market.hpp"
#include "senseauction/sensing.hpp"

namespace senseauction {

enum class Objective { welfare, sensing };

inline const char* to_string(Objective o) { return o == Objective::welfare ? "welfare" : "sensing"; }

/// A potential match (d, r) with everything needed to price it. The valuation
/// inputs are kept so the edge can be re-priced under different reports.
struct CandidateEdge {
  DriverId driver;
  RiderId rider;
  double tau = 0.0;
  double tau_min_d = 0.0;
  double tau_min_r = 0.0;
  double trip_km = 0.0;
  double opportunity_cost = 0.0;
  double b_reported = 1.0;
  double delta_reported = 1.0;
  double P_d = 0.0;
  double P_r = 0.0;
  double sigma = 0.0;
  double zeta = 0.0;
};

/// Recomputes P_d, P_r and sigma from the stored inputs and the given reports.
inline void reprice(CandidateEdge& e, const Rates& rates, double b_reported, double delta_reported) {
  e.b_reported = b_reported;
  e.delta_reported = delta_reported;
  e.P_d = driver_valuation(rates, e.trip_km, b_reported, {e.tau, e.tau_min_d}, e.opportunity_cost);
  e.P_r = rider_valuation(rates, e.trip_km, delta_reported, {e.tau, e.tau_min_r});
  e.sigma = social_welfare(e.P_r, e.P_d);
}

struct MatchingProblem {
  std::vector<CandidateEdge> edges;
  std::vector<DriverId> drivers;
  std::vector<RiderId> riders;
  Objective objective = Objective::welfare;
  bool welfare_floor = false;

  void validate() const {
    std::vector<std::pair<DriverId, RiderId>> pairs;
    pairs.reserve(edges.size());
    for (const auto& e : edges) {
      if (!std::binary_search(drivers.begin(), drivers.end(), e.driver) ||
          !std::binary_search(riders.begin(), riders.end(), e.rider)) {
        throw ContractViolation("edge references an unknown participant");
      }
      pairs.emplace_back(e.driver, e.rider);
    }
    std::sort(pairs.begin(), pairs.end());
    if (std::adjacent_find(pairs.begin(), pairs.end()) != pairs.end()) {
      throw ContractViolation("duplicate edge for one (driver, rider) pair");
    }
  }
};

/// Sorts participants and edges into canonical (driver, rider) order.
inline void canonicalize(MatchingProblem& p) {
  std::sort(p.drivers.begin(), p.drivers.end());
  p.drivers.erase(std::unique(p.drivers.begin(), p.drivers.end()), p.drivers.end());
  std::sort(p.riders.begin(), p.riders.end());
  p.riders.erase(std::unique(p.riders.begin(), p.riders.end()), p.riders.end());
  std::sort(p.edges.begin(), p.edges.end(), [](const CandidateEdge& a, const CandidateEdge& b) {
    return std::pair{a.driver, a.rider} < std::pair{b.driver, b.rider};
  });
}

struct MatchingSolution {
  std::vector<std::size_t> chosen;  // indices into problem.edges, ascending by (driver, rider)
  double objective_value = 0.0;     // V* or U*
  double welfare_total = 0.0;       // sum sigma over chosen
  double sensing_total = 0.0;       // sum zeta over chosen
  double pickup_total = 0.0;        // sum tau over chosen
  bool optimal = true;
};

/// One edge per (vacant driver, waiting rider) pair within `radius_km`.
inline MatchingProblem build_candidates(std::span<const DriverState> drivers, std::span<const RiderRequest> riders,
                                        const GridWorld& world, const Rates& rates, const ProspectModel& prospect,
                                        const SensingParams& sensing, const CoverageState& coverage,
                                        double radius_km) {
  MatchingProblem problem;
  for (const auto& d : drivers) {
    if (d.status != DriverStatus::vacant) throw ContractViolation("only vacant drivers can be matched");
    problem.drivers.push_back(d.id);
  }
  std::vector<double> rider_zeta(riders.size());
  std::vector<double> rider_cost(riders.size());
  for (std::size_t j = 0; j < riders.size(); ++j) {
    problem.riders.push_back(riders[j].id);
    // Sensing gain depends on the requested trip only, never on the pick-up leg.
    rider_zeta[j] = marginal_gain(sensing, coverage, riders[j].route.cells);
    const CellId dest_cell = world.cell_of(riders[j].dest);
    rider_cost[j] = opportunity_cost(prospect, order_prospect(world, prospect, dest_cell));
  }

  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> tau_min_d(drivers.size(), inf);
  std::vector<double> tau_min_r(riders.size(), inf);
  struct Near {
    std::size_t i, j;
    double tau;
  };
  std::vector<Near> near;
  for (std::size_t i = 0; i < drivers.size(); ++i) {
    for (std::size_t j = 0; j < riders.size(); ++j) {
      const double tau = distance(drivers[i].location, riders[j].origin);
      if (tau > radius_km) continue;
      near.push_back({i, j, tau});
      tau_min_d[i] = std::min(tau_min_d[i], tau);
      tau_min_r[j] = std::min(tau_min_r[j], tau);
    }
  }
  problem.edges.reserve(near.size());
  for (const auto& n : near) {
    CandidateEdge e;
    e.driver = drivers[n.i].id;
    e.rider = riders[n.j].id;
    e.tau = n.tau;
    e.tau_min_d = tau_min_d[n.i];
    e.tau_min_r = tau_min_r[n.j];
    e.trip_km = riders[n.j].trip_km();
    e.opportunity_cost = rider_cost[n.j];
    e.zeta = rider_zeta[n.j];
    reprice(e, rates, drivers[n.i].b_reported, riders[n.j].delta_reported);
    problem.edges.push_back(e);
  }
  canonicalize(problem);
  return problem;
}

namespace detail {

// Keys are quantized to multiples of 2^-40 so that every sum and difference
// the assignment solver forms is exact, making lexicographic ties exact too.
inline constexpr double kQuantum = 1.0 / 1099511627776.0;

inline double quantize(double x) { return std::round(x / kQuantum) * kQuantum; }

struct Key {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;

  friend bool operator==(const Key&, const Key&) = default;
  friend Key operator+(Key x, Key y) { return {x.a + y.a, x.b + y.b, x.c + y.c}; }
  friend Key operator-(Key x, Key y) { return {x.a - y.a, x.b - y.b, x.c - y.c}; }
  friend bool operator<(const Key& x, const Key& y) {
    if (x.a != y.a) return x.a < y.a;
    if (x.b != y.b) return x.b < y.b;
    return x.c < y.c;
  }
};

inline Key edge_key(const CandidateEdge& e, Objective objective) {
  if (objective == Objective::welfare) return {quantize(e.sigma), quantize(-e.tau), 0.0};
  return {quantize(e.zeta), quantize(e.sigma), quantize(-e.tau)};
}

inline bool pair_less(const CandidateEdge& x, const CandidateEdge& y) {
  return std::pair{x.driver, x.rider} < std::pair{y.driver, y.rider};
}

inline double canonical_sigma(const std::vector<CandidateEdge>& edges, const std::vector<std::size_t>& chosen) {
  double s = 0.0;
  for (std::size_t i : chosen) s += edges[i].sigma;
  return s;
}

inline void sort_pairs(const std::vector<CandidateEdge>& edges, std::vector<std::size_t>& chosen) {
  std::sort(chosen.begin(), chosen.end(), [&](std::size_t i, std::size_t j) { return pair_less(edges[i], edges[j]); });
}

inline constexpr std::uint64_t kDefaultNodeBudget = 2'000'000;

/// Maximum-weight assignment of n rows to m columns. Rows not marked as
/// forced may stay unmatched at weight zero. Hungarian method with
/// potentials on the negated weights; `weight(i, j)` returns std::nullopt for
/// a missing edge. `feasible` is false when the forced rows cannot all be matched.
struct Assignment {
  bool feasible = true;
  std::vector<int> pick;    // column per row, -1 when unmatched
  Key value;                // total weight
  std::vector<Key> u;       // row potentials
  std::vector<Key> v;       // column potentials
  std::vector<Key> v_idle;  // potential of each row's "unmatched" column
};

template <class Weight, class Forced>
Assignment max_weight_assignment(std::size_t n, std::size_t m, const Weight& weight, const Forced& forced) {
  Assignment out;
  out.pick.assign(n, -1);
  out.u.assign(n, Key{});
  out.v.assign(m, Key{});
  out.v_idle.assign(n, Key{});
  if (n == 0) return out;

  const std::size_t cols = m + n;  // column m + i is row i's "unmatched" slot
  std::vector<Key> cost(n * cols);
  std::vector<char> allowed(n * cols, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (const std::optional<Key> w = weight(i, j)) {
        cost[i * cols + j] = Key{} - *w;
        allowed[i * cols + j] = 1;
      }
    }
    allowed[i * cols + m + i] = forced(i) ? 0 : 1;
  }

  const Key inf{std::numeric_limits<double>::infinity(), 0.0, 0.0};
  std::vector<Key> u(n + 1);
  std::vector<Key> v(cols + 1);
  std::vector<std::size_t> p(cols + 1, 0);
  std::vector<std::size_t> way(cols + 1, 0);
  std::vector<Key> minv(cols + 1);
  std::vector<char> used(cols + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      Key delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= cols; ++j) {
        if (used[j]) continue;
        const std::size_t at = (i0 - 1) * cols + (j - 1);
        if (allowed[at]) {
          const Key cur = cost[at] - u[i0] - v[j];
          if (cur < minv[j]) {
            minv[j] = cur;
            way[j] = j0;
          }
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      if (j1 == 0) {
        out.feasible = false;
        return out;
      }
      for (std::size_t j = 0; j <= cols; ++j) {
        if (used[j]) {
          u[p[j]] = u[p[j]] + delta;
          v[j] = v[j] - delta;
        } else {
          minv[j] = minv[j] - delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] == 0) continue;
    const std::size_t i = p[j] - 1;
    out.pick[i] = static_cast<int>(j - 1);
    out.value = out.value + (Key{} - cost[i * cols + (j - 1)]);
  }
  for (std::size_t i = 0; i < n; ++i) out.u[i] = u[i + 1];
  for (std::size_t j = 0; j < m; ++j) out.v[j] = v[j + 1];
  for (std::size_t i = 0; i < n; ++i) out.v_idle[i] = v[m + i + 1];
  return out;
}

template <class Weight>
Assignment max_weight_assignment(std::size_t n, std::size_t m, const Weight& weight) {
  return max_weight_assignment(n, m, weight, [](std::size_t) { return false; });
}

/// Exact solver for one edge subset. Rows are riders and columns drivers,
/// both in id order.
///
/// Without a binding welfare floor the lexicographic optimum is one
/// assignment solve; the tie-break then walks rows in id order and keeps
/// the lowest column that still reaches the optimum, testing only options
/// with zero reduced cost.
///
/// With a binding floor the search is a branch and bound. When every rider's
/// edges share one zeta (the simulation case), it branches on which riders
/// are matched; assignment solves with forced rows give exact feasibility and
/// an upper bound. Otherwise it branches on each row's driver with
/// Lagrangian bounds.
class SubsetSolver {
 public:
  SubsetSolver(const std::vector<CandidateEdge>& edges, std::span<const std::size_t> subset, Objective objective,
               bool floor, std::uint64_t node_budget)
      : edges_(edges), floor_(floor), budget_(node_budget) {
    std::map<RiderId, std::size_t> row_of;
    std::map<DriverId, std::size_t> col_of;
    for (std::size_t e : subset) {
      row_of.emplace(edges[e].rider, 0);
      col_of.emplace(edges[e].driver, 0);
    }
    std::size_t k = 0;
    for (auto& [id, idx] : row_of) idx = k++;
    rows_ = k;
    k = 0;
    for (auto& [id, idx] : col_of) idx = k++;
    cols_ = k;
    cell_.assign(rows_ * cols_, kNone);
    options_.resize(rows_);
    for (std::size_t e : subset) {
      const std::size_t r = row_of[edges[e].rider];
      const std::size_t c = col_of[edges[e].driver];
      cell_[r * cols_ + c] = e;
      options_[r].push_back(c);
    }
    for (auto& o : options_) std::sort(o.begin(), o.end());
    keys_.resize(edges.size());
    for (std::size_t e : subset) keys_[e] = edge_key(edges[e], objective);

    rider_zeta_.assign(rows_, 0.0);
    separable_ = objective == Objective::sensing;
    for (std::size_t r = 0; r < rows_; ++r) {
      rider_zeta_[r] = keys_[edge_at(r, static_cast<int>(options_[r].front()))].a;
      for (std::size_t c : options_[r]) separable_ = separable_ && keys_[edge_at(r, static_cast<int>(c))].a == rider_zeta_[r];
    }

    // Drivers with identical edges to every rider are interchangeable.
    std::map<std::vector<double>, std::size_t> classes;
    class_.resize(cols_);
    for (std::size_t c = 0; c < cols_; ++c) {
      std::vector<double> sig;
      for (std::size_t r = 0; r < rows_; ++r) {
        const std::size_t e = cell_[r * cols_ + c];
        if (e == kNone) {
          sig.push_back(0.0);
          continue;
        }
        sig.insert(sig.end(), {1.0, keys_[e].a, keys_[e].b, keys_[e].c, edges[e].sigma});
      }
      class_[c] = classes.emplace(std::move(sig), classes.size()).first->second;
    }
  }

  /// Edge indices of the chosen matching.
  std::vector<std::size_t> solve() {
    std::vector<std::size_t> all(rows_);
    std::iota(all.begin(), all.end(), std::size_t{0});
    const std::vector<char> none(rows_, 0);
    std::vector<char> taken(cols_, 0);
    std::vector<int> pick(rows_, -1);
    const Rest root = best_rest(all, taken, none);
    if (!floor_ || sigma_of(pick, root) >= 0.0) {
      lex_first(all, taken, none, root, pick);
      return to_edges(pick);
    }

    best_key_ = Key{};
    best_pick_.assign(rows_, -1);
    if (separable_) {
      // Branch on which riders are matched, high zeta first.
      order_ = all;
      std::stable_sort(order_.begin(), order_.end(), [&](std::size_t x, std::size_t y) { return rider_zeta_[x] > rider_zeta_[y]; });
      std::vector<char> state(rows_, 0);
      choose_riders(0, state);
      // Several rider sets can reach the best key: take the first matching in row order that does.
      return to_edges(first_in_order(best_key_) ? result_ : best_pick_);
    }

    // General case: find the best feasible key, then the first matching reaching it.
    choose_multiplier();
    std::vector<int> start(rows_, -1);
    optimize(0, taken, start, Key{}, 0.0);
    const Key target = best_key_;
    found_ = false;
    std::vector<int> prefix(rows_, -1);
    first_reaching(0, taken, prefix, Key{}, 0.0, target);
    return to_edges(found_ ? result_ : best_pick_);
  }

  bool exhausted() const { return nodes_ <= budget_; }
  std::uint64_t nodes() const { return nodes_; }

 private:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  // An assignment of `rows` over the free columns.
  struct Rest {
    std::vector<std::size_t> rows;
    std::vector<std::size_t> cols;
    Assignment a;

    int column_of(std::size_t i) const { return a.pick[i] < 0 ? -1 : static_cast<int>(cols[a.pick[i]]); }
  };

  std::vector<std::size_t> free_columns(const std::vector<char>& taken) const {
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < cols_; ++c) {
      if (!taken[c]) out.push_back(c);
    }
    return out;
  }

  template <class Weight>
  Rest solve_rows(std::vector<std::size_t> rows, const std::vector<char>& taken, const std::vector<char>& forced,
                  const Weight& weight) const {
    Rest rest;
    rest.rows = std::move(rows);
    rest.cols = free_columns(taken);
    rest.a = max_weight_assignment(
        rest.rows.size(), rest.cols.size(),
        [&](std::size_t i, std::size_t j) -> std::optional<Key> {
          const std::size_t e = cell_[rest.rows[i] * cols_ + rest.cols[j]];
          if (e == kNone) return std::nullopt;
          return weight(e);
        },
        [&](std::size_t i) { return forced[rest.rows[i]] != 0; });
    return rest;
  }

  Rest best_rest(std::vector<std::size_t> rows, const std::vector<char>& taken, const std::vector<char>& forced) const {
    return solve_rows(std::move(rows), taken, forced, [&](std::size_t e) { return keys_[e]; });
  }

  std::vector<std::size_t> rows_from(std::size_t from) const {
    std::vector<std::size_t> rows(rows_ - from);
    std::iota(rows.begin(), rows.end(), from);
    return rows;
  }

  std::size_t edge_at(std::size_t row, int col) const {
    return col < 0 ? kNone : cell_[row * cols_ + static_cast<std::size_t>(col)];
  }

  std::vector<std::size_t> to_edges(const std::vector<int>& pick) const {
    std::vector<std::size_t> out;
    for (std::size_t r = 0; r < rows_; ++r) {
      if (pick[r] >= 0) out.push_back(edge_at(r, pick[r]));
    }
    return out;
  }

  // Welfare of `prefix` (rows outside rest.rows) plus rest's picks, summed in (d, r) order.
  double sigma_of(const std::vector<int>& prefix, const Rest& rest) const {
    std::vector<int> pick = prefix;
    for (std::size_t i = 0; i < rest.rows.size(); ++i) pick[rest.rows[i]] = rest.column_of(i);
    auto chosen = to_edges(pick);
    sort_pairs(edges_, chosen);
    return canonical_sigma(edges_, chosen);
  }

  void adopt(const std::vector<int>& prefix, const Rest& rest, const Key& key) {
    best_key_ = key;
    best_pick_ = prefix;
    for (std::size_t i = 0; i < rest.rows.size(); ++i) best_pick_[rest.rows[i]] = rest.column_of(i);
  }

  // Completes `rows` (ascending ids) with the first assignment in row order,
  // lowest column first and unmatched last, whose value equals rest's value.
  // Only options with zero reduced cost can belong to an optimal completion.
  void lex_first(const std::vector<std::size_t>& rows, std::vector<char> taken, const std::vector<char>& forced,
                 Rest rest, std::vector<int>& pick) {
    std::size_t base = 0;  // position in `rows` of rest's row 0
    Key target = rest.a.value;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const std::size_t r = rows[k];
      const std::size_t i = k - base;
      const int incumbent = rest.column_of(i);
      std::vector<int> order(options_[r].begin(), options_[r].end());
      if (!forced[r]) order.push_back(-1);
      int chosen = incumbent;
      for (int c : order) {
        if (c == incumbent) break;
        if (c >= 0 && taken[c]) continue;
        Key reduced;
        if (c < 0) {
          reduced = Key{} - rest.a.u[i] - rest.a.v_idle[i];
        } else {
          const auto j = static_cast<std::size_t>(
              std::lower_bound(rest.cols.begin(), rest.cols.end(), static_cast<std::size_t>(c)) - rest.cols.begin());
          reduced = (Key{} - keys_[edge_at(r, c)]) - rest.a.u[i] - rest.a.v[j];
        }
        if (!(reduced == Key{})) continue;
        std::vector<char> trial = taken;
        if (c >= 0) trial[c] = 1;
        ++nodes_;
        Rest next = best_rest(std::vector<std::size_t>(rows.begin() + static_cast<std::ptrdiff_t>(k) + 1, rows.end()),
                              trial, forced);
        const Key gain = c >= 0 ? keys_[edge_at(r, c)] : Key{};
        if (next.a.feasible && gain + next.a.value == target) {
          chosen = c;
          rest = std::move(next);
          base = k + 1;
          break;
        }
      }
      pick[r] = chosen;
      if (chosen >= 0) {
        taken[chosen] = 1;
        target = target - keys_[edge_at(r, chosen)];
      }
    }
  }

  // ---- separable zeta: choose the matched riders ----

  // state: 0 undecided, 1 must be matched, 2 left unmatched.
  void choose_riders(std::size_t k, std::vector<char>& state) {
    if (++nodes_ > budget_) return;
    std::vector<std::size_t> rows;
    std::vector<char> forced(rows_, 0);
    for (std::size_t r = 0; r < rows_; ++r) {
      if (state[r] != 2) rows.push_back(r);
      forced[r] = state[r] == 1 ? 1 : 0;
    }
    const std::vector<char> taken(cols_, 0);
    const std::vector<int> nobody(rows_, -1);

    // Highest-welfare completion: decides whether any feasible leaf exists.
    const Rest welfare = solve_rows(rows, taken, forced, [&](std::size_t e) { return Key{edges_[e].sigma, 0.0, 0.0}; });
    if (!welfare.a.feasible || sigma_of(nobody, welfare) < 0.0) return;
    Key welfare_key;
    for (std::size_t i = 0; i < welfare.rows.size(); ++i) {
      if (welfare.a.pick[i] >= 0) welfare_key = welfare_key + keys_[edge_at(welfare.rows[i], welfare.column_of(i))];
    }
    if (best_key_ < welfare_key) adopt(nobody, welfare, welfare_key);

    // Lexicographic optimum ignoring the floor: an upper bound, and the answer when feasible.
    const Rest best = best_rest(rows, taken, forced);
    if (!(best_key_ < best.a.value)) return;
    if (sigma_of(nobody, best) >= 0.0) {
      adopt(nobody, best, best.a.value);
      return;
    }
    if (k == order_.size()) return;
    const std::size_t r = order_[k];
    state[r] = 1;
    choose_riders(k + 1, state);
    state[r] = 2;
    choose_riders(k + 1, state);
    state[r] = 0;
  }

  // Whether rows from `from` on can complete `prefix` to a floor-feasible
  // matching whose key reaches `target`, deciding riders as choose_riders
  // does. On success `witness` holds that matching.
  bool riders_reach(std::size_t k, std::vector<char>& state, std::size_t from, const std::vector<char>& taken,
                    const std::vector<int>& prefix, const Key& partial, const Key& target, std::vector<int>& witness) {
    if (++nodes_ > budget_) return false;
    std::vector<std::size_t> rows;
    std::vector<char> forced(rows_, 0);
    for (std::size_t r = from; r < rows_; ++r) {
      if (state[r] != 2) rows.push_back(r);
      forced[r] = state[r] == 1 ? 1 : 0;
    }
    auto complete = [&](const Rest& rest) {
      witness = prefix;
      for (std::size_t i = 0; i < rest.rows.size(); ++i) witness[rest.rows[i]] = rest.column_of(i);
      return true;
    };
    const Rest welfare = solve_rows(rows, taken, forced, [&](std::size_t e) { return Key{edges_[e].sigma, 0.0, 0.0}; });
    if (!welfare.a.feasible || sigma_of(prefix, welfare) < 0.0) return false;
    Key welfare_key = partial;
    for (std::size_t i = 0; i < welfare.rows.size(); ++i) {
      if (welfare.a.pick[i] >= 0) welfare_key = welfare_key + keys_[edge_at(welfare.rows[i], welfare.column_of(i))];
    }
    if (!(welfare_key < target)) return complete(welfare);
    const Rest best = best_rest(rows, taken, forced);
    if (partial + best.a.value < target) return false;
    if (sigma_of(prefix, best) >= 0.0) return complete(best);
    while (k < order_.size() && order_[k] < from) ++k;
    if (k == order_.size()) return false;
    const std::size_t r = order_[k];
    bool ok = false;
    for (char s : {char{1}, char{2}}) {
      state[r] = s;
      if (riders_reach(k + 1, state, from, taken, prefix, partial, target, witness)) {
        ok = true;
        break;
      }
    }
    state[r] = 0;
    return ok;
  }

  // Rearranges rows from `from` on within the witness's rider set into the
  // first matching in row order with the same key.
  void refine(std::vector<int>& witness, std::size_t from, const std::vector<char>& taken) {
    std::vector<std::size_t> rows;
    std::vector<char> forced(rows_, 0);
    Key key;
    for (std::size_t r = from; r < rows_; ++r) {
      if (witness[r] < 0) continue;
      rows.push_back(r);
      forced[r] = 1;
      key = key + keys_[edge_at(r, witness[r])];
    }
    const Rest rest = best_rest(rows, taken, forced);
    if (!rest.a.feasible || !(rest.a.value == key)) return;
    std::vector<int> pick = witness;
    lex_first(rows, taken, forced, rest, pick);
    witness = std::move(pick);
  }

  // Fixes rows in order, each to its first option (lowest column, then
  // unmatched) that still lets the rest reach `target`; fills result_.
  // `witness` always holds a matching reaching target that agrees with the
  // fixed rows, so only options ahead of its choice need a search.
  bool first_in_order(const Key& target) {
    std::vector<char> taken(cols_, 0);
    const std::vector<char> none(rows_, 0);
    std::vector<int> witness = best_pick_;
    refine(witness, 0, taken);
    result_.assign(rows_, -1);
    Key partial;
    for (std::size_t row = 0; row < rows_; ++row) {
      std::vector<int> order(options_[row].begin(), options_[row].end());
      order.push_back(-1);
      std::vector<std::size_t> tried;
      for (int c : order) {
        if (c >= 0 && taken[c]) continue;
        if (c >= 0 && !first_of_class(tried, static_cast<std::size_t>(c))) continue;
        const Key with = c >= 0 ? partial + keys_[edge_at(row, c)] : partial;
        result_[row] = c;
        if (c >= 0) taken[c] = 1;
        if (c == witness[row]) {
          partial = with;
          break;
        }
        const Rest rest = best_rest(rows_from(row + 1), taken, none);
        if (!(with + rest.a.value < target)) {
          if (sigma_of(result_, rest) >= 0.0) {
            lex_first(rows_from(row + 1), taken, none, rest, result_);
            return true;
          }
          std::vector<char> state(rows_, 0);
          if (riders_reach(0, state, row + 1, taken, result_, with, target, witness)) {
            refine(witness, row + 1, taken);
            partial = with;
            break;
          }
        }
        if (c >= 0) taken[c] = 0;
        result_[row] = -1;
        if (nodes_ > budget_) return false;
      }
    }
    return true;
  }

  // ---- general zeta: branch on each row's driver ----

  // max over completions of rows [from, rows_) of sum (wz zeta + ws sigma).
  double lagrangian_rest(std::size_t from, const std::vector<char>& taken, double wz, double ws) const {
    const std::vector<char> none(rows_, 0);
    return solve_rows(rows_from(from), taken, none,
                      [&](std::size_t e) { return Key{wz * keys_[e].a + ws * edges_[e].sigma, 0.0, 0.0}; })
        .a.value.a;
  }

  // Totals (zeta, sigma) of a maximizer of sum (wz zeta + ws sigma) over all rows.
  std::pair<double, double> lagrangian_argmax(double wz, double ws) const {
    const std::vector<char> none(rows_, 0);
    const std::vector<char> taken(cols_, 0);
    const Rest rest = solve_rows(rows_from(0), taken, none,
                                 [&](std::size_t e) { return Key{wz * keys_[e].a + ws * edges_[e].sigma, 0.0, 0.0}; });
    double z = 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < rest.rows.size(); ++i) {
      const std::size_t e = edge_at(rest.rows[i], rest.column_of(i));
      if (e == kNone) continue;
      z += keys_[e].a;
      s += edges_[e].sigma;
    }
    return {z, s};
  }

  // mu for the bound  sum zeta <= max sum (zeta + mu sigma)  on matchings with sum sigma >= 0.
  void choose_multiplier() {
    auto sigma_at = [&](double mu) { return lagrangian_argmax(1.0, mu).second; };
    double lo = 0.0;
    double hi = 1.0;
    while (sigma_at(hi) < 0.0 && hi < 1e6) {
      lo = hi;
      hi *= 4.0;
    }
    for (int it = 0; it < 20; ++it) {
      const double mid = 0.5 * (lo + hi);
      (sigma_at(mid) < 0.0 ? lo : hi) = mid;
    }
    mu_ = hi;
  }

  // nu for the bound  sum sigma <= max sum (sigma + nu zeta) - nu A  on matchings with sum zeta >= A.
  double multiplier_for(double A) {
    if (const auto it = nu_cache_.find(A); it != nu_cache_.end()) return it->second;
    auto zeta_at = [&](double nu) { return lagrangian_argmax(nu, 1.0).first; };
    double nu = 0.0;
    if (zeta_at(0.0) < A) {
      double lo = 0.0;
      double hi = 1.0;
      while (zeta_at(hi) < A && hi < 1e6) {
        lo = hi;
        hi *= 4.0;
      }
      for (int it = 0; it < 20; ++it) {
        const double mid = 0.5 * (lo + hi);
        (zeta_at(mid) < A ? lo : hi) = mid;
      }
      nu = hi;
    }
    nu_cache_.emplace(A, nu);
    return nu;
  }

  // Largest welfare the rows from `from` on could still add.
  double sigma_headroom(std::size_t from, const std::vector<char>& taken) const {
    double s = 0.0;
    for (std::size_t r = from; r < rows_; ++r) {
      double best = 0.0;
      for (std::size_t c : options_[r]) {
        if (!taken[c]) best = std::max(best, edges_[edge_at(r, static_cast<int>(c))].sigma);
      }
      s += best;
    }
    return s;
  }

  // True when no floor-feasible completion can have a key above `bar`
  // (or reach it, when `bar` is known to be the optimum). Ties within
  // tolerance are never cut.
  bool cannot_reach(std::size_t from, const std::vector<char>& taken, Key partial, double sigma, const Key& bar,
                    bool bar_is_optimal) {
    if (sigma + sigma_headroom(from, taken) < -1e-9) return true;
    const double zeta_ub = partial.a + mu_ * sigma + lagrangian_rest(from, taken, 1.0, mu_);
    if (zeta_ub < bar.a - 1e-9) return true;
    if (!bar_is_optimal && zeta_ub > bar.a + 1e-9) return false;
    // Only completions tying bar on zeta remain; bound their welfare.
    const double nu = multiplier_for(bar.a);
    const double sigma_ub = sigma + nu * (partial.a - bar.a) + lagrangian_rest(from, taken, nu, 1.0);
    return sigma_ub < bar.b - 1e-9;
  }

  // Interchangeable free drivers give isomorphic subtrees; only the first is searched.
  bool first_of_class(std::vector<std::size_t>& tried, std::size_t c) const {
    if (std::find(tried.begin(), tried.end(), class_[c]) != tried.end()) return false;
    tried.push_back(class_[c]);
    return true;
  }

  std::vector<int> options_by_key(std::size_t r) const {
    std::vector<int> order(options_[r].begin(), options_[r].end());
    std::stable_sort(order.begin(), order.end(),
                     [&](int x, int y) { return keys_[edge_at(r, y)] < keys_[edge_at(r, x)]; });
    order.push_back(-1);
    return order;
  }

  void optimize(std::size_t row, std::vector<char>& taken, std::vector<int>& prefix, Key partial, double sigma) {
    if (++nodes_ > budget_) return;
    const std::vector<char> none(rows_, 0);
    const Rest rest = best_rest(rows_from(row), taken, none);
    if (!(best_key_ < partial + rest.a.value)) return;
    if (sigma_of(prefix, rest) >= 0.0) {
      adopt(prefix, rest, partial + rest.a.value);
      return;
    }
    if (row == rows_ || cannot_reach(row, taken, partial, sigma, best_key_, false)) return;
    std::vector<std::size_t> tried;
    for (int c : options_by_key(row)) {
      if (c >= 0 && taken[c]) continue;
      if (c >= 0 && !first_of_class(tried, static_cast<std::size_t>(c))) continue;
      const std::size_t e = edge_at(row, c);
      prefix[row] = c;
      if (c >= 0) taken[c] = 1;
      optimize(row + 1, taken, prefix, c >= 0 ? partial + keys_[e] : partial, c >= 0 ? sigma + edges_[e].sigma : sigma);
      if (c >= 0) taken[c] = 0;
      prefix[row] = -1;
    }
  }

  void first_reaching(std::size_t row, std::vector<char>& taken, std::vector<int>& prefix, Key partial, double sigma,
                      const Key& target) {
    if (found_ || ++nodes_ > budget_) return;
    const std::vector<char> none(rows_, 0);
    const Rest rest = best_rest(rows_from(row), taken, none);
    const Key total = partial + rest.a.value;
    if (total < target) return;
    if (total == target && sigma_of(prefix, rest) >= 0.0) {
      result_ = prefix;
      lex_first(rows_from(row), taken, none, rest, result_);
      found_ = true;
      return;
    }
    if (row == rows_ || cannot_reach(row, taken, partial, sigma, target, true)) return;
    std::vector<int> order(options_[row].begin(), options_[row].end());
    order.push_back(-1);
    std::vector<std::size_t> tried;
    for (int c : order) {
      if (c >= 0 && taken[c]) continue;
      if (c >= 0 && !first_of_class(tried, static_cast<std::size_t>(c))) continue;
      const std::size_t e = edge_at(row, c);
      prefix[row] = c;
      if (c >= 0) taken[c] = 1;
      first_reaching(row + 1, taken, prefix, c >= 0 ? partial + keys_[e] : partial,
                     c >= 0 ? sigma + edges_[e].sigma : sigma, target);
      if (c >= 0) taken[c] = 0;
      prefix[row] = -1;
      if (found_) return;
    }
  }

  const std::vector<CandidateEdge>& edges_;
  bool floor_;
  std::uint64_t budget_;
  std::uint64_t nodes_ = 0;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> cell_;
  std::vector<std::vector<std::size_t>> options_;
  std::vector<Key> keys_;
  std::vector<std::size_t> class_;
  bool separable_ = false;
  std::vector<double> rider_zeta_;
  std::vector<std::size_t> order_;
  double mu_ = 0.0;
  std::map<double, double> nu_cache_;
  Key best_key_;
  std::vector<int> best_pick_;
  bool found_ = false;
  std::vector<int> result_;
};

// Connected components of the bipartite graph spanned by `subset`.
inline std::vector<std::vector<std::size_t>> components(const std::vector<CandidateEdge>& edges,
                                                        std::span<const std::size_t> subset) {
  std::map<DriverId, std::size_t> dnode;
  std::map<RiderId, std::size_t> rnode;
  for (std::size_t e : subset) {
    dnode.emplace(edges[e].driver, 0);
    rnode.emplace(edges[e].rider, 0);
  }
  std::size_t k = 0;
  for (auto& [id, idx] : dnode) idx = k++;
  for (auto& [id, idx] : rnode) idx = k++;
  std::vector<std::size_t> parent(k);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t e : subset) {
    const auto a = find(dnode[edges[e].driver]);
    const auto b = find(rnode[edges[e].rider]);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t e : subset) groups[find(dnode[edges[e].driver])].push_back(e);
  std::vector<std::vector<std::size_t>> out;
  out.reserve(groups.size());
  for (auto& [root, members] : groups) out.push_back(std::move(members));
  return out;
}

inline MatchingSolution finish(const MatchingProblem& problem, std::vector<std::size_t> chosen, bool optimal) {
  sort_pairs(problem.edges, chosen);
  MatchingSolution s;
  s.chosen = std::move(chosen);
  for (std::size_t i : s.chosen) {
    s.welfare_total += problem.edges[i].sigma;
    s.sensing_total += problem.edges[i].zeta;
    s.pickup_total += problem.edges[i].tau;
  }
  s.objective_value = problem.objective == Objective::welfare ? s.welfare_total : s.sensing_total;
  s.optimal = optimal;
  return s;
}

inline MatchingSolution solve(const MatchingProblem& problem, std::uint64_t node_budget) {
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < problem.edges.size(); ++i) {
    // Negative-welfare edges can only lower an unconstrained welfare maximum.
    if (problem.objective == Objective::welfare && problem.edges[i].sigma < 0.0) continue;
    usable.push_back(i);
  }
  const bool floor = problem.welfare_floor && problem.objective == Objective::sensing;

  bool optimal = true;
  std::vector<std::size_t> chosen;
  for (const auto& comp : components(problem.edges, usable)) {
    SubsetSolver solver(problem.edges, comp, problem.objective, false, node_budget);
    const auto part = solver.solve();
    optimal = optimal && solver.exhausted();
    chosen.insert(chosen.end(), part.begin(), part.end());
  }
  sort_pairs(problem.edges, chosen);
  if (floor && canonical_sigma(problem.edges, chosen) < 0.0) {
    // The floor binds: the components now compete for welfare.
    SubsetSolver solver(problem.edges, usable, problem.objective, true, node_budget);
    chosen = solver.solve();
    optimal = solver.exhausted();
  }
  return finish(problem, std::move(chosen), optimal);
}

}  // namespace detail

/// Maximum-welfare one-to-one matching (the VCG allocation).
inline MatchingSolution solve_welfare_max(const MatchingProblem& problem,
                                          std::uint64_t node_budget = detail::kDefaultNodeBudget) {
  if (problem.objective != Objective::welfare) throw ContractViolation("problem objective is not welfare");
  return detail::solve(problem, node_budget);
}

/// Maximum-sensing one-to-one matching under the welfare floor (the DS allocation).
inline MatchingSolution solve_sensing_max(const MatchingProblem& problem,
                                          std::uint64_t node_budget = detail::kDefaultNodeBudget) {
  if (problem.objective != Objective::sensing) throw ContractViolation("problem objective is not sensing");
  return detail::solve(problem, node_budget);
}

inline MatchingSolution solve_matching(const MatchingProblem& problem,
                                       std::uint64_t node_budget = detail::kDefaultNodeBudget) {
  return detail::solve(problem, node_budget);
}

/// The same program with every edge incident to one participant removed.
inline MatchingProblem without(const MatchingProblem& problem, DriverId d) {
  MatchingProblem p = problem;
  std::erase_if(p.edges, [d](const CandidateEdge& e) { return e.driver == d; });
  std::erase(p.drivers, d);
  return p;
}

inline MatchingProblem without(const MatchingProblem& problem, RiderId r) {
  MatchingProblem p = problem;
  std::erase_if(p.edges, [r](const CandidateEdge& e) { return e.rider == r; });
  std::erase(p.riders, r);
  return p;
}

template <class ParticipantId>
double marginal_objective(const MatchingProblem& problem, ParticipantId who) {
  const bool known = [&] {
    if constexpr (std::is_same_v<ParticipantId, DriverId>) {
      return std::find(problem.drivers.begin(), problem.drivers.end(), who) != problem.drivers.end();
    } else {
      return std::find(problem.riders.begin(), problem.riders.end(), who) != problem.riders.end();
    }
  }();
  if (!known) throw ContractViolation("participant is not part of the problem");
  return solve_matching(without(problem, who)).objective_value;
}

/// Optimal objective with each matched participant removed (V_{x-} or U*_{x-}).
struct Marginals {
  std::map<DriverId, double> without_driver;
  std::map<RiderId, double> without_rider;
};

/// One re-solve per matched participant; `jobs > 1` runs them concurrently.
inline Marginals compute_marginals(const MatchingProblem& problem, const MatchingSolution& solution,
                                   unsigned jobs = 1) {
  Marginals m;
  if (jobs <= 1) {
    for (std::size_t i : solution.chosen) {
      const auto& e = problem.edges[i];
      m.without_driver[e.driver] = marginal_objective(problem, e.driver);
      m.without_rider[e.rider] = marginal_objective(problem, e.rider);
    }
    return m;
  }
  std::vector<std::future<double>> drivers;
  std::vector<std::future<double>> riders;
  for (std::size_t i : solution.chosen) {
    const auto& e = problem.edges[i];
    drivers.push_back(std::async(std::launch::async, [&problem, d = e.driver] { return marginal_objective(problem, d); }));
    riders.push_back(std::async(std::launch::async, [&problem, r = e.rider] { return marginal_objective(problem, r); }));
  }
  for (std::size_t k = 0; k < solution.chosen.size(); ++k) {
    const auto& e = problem.edges[solution.chosen[k]];
    m.without_driver[e.driver] = drivers[k].get();
    m.without_rider[e.rider] = riders[k].get();
  }
  return m;
}

}  // namespace senseauction
