#pragma once

// Count-based sensing utility: per-cell quality N^lambda, the weighted
// aggregate over cells and intervals, and the marginal gain of one more trip.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "senseauction/error.hpp"
#include "senseauction/gridworld.hpp"
#include "senseauction/market.hpp"

namespace senseauction {

struct SensingParams {
  double exponent = 0.2;
  std::vector<double> temporal_weights;  // mu_t, one per sensing interval
  std::vector<double> spatial_weights;   // w_g, one per cell

  static SensingParams uniform(std::size_t cells, std::size_t intervals, double exponent = 0.2) {
    SensingParams p;
    p.exponent = exponent;
    p.temporal_weights.assign(intervals, 1.0 / static_cast<double>(intervals));
    p.spatial_weights.assign(cells, 1.0 / static_cast<double>(cells));
    return p;
  }

  void validate() const {
    if (!(exponent > 0.0 && exponent < 1.0)) throw ConfigError("sensing exponent must lie in (0, 1)");
    auto check = [](const std::vector<double>& w, const char* what) {
      if (w.empty()) throw ConfigError(std::string(what) + " weights are empty");
      for (double v : w) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(std::string(what) + " weights must be non-negative");
      }
      const double sum = std::accumulate(w.begin(), w.end(), 0.0);
      if (std::abs(sum - 1.0) > 1e-9) throw ConfigError(std::string(what) + " weights must sum to 1");
    };
    check(temporal_weights, "temporal");
    check(spatial_weights, "spatial");
  }
};

/// Per-(interval, cell) visit counts N_{g,t}. Single writer.
class CoverageState {
 public:
  CoverageState(std::size_t cells, std::size_t intervals, bool distinct_vehicles = false)
      : cells_(cells), intervals_(intervals), distinct_vehicles_(distinct_vehicles), counts_(cells * intervals, 0) {
    if (cells == 0 || intervals == 0) throw ConfigError("coverage needs at least one cell and one interval");
  }

  std::size_t cells() const { return cells_; }
  std::size_t intervals() const { return intervals_; }
  std::size_t current_interval() const { return current_interval_; }
  std::size_t current_epoch() const { return current_epoch_; }
  bool distinct_vehicles() const { return distinct_vehicles_; }

  std::uint32_t count(CellId g, std::size_t interval) const { return counts_.at(interval * cells_ + g); }
  std::uint32_t count(CellId g) const { return count(g, current_interval_); }

  std::span<const std::uint32_t> interval_counts(std::size_t interval) const {
    if (interval >= intervals_) throw ContractViolation("interval out of range");
    return std::span<const std::uint32_t>(counts_).subspan(interval * cells_, cells_);
  }

  void advance_epoch() { ++current_epoch_; }

  /// Moves to the next sensing interval; its counts start from zero.
  void advance_interval() {
    if (current_interval_ + 1 >= intervals_) throw ContractViolation("no sensing interval left");
    ++current_interval_;
    current_epoch_ = 0;
    visited_.clear();
  }

  /// Adds one visit to each route cell in `interval` (must be the current one).
  /// In distinct-vehicle mode a vehicle counts at most once per cell and interval.
  void commit_route(std::span<const CellId> route_cells, std::size_t interval,
                    std::optional<DriverId> vehicle = std::nullopt) {
    if (interval != current_interval_) throw ContractViolation("coverage commits must target the current interval");
    for (CellId g : route_cells) {
      if (g >= cells_) throw ContractViolation("route cell out of range");
      if (distinct_vehicles_ && vehicle) {
        if (!visited_.emplace(g, vehicle->value).second) continue;
      }
      ++counts_[interval * cells_ + g];
    }
  }

 private:
  std::size_t cells_;
  std::size_t intervals_;
  bool distinct_vehicles_;
  std::vector<std::uint32_t> counts_;
  std::size_t current_interval_ = 0;
  std::size_t current_epoch_ = 0;
  std::set<std::pair<CellId, std::uint32_t>> visited_;
};

/// phi(N) = N^lambda, with phi(0) = 0.
inline double sensing_quality(const SensingParams& params, std::uint32_t n) {
  return n == 0 ? 0.0 : std::pow(static_cast<double>(n), params.exponent);
}

/// Spatially weighted quality of one interval, sum_g w_g phi(N_{g,t}).
inline double interval_sensing_utility(const SensingParams& params, const CoverageState& state, std::size_t interval) {
  if (params.spatial_weights.size() != state.cells()) throw ConfigError("spatial weights do not match the grid");
  const auto counts = state.interval_counts(interval);
  double total = 0.0;
  for (std::size_t g = 0; g < counts.size(); ++g) total += params.spatial_weights[g] * sensing_quality(params, counts[g]);
  return total;
}

/// Phi = sum_t mu_t sum_g w_g phi(N_{g,t}).
inline double total_sensing_utility(const SensingParams& params, const CoverageState& state) {
  if (params.temporal_weights.size() != state.intervals()) throw ConfigError("temporal weights do not match the horizon");
  if (params.spatial_weights.size() != state.cells()) throw ConfigError("spatial weights do not match the grid");
  double total = 0.0;
  for (std::size_t t = 0; t < state.intervals(); ++t) {
    total += params.temporal_weights[t] * interval_sensing_utility(params, state, t);
  }
  return total;
}

/// zeta = sum over route cells of (N+1)^lambda - N^lambda at interval-to-date counts.
/// Unweighted: the spatial and temporal weights only enter Phi.
inline double marginal_gain(const SensingParams& params, const CoverageState& state, std::span<const CellId> route_cells) {
  double zeta = 0.0;
  for (CellId g : route_cells) {
    const auto n = state.count(g);
    zeta += sensing_quality(params, n + 1) - sensing_quality(params, n);
  }
  return zeta;
}

/// Fraction of cells visited at least once in `interval`.
inline double coverage_fraction(const CoverageState& state, std::size_t interval) {
  const auto counts = state.interval_counts(interval);
  std::size_t covered = 0;
  for (auto n : counts) covered += n > 0 ? 1 : 0;
  return static_cast<double>(covered) / static_cast<double>(counts.size());
}

/// CSV snapshot: interval,cell,count for every (interval, cell).
inline void write_coverage_csv(std::ostream& os, const CoverageState& state) {
  os << "interval,cell,count\n";
  for (std::size_t t = 0; t < state.intervals(); ++t) {
    const auto counts = state.interval_counts(t);
    for (std::size_t g = 0; g < counts.size(); ++g) os << t << ',' << g << ',' << counts[g] << '\n';
  }
}

}  // namespace senseauction
