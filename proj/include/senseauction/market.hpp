#pragma once

// Participants, their valuations of a candidate trip, and utility accounting.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <string>

#include "senseauction/error.hpp"
#include "senseauction/gridworld.hpp"

namespace senseauction {

template <class Tag>
struct Id {
  std::uint32_t value = 0;
  friend auto operator<=>(const Id&, const Id&) = default;
};

using DriverId = Id<struct DriverTag>;
using RiderId = Id<struct RiderTag>;

/// Public per-km monetary values: alpha for drivers, beta for riders.
struct Rates {
  double alpha = 1.5;
  double beta = 2.75;

  void validate() const {
    if (!(alpha > 0.0) || !(beta > alpha) || !std::isfinite(beta)) {
      throw ConfigError("rates must satisfy beta > alpha > 0");
    }
  }
};

enum class DriverStatus { vacant, pickup, in_service };

struct RiderRequest {
  RiderId id;
  Point origin;
  Point dest;
  CellRoute route;
  double delta_true = 1.0;      // CNY per km of extra pick-up
  double delta_reported = 1.0;  // what the platform sees
  std::size_t epoch = 0;

  double trip_km() const { return route.length; }
};

struct DriverState {
  DriverId id;
  Point location;
  DriverStatus status = DriverStatus::vacant;
  double b_true = 1.0;      // CNY per km of extra pick-up
  double b_reported = 1.0;
  double speed_kmh = 35.0;
};

/// Pick-up distance of a match and the participant's nearest-counterpart distance.
struct PickupGap {
  double tau = 0.0;
  double tau_min = 0.0;

  double extra() const {
    if (tau < tau_min - 1e-12) throw ContractViolation("pick-up distance below the nearest-counterpart minimum");
    return std::max(0.0, tau - tau_min);
  }
};

/// P_d = alpha h + b (tau - tau_min_d) + f.
inline double driver_valuation(const Rates& rates, double trip_km, double cost_rate, PickupGap gap,
                               double opportunity_cost) {
  return rates.alpha * trip_km + cost_rate * gap.extra() + opportunity_cost;
}

/// P_r = beta h - delta (tau - tau_min_r).
inline double rider_valuation(const Rates& rates, double trip_km, double compensation_rate, PickupGap gap) {
  return rates.beta * trip_km - compensation_rate * gap.extra();
}

inline double social_welfare(double rider_value, double driver_value) { return rider_value - driver_value; }

struct Quote {
  double P_d = 0.0;
  double P_r = 0.0;
  double sigma = 0.0;
};

inline Quote make_quote(double rider_value, double driver_value) {
  return {driver_value, rider_value, social_welfare(rider_value, driver_value)};
}

struct Utilities {
  double driver = 0.0;
  double rider = 0.0;
};

/// u_d = q_d - P_d and u_r = P_r - q_r for a matched pair.
inline Utilities participant_utilities(double payment, double charge, double driver_value, double rider_value) {
  return {payment - driver_value, rider_value - charge};
}

}  // namespace senseauction
