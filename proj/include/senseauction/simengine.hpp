#pragma once

// Epoch-driven fleet simulation: synthetic demand, vacant-taxi repositioning,
// bid reporting, per-epoch matching and pricing, coverage and KPI accounting.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iterator>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "senseauction/assignment.hpp"
#include "senseauction/error.hpp"
#include "senseauction/gridworld.hpp"
#include "senseauction/market.hpp"
#include "senseauction/pricing.hpp"
#include "senseauction/sensing.hpp"

namespace senseauction {

struct WorldSpec {
  std::size_t rows = 10;
  std::size_t cols = 10;
  double cell_size_km = 1.0;
  std::optional<std::vector<double>> densities;  // row-major, row 0 south; synthetic when absent
  double xi = 50.0;
  double p_star_frac = 0.9;
};

struct OverreportConfig {
  double fraction = 0.0;
  double magnitude_low = 0.0;
  double magnitude_high = 0.5;
};

struct ScenarioConfig {
  WorldSpec world;
  std::size_t fleet_size = 40;
  std::size_t intervals = 4;
  std::size_t epochs_per_interval = 18;
  double interval_minutes = 60.0;
  double speed_kmh = 35.0;
  double radius_km = 2.0;
  Rates rates;
  double bid_low = 1.0;
  double bid_high = 2.0;
  OverreportConfig overreport;
  int scenario = 1;
  std::vector<double> remote_fractions{0.05, 0.15, 0.30};
  double requests_per_hour = 144.0;
  std::uint64_t seed = 1;
  double reposition_radius_km = 3.0;
  std::size_t rider_patience_epochs = 2;
  double sensing_exponent = 0.2;
  bool charge_floor = true;
  bool distinct_vehicles = false;

  double epoch_hours() const { return interval_minutes / 60.0 / static_cast<double>(epochs_per_interval); }
  std::size_t total_epochs() const { return intervals * epochs_per_interval; }

  double remote_fraction() const {
    if (scenario < 1 || static_cast<std::size_t>(scenario) > remote_fractions.size()) {
      throw ConfigError("unknown demand scenario " + std::to_string(scenario));
    }
    return remote_fractions[static_cast<std::size_t>(scenario - 1)];
  }

  void validate() const {
    if (world.rows == 0 || world.cols == 0 || !(world.cell_size_km > 0.0)) throw ConfigError("world must be non-empty");
    if (intervals == 0 || epochs_per_interval == 0) throw ConfigError("horizon must be positive");
    if (!(interval_minutes > 0.0) || !(speed_kmh > 0.0) || !(radius_km > 0.0)) {
      throw ConfigError("interval length, speed and radius must be positive");
    }
    if (!(reposition_radius_km >= 0.0)) throw ConfigError("reposition radius must be non-negative");
    rates.validate();
    if (!(bid_low > 0.0) || !(bid_high >= bid_low)) throw ConfigError("bid bounds must satisfy 0 < low <= high");
    if (!(overreport.fraction >= 0.0 && overreport.fraction <= 1.0)) {
      throw ConfigError("over-report fraction must lie in [0, 1]");
    }
    if (!(overreport.magnitude_low >= 0.0) || !(overreport.magnitude_high >= overreport.magnitude_low)) {
      throw ConfigError("over-report magnitude bounds must satisfy 0 <= low <= high");
    }
    const double remote = remote_fraction();
    if (!(remote >= 0.0 && remote <= 1.0)) throw ConfigError("remote fraction must lie in [0, 1]");
    if (!(requests_per_hour >= 0.0) || !std::isfinite(requests_per_hour)) {
      throw ConfigError("requests per hour must be non-negative");
    }
    if (rider_patience_epochs == 0) throw ConfigError("rider patience must be at least one epoch");
    if (!(sensing_exponent > 0.0 && sensing_exponent < 1.0)) throw ConfigError("sensing exponent must lie in (0, 1)");
  }
};

/// Hotspot-shaped synthetic density: a main cluster east of center, a
/// smaller one to the west, a thin northern fringe and a small floor.
inline std::vector<double> synthetic_densities(std::size_t rows, std::size_t cols) {
  std::vector<double> n(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double u = (static_cast<double>(c) + 0.5) / static_cast<double>(cols);
      const double v = (static_cast<double>(r) + 0.5) / static_cast<double>(rows);
      auto bump = [&](double cu, double cv, double s) {
        return std::exp(-((u - cu) * (u - cu) + (v - cv) * (v - cv)) / (2.0 * s * s));
      };
      double d = 0.02 + bump(0.65, 0.4, 0.15) + 0.45 * bump(0.3, 0.55, 0.1);
      if (v > 0.8) d *= 0.3;
      n[r * cols + c] = d;
    }
  }
  return n;
}

inline GridWorld make_world(const WorldSpec& spec) {
  return build_grid(spec.rows, spec.cols, spec.cell_size_km,
                    spec.densities ? *spec.densities : synthetic_densities(spec.rows, spec.cols));
}

// ---- random streams -------------------------------------------------------

namespace rng_tag {
inline constexpr std::uint64_t fleet = 1;
inline constexpr std::uint64_t driver_bids = 2;
inline constexpr std::uint64_t driver_reports = 3;
inline constexpr std::uint64_t demand = 4;
inline constexpr std::uint64_t rider_reports = 5;
}  // namespace rng_tag

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent generator for (seed, purpose, index).
inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ splitmix64((tag << 48) ^ index)));
}

// ---- reporting ------------------------------------------------------------

/// Every participant draws a Bernoulli(fraction) flag and an epsilon, so the
/// over-reporting set only grows with the fraction under a fixed stream.
inline std::vector<double> apply_reporting(std::span<const double> truthful, const OverreportConfig& cfg,
                                           std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> eps(cfg.magnitude_low, cfg.magnitude_high);
  std::vector<double> reported(truthful.begin(), truthful.end());
  for (double& r : reported) {
    const double u = unit(rng);
    const double e = eps(rng);
    if (u < cfg.fraction) r += e;
  }
  return reported;
}

// ---- demand -----------------------------------------------------------------

/// Sampling tables for origins and destinations.
class DemandModel {
 public:
  DemandModel(const GridWorld& world, const ProspectModel& prospect, double remote_fraction, double mean_per_epoch)
      : world_(&world), remote_fraction_(remote_fraction), mean_(mean_per_epoch) {
    const auto dens = world.densities();
    cumulative_.resize(dens.size());
    double acc = 0.0;
    for (std::size_t g = 0; g < dens.size(); ++g) cumulative_[g] = acc += dens[g];
    std::vector<CellId> cells(world.cell_count());
    for (CellId g = 0; g < cells.size(); ++g) cells[g] = g;
    std::stable_sort(cells.begin(), cells.end(),
                     [&](CellId a, CellId b) { return prospect.field[a] < prospect.field[b]; });
    const std::size_t quartile = std::max<std::size_t>(1, (cells.size() + 3) / 4);
    remote_cells_.assign(cells.begin(), cells.begin() + static_cast<std::ptrdiff_t>(quartile));
    std::sort(remote_cells_.begin(), remote_cells_.end());
  }

  /// Bottom quartile of the prospect field (at least one cell).
  const std::vector<CellId>& remote_cells() const { return remote_cells_; }
  bool is_remote(CellId g) const { return std::binary_search(remote_cells_.begin(), remote_cells_.end(), g); }

  std::size_t draw_count(std::mt19937_64& rng) const {
    if (mean_ <= 0.0) return 0;
    std::poisson_distribution<std::size_t> n(mean_);
    return n(rng);
  }

  CellId draw_density_cell(std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> unit(0.0, cumulative_.back());
    const double u = unit(rng);
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return std::min<CellId>(static_cast<CellId>(it - cumulative_.begin()), cumulative_.size() - 1);
  }

  CellId draw_destination_cell(std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (unit(rng) < remote_fraction_) {
      std::uniform_int_distribution<std::size_t> pick(0, remote_cells_.size() - 1);
      return remote_cells_[pick(rng)];
    }
    return draw_density_cell(rng);
  }

  Point draw_point_in(CellId g, std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double cs = world_->cell_size();
    const double x0 = static_cast<double>(world_->col_of(g)) * cs;
    const double y0 = static_cast<double>(world_->row_of(g)) * cs;
    const double ux = unit(rng);
    const double uy = unit(rng);
    return {x0 + ux * cs, y0 + uy * cs};
  }

 private:
  const GridWorld* world_;
  double remote_fraction_;
  double mean_;
  std::vector<double> cumulative_;
  std::vector<CellId> remote_cells_;
};

/// New requests of one epoch. Ids continue from `next_id`.
inline std::vector<RiderRequest> generate_demand(const ScenarioConfig& config, const GridWorld& world,
                                                 const DemandModel& demand, std::size_t epoch, std::uint32_t next_id) {
  auto rng = substream(config.seed, rng_tag::demand, epoch);
  auto report_rng = substream(config.seed, rng_tag::rider_reports, epoch);
  std::uniform_real_distribution<double> bid(config.bid_low, config.bid_high);
  const std::size_t count = demand.draw_count(rng);
  std::vector<RiderRequest> out;
  out.reserve(count);
  std::vector<double> truthful;
  for (std::size_t k = 0; k < count; ++k) {
    RiderRequest r;
    r.id = RiderId{next_id++};
    r.origin = demand.draw_point_in(demand.draw_density_cell(rng), rng);
    r.dest = demand.draw_point_in(demand.draw_destination_cell(rng), rng);
    r.route = route(world, r.origin, r.dest);
    r.delta_true = bid(rng);
    r.epoch = epoch;
    truthful.push_back(r.delta_true);
    out.push_back(std::move(r));
  }
  const auto reported = apply_reporting(truthful, config.overreport, report_rng);
  for (std::size_t k = 0; k < count; ++k) out[k].delta_reported = reported[k];
  return out;
}

// ---- fleet ------------------------------------------------------------------

/// Target of a vacant driver: the highest-prospect cell whose centroid lies
/// within `radius_km` (ties: nearest centroid, then lower id). The driver's
/// own cell is always a candidate.
inline CellId reposition_target(const GridWorld& world, const ProspectModel& prospect, Point at, double radius_km) {
  const CellId here = world.cell_of(at);
  CellId best = here;
  double best_p = prospect.field[here];
  double best_dist = distance(at, world.centroid(here));
  for (CellId g = 0; g < world.cell_count(); ++g) {
    const double dist = distance(at, world.centroid(g));
    if (g != here && dist > radius_km) continue;
    const double p = prospect.field[g];
    const bool better = p > best_p + 1e-12 ||
                        (std::abs(p - best_p) <= 1e-12 && (dist < best_dist - 1e-12 ||
                                                           (std::abs(dist - best_dist) <= 1e-12 && g < best)));
    if (better) {
      best = g;
      best_p = p;
      best_dist = dist;
    }
  }
  return best;
}

/// Moves `at` toward the target centroid by at most `max_km`; a driver whose
/// own cell is the target stays put.
inline Point reposition_point(const GridWorld& world, const ProspectModel& prospect, Point at, double radius_km,
                              double max_km) {
  const CellId target = reposition_target(world, prospect, at, radius_km);
  if (target == world.cell_of(at)) return at;
  const Point c = world.centroid(target);
  const double dist = distance(at, c);
  if (dist <= max_km) return c;
  const double s = max_km / dist;
  return {at.x + (c.x - at.x) * s, at.y + (c.y - at.y) * s};
}

/// Repositions every vacant driver for `dt_hours` at its speed.
inline void reposition_vacant(std::span<DriverState> fleet, const GridWorld& world, const ProspectModel& prospect,
                              double radius_km, double dt_hours) {
  for (auto& d : fleet) {
    if (d.status != DriverStatus::vacant) continue;
    d.location = reposition_point(world, prospect, d.location, radius_km, d.speed_kmh * dt_hours);
  }
}

// ---- KPIs -------------------------------------------------------------------

struct KpiRow {
  std::string label;  // interval index or "all"
  double matching_rate = 0.0;
  double avg_wait_min = 0.0;
  double sensing_utility = 0.0;
  double coverage_rate = 0.0;
  double revenue = 0.0;
  double avg_u_driver = 0.0;
  double avg_u_rider = 0.0;
  std::size_t requests = 0;
  std::size_t matches = 0;
  std::size_t high_zeta = 0;
};

struct KpiReport {
  Mechanism mechanism = Mechanism::vcg;
  int scenario = 1;
  std::size_t fleet_size = 0;
  std::uint64_t seed = 0;
  std::vector<KpiRow> intervals;
  KpiRow aggregate;
};

inline constexpr double kHighZeta = 0.5;

inline const char* kpi_csv_header() {
  return "mechanism,scenario,fleet_size,seed,interval,matching_rate,avg_wait_min,sensing_utility,coverage_rate,"
         "revenue,avg_u_driver,avg_u_rider";
}

inline void write_kpi_row(std::ostream& os, const KpiReport& r, const KpiRow& row) {
  os << to_string(r.mechanism) << ',' << r.scenario << ',' << r.fleet_size << ',' << r.seed << ',' << row.label;
  for (double v : {row.matching_rate, row.avg_wait_min, row.sensing_utility, row.coverage_rate, row.revenue,
                   row.avg_u_driver, row.avg_u_rider}) {
    os << ',' << format_number(v);
  }
  os << '\n';
}

/// One row per interval followed by the aggregate row.
inline void write_kpi_rows(std::ostream& os, const KpiReport& r) {
  for (const auto& row : r.intervals) write_kpi_row(os, r, row);
  write_kpi_row(os, r, r.aggregate);
}

// ---- simulation -------------------------------------------------------------

struct EpochOutcome {
  std::size_t epoch = 0;
  std::size_t interval = 0;
  std::size_t vacant = 0;
  std::size_t generated = 0;
  std::size_t carried = 0;
  std::size_t matched = 0;
  std::size_t waiting_after = 0;  // unmatched riders that will be offered again
  std::size_t abandoned = 0;
  EpochSettlement settlement;
};

class Simulation {
 public:
  Simulation(ScenarioConfig config, Mechanism mechanism)
      : config_(validated(std::move(config))),
        mechanism_(mechanism),
        world_(make_world(config_.world)),
        prospect_(build_prospect_model(world_, config_.world.xi, config_.world.p_star_frac)),
        sensing_(SensingParams::uniform(world_.cell_count(), config_.intervals, config_.sensing_exponent)),
        coverage_(world_.cell_count(), config_.intervals, config_.distinct_vehicles),
        demand_(world_, prospect_, config_.remote_fraction(),
                config_.requests_per_hour * config_.interval_minutes / 60.0 /
                    static_cast<double>(config_.epochs_per_interval)) {
    init_fleet();
    stats_.resize(config_.intervals);
  }

  const ScenarioConfig& config() const { return config_; }
  Mechanism mechanism() const { return mechanism_; }
  const GridWorld& world() const { return world_; }
  const ProspectModel& prospect() const { return prospect_; }
  const DemandModel& demand() const { return demand_; }
  const SensingParams& sensing() const { return sensing_; }
  const CoverageState& coverage() const { return coverage_; }
  const std::vector<DriverState>& fleet() const { return fleet_; }
  std::span<const double> busy_until() const { return busy_until_; }
  std::size_t epoch() const { return epoch_; }
  bool done() const { return epoch_ >= config_.total_epochs(); }

  /// Replaces the generated demand of future epochs (used by tests).
  void set_demand_override(std::function<std::vector<RiderRequest>(std::size_t epoch, std::uint32_t next_id)> f) {
    demand_override_ = std::move(f);
  }

  EpochOutcome step() {
    if (done()) throw ContractViolation("simulation horizon exhausted");
    const std::size_t e = epoch_;
    const double dt = config_.epoch_hours();
    const double now = static_cast<double>(e) * dt;
    const std::size_t interval = e / config_.epochs_per_interval;
    if (e > 0) {
      if (e % config_.epochs_per_interval == 0) {
        coverage_.advance_interval();
      } else {
        coverage_.advance_epoch();
      }
    }

    EpochOutcome out;
    out.epoch = e;
    out.interval = interval;

    // (1) trips finish; (2) vacant drivers drift toward high prospects.
    for (std::size_t i = 0; i < fleet_.size(); ++i) {
      auto& d = fleet_[i];
      if (d.status != DriverStatus::vacant && busy_until_[i] <= now + 1e-12) {
        d.status = DriverStatus::vacant;
        d.location = dropoff_[i];
        free_since_[i] = busy_until_[i];
      } else if (d.status == DriverStatus::pickup && pickup_done_[i] <= now + 1e-12) {
        d.status = DriverStatus::in_service;
      }
      if (d.status == DriverStatus::vacant) {
        const double moving = std::max(0.0, now - std::max(free_since_[i], now - dt));
        if (moving > 0.0) {
          d.location = reposition_point(world_, prospect_, d.location, config_.reposition_radius_km,
                                        d.speed_kmh * moving);
        }
      }
    }

    // (3) new demand plus riders still within their patience.
    auto fresh = demand_override_ ? demand_override_(e, next_rider_id_)
                                  : generate_demand(config_, world_, demand_, e, next_rider_id_);
    next_rider_id_ += static_cast<std::uint32_t>(fresh.size());
    out.generated = fresh.size();
    out.carried = waiting_.size();
    stats_[interval].requests += fresh.size();
    std::vector<RiderRequest> riders = std::move(waiting_);
    waiting_.clear();
    riders.insert(riders.end(), std::make_move_iterator(fresh.begin()), std::make_move_iterator(fresh.end()));

    // (4) candidates among vacant drivers; (5) settle.
    std::vector<DriverState> vacant;
    std::vector<std::size_t> vacant_index;
    for (std::size_t i = 0; i < fleet_.size(); ++i) {
      if (fleet_[i].status == DriverStatus::vacant) {
        vacant.push_back(fleet_[i]);
        vacant_index.push_back(i);
      }
    }
    out.vacant = vacant.size();
    const auto problem = build_candidates(vacant, riders, world_, config_.rates, prospect_, sensing_, coverage_,
                                          config_.radius_km);
    out.settlement = settle_epoch(mechanism_, problem, config_.rates, config_.charge_floor);

    // (6) coverage, (7) busy drivers, (8) KPIs.
    std::vector<bool> matched(riders.size(), false);
    for (const auto& m : out.settlement.priced) {
      const std::size_t j = rider_slot(riders, m.rider);
      const std::size_t i = vacant_index[driver_slot(vacant, m.driver)];
      const auto& rider = riders[j];
      matched[j] = true;
      coverage_.commit_route(rider.route.cells, interval, fleet_[i].id);

      fleet_[i].status = DriverStatus::pickup;
      pickup_done_[i] = now + m.tau / fleet_[i].speed_kmh;
      busy_until_[i] = now + (m.tau + m.trip_km) / fleet_[i].speed_kmh;
      dropoff_[i] = rider.dest;

      // Utilities against truthful valuations of the same edge.
      const auto& edge = problem.edges[m.edge];
      const double true_pd = driver_valuation(config_.rates, edge.trip_km, fleet_[i].b_true,
                                              {edge.tau, edge.tau_min_d}, edge.opportunity_cost);
      const double true_pr = rider_valuation(config_.rates, edge.trip_km, rider.delta_true, {edge.tau, edge.tau_min_r});
      const auto u = participant_utilities(m.q_d, m.q_r, true_pd, true_pr);

      auto& s = stats_[interval];
      ++s.matches;
      s.wait_min += m.tau / fleet_[i].speed_kmh * 60.0;
      s.u_driver += u.driver;
      s.u_rider += u.rider;
      s.revenue += m.q_r - m.q_d;
      if (m.zeta >= kHighZeta) ++s.high_zeta;
      ++stats_[rider.epoch / config_.epochs_per_interval].matched_arrivals;
      ++out.matched;
    }
    for (std::size_t j = 0; j < riders.size(); ++j) {
      if (matched[j]) continue;
      if (e - riders[j].epoch + 1 < config_.rider_patience_epochs) {
        waiting_.push_back(std::move(riders[j]));
      } else {
        ++out.abandoned;
      }
    }
    out.waiting_after = waiting_.size();
    ++epoch_;
    return out;
  }

  KpiReport report() const {
    KpiReport r;
    r.mechanism = mechanism_;
    r.scenario = config_.scenario;
    r.fleet_size = config_.fleet_size;
    r.seed = config_.seed;
    Stats total;
    double coverage_sum = 0.0;
    for (std::size_t t = 0; t < config_.intervals; ++t) {
      const auto& s = stats_[t];
      KpiRow row = make_row(std::to_string(t), s);
      row.sensing_utility = interval_sensing_utility(sensing_, coverage_, t);
      row.coverage_rate = coverage_fraction(coverage_, t);
      coverage_sum += row.coverage_rate;
      r.intervals.push_back(row);
      total.requests += s.requests;
      total.matched_arrivals += s.matched_arrivals;
      total.matches += s.matches;
      total.wait_min += s.wait_min;
      total.u_driver += s.u_driver;
      total.u_rider += s.u_rider;
      total.revenue += s.revenue;
      total.high_zeta += s.high_zeta;
    }
    r.aggregate = make_row("all", total);
    r.aggregate.sensing_utility = total_sensing_utility(sensing_, coverage_);
    r.aggregate.coverage_rate = coverage_sum / static_cast<double>(config_.intervals);
    return r;
  }

 private:
  struct Stats {
    std::size_t requests = 0;
    std::size_t matched_arrivals = 0;
    std::size_t matches = 0;
    std::size_t high_zeta = 0;
    double wait_min = 0.0;
    double u_driver = 0.0;
    double u_rider = 0.0;
    double revenue = 0.0;
  };

  static ScenarioConfig validated(ScenarioConfig c) {
    c.validate();
    return c;
  }

  static KpiRow make_row(std::string label, const Stats& s) {
    KpiRow row;
    row.label = std::move(label);
    row.requests = s.requests;
    row.matches = s.matches;
    row.high_zeta = s.high_zeta;
    row.matching_rate = s.requests == 0 ? 0.0 : static_cast<double>(s.matched_arrivals) / static_cast<double>(s.requests);
    row.revenue = s.revenue;
    if (s.matches > 0) {
      const double k = static_cast<double>(s.matches);
      row.avg_wait_min = s.wait_min / k;
      row.avg_u_driver = s.u_driver / k;
      row.avg_u_rider = s.u_rider / k;
    }
    return row;
  }

  void init_fleet() {
    auto pos_rng = substream(config_.seed, rng_tag::fleet, 0);
    auto bid_rng = substream(config_.seed, rng_tag::driver_bids, 0);
    auto report_rng = substream(config_.seed, rng_tag::driver_reports, 0);
    std::uniform_real_distribution<double> x(0.0, world_.width());
    std::uniform_real_distribution<double> y(0.0, world_.height());
    std::uniform_real_distribution<double> bid(config_.bid_low, config_.bid_high);
    std::vector<double> truthful;
    for (std::size_t i = 0; i < config_.fleet_size; ++i) {
      DriverState d;
      d.id = DriverId{static_cast<std::uint32_t>(i)};
      const double px = x(pos_rng);
      const double py = y(pos_rng);
      d.location = {px, py};
      d.b_true = bid(bid_rng);
      d.speed_kmh = config_.speed_kmh;
      truthful.push_back(d.b_true);
      fleet_.push_back(d);
    }
    const auto reported = apply_reporting(truthful, config_.overreport, report_rng);
    for (std::size_t i = 0; i < fleet_.size(); ++i) fleet_[i].b_reported = reported[i];
    busy_until_.assign(fleet_.size(), 0.0);
    pickup_done_.assign(fleet_.size(), 0.0);
    free_since_.assign(fleet_.size(), 0.0);
    dropoff_.assign(fleet_.size(), Point{});
  }

  static std::size_t rider_slot(const std::vector<RiderRequest>& riders, RiderId id) {
    for (std::size_t j = 0; j < riders.size(); ++j) {
      if (riders[j].id == id) return j;
    }
    throw ContractViolation("settled rider is not waiting");
  }

  static std::size_t driver_slot(const std::vector<DriverState>& drivers, DriverId id) {
    for (std::size_t i = 0; i < drivers.size(); ++i) {
      if (drivers[i].id == id) return i;
    }
    throw ContractViolation("settled driver is not vacant");
  }

  ScenarioConfig config_;
  Mechanism mechanism_;
  GridWorld world_;
  ProspectModel prospect_;
  SensingParams sensing_;
  CoverageState coverage_;
  DemandModel demand_;
  std::vector<DriverState> fleet_;
  std::vector<double> busy_until_;
  std::vector<double> pickup_done_;
  std::vector<double> free_since_;
  std::vector<Point> dropoff_;
  std::vector<RiderRequest> waiting_;
  std::vector<Stats> stats_;
  std::function<std::vector<RiderRequest>(std::size_t, std::uint32_t)> demand_override_;
  std::uint32_t next_rider_id_ = 0;
  std::size_t epoch_ = 0;
};

/// JSON-lines record of one epoch.
inline nlohmann::json epoch_event(const EpochOutcome& o, Mechanism mechanism) {
  std::size_t high = 0;
  for (const auto& m : o.settlement.priced) high += m.zeta >= kHighZeta ? 1 : 0;
  return {{"epoch", o.epoch},
          {"interval", o.interval},
          {"mechanism", to_string(mechanism)},
          {"vacant", o.vacant},
          {"generated", o.generated},
          {"carried", o.carried},
          {"matched", o.matched},
          {"waiting", o.waiting_after},
          {"abandoned", o.abandoned},
          {"welfare", o.settlement.welfare_total},
          {"sensing", o.settlement.sensing_total},
          {"revenue", o.settlement.revenue},
          {"high_zeta", high}};
}

/// Optional per-run artifacts.
struct RunSinks {
  std::ostream* events = nullptr;       // JSON lines
  std::ostream* settlements = nullptr;  // settlement CSV rows (header written here)
  std::ostream* coverage = nullptr;     // final coverage CSV
};

inline KpiReport run_scenario(const ScenarioConfig& config, Mechanism mechanism, const RunSinks& sinks = {}) {
  Simulation sim(config, mechanism);
  if (sinks.settlements) *sinks.settlements << settlement_csv_header() << '\n';
  while (!sim.done()) {
    const auto o = sim.step();
    if (sinks.events) *sinks.events << epoch_event(o, mechanism).dump() << '\n';
    if (sinks.settlements) write_settlement_rows(*sinks.settlements, o.epoch, o.settlement);
  }
  if (sinks.coverage) write_coverage_csv(*sinks.coverage, sim.coverage());
  return sim.report();
}

}  // namespace senseauction
