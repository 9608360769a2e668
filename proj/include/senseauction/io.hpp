#pragma once

// JSON documents: world definitions, scenario configs and matching problem
// instances, and property-check instances. Readers reject unknown keys and wrong types with ConfigError.

#include <cstdint>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "json.hpp"

#include "senseauction/assignment.hpp"
#include "senseauction/error.hpp"
#include "senseauction/properties.hpp"
#include "senseauction/simengine.hpp"

namespace senseauction::io {

using nlohmann::json;

namespace detail {

template <class T>
inline constexpr bool is_unsigned_list = false;
template <class T>
inline constexpr bool is_unsigned_list<std::vector<T>> = std::is_unsigned_v<T>;

// Typed access to one JSON object that remembers which keys were read.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected a JSON object");
  }

  template <class T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    // nlohmann converts -1 to a huge unsigned value; reject it here.
    if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
      if (!it->is_number_unsigned()) throw ConfigError(where_ + ": field '" + key + "' must be a non-negative integer");
    } else if constexpr (is_unsigned_list<T>) {
      for (const auto& v : *it) {
        if (!v.is_number_unsigned()) throw ConfigError(where_ + ": field '" + key + "' must hold non-negative integers");
      }
    }
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where_ + ": field '" + key + "' has the wrong type");
    }
  }

  template <class T>
  void require(const char* key, T& out) {
    if (!j_.contains(key)) throw ConfigError(where_ + ": missing field '" + key + "'");
    read(key, out);
  }

  bool has(const char* key) const { return j_.contains(key); }

  const json& child(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void done() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(where_ + ": unknown field '" + key + "'");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

inline json parse_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

}  // namespace detail

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// ---- world ------------------------------------------------------------------

inline WorldSpec world_from_json(const json& j) {
  WorldSpec w;
  detail::Fields f(j, "world");
  f.require("rows", w.rows);
  f.require("cols", w.cols);
  f.read("cell_size_km", w.cell_size_km);
  if (f.has("densities")) {
    std::vector<double> d;
    f.read("densities", d);
    w.densities = std::move(d);
  }
  f.read("xi", w.xi);
  f.read("p_star_frac", w.p_star_frac);
  f.done();
  if (w.densities && w.densities->size() != w.rows * w.cols) {
    throw ConfigError("world: expected " + std::to_string(w.rows * w.cols) + " densities, got " +
                      std::to_string(w.densities->size()));
  }
  return w;
}

inline json world_to_json(const WorldSpec& w) {
  json j{{"rows", w.rows}, {"cols", w.cols}, {"cell_size_km", w.cell_size_km}, {"xi", w.xi}, {"p_star_frac", w.p_star_frac}};
  if (w.densities) j["densities"] = *w.densities;
  return j;
}

// ---- scenario config --------------------------------------------------------

inline ScenarioConfig config_from_json(const json& j) {
  ScenarioConfig c;
  detail::Fields f(j, "config");
  if (f.has("world")) c.world = world_from_json(f.child("world"));
  f.read("fleet_size", c.fleet_size);
  f.read("intervals", c.intervals);
  f.read("epochs_per_interval", c.epochs_per_interval);
  f.read("interval_minutes", c.interval_minutes);
  f.read("speed_kmh", c.speed_kmh);
  f.read("radius_km", c.radius_km);
  if (f.has("rates")) {
    detail::Fields r(f.child("rates"), "config.rates");
    r.read("alpha", c.rates.alpha);
    r.read("beta", c.rates.beta);
    r.done();
  }
  if (f.has("bids")) {
    detail::Fields b(f.child("bids"), "config.bids");
    b.read("low", c.bid_low);
    b.read("high", c.bid_high);
    b.done();
  }
  if (f.has("overreport")) {
    detail::Fields o(f.child("overreport"), "config.overreport");
    o.read("fraction", c.overreport.fraction);
    o.read("magnitude_low", c.overreport.magnitude_low);
    o.read("magnitude_high", c.overreport.magnitude_high);
    o.done();
  }
  f.read("scenario", c.scenario);
  f.read("remote_fractions", c.remote_fractions);
  f.read("requests_per_hour", c.requests_per_hour);
  f.read("seed", c.seed);
  f.read("reposition_radius_km", c.reposition_radius_km);
  f.read("rider_patience_epochs", c.rider_patience_epochs);
  f.read("sensing_exponent", c.sensing_exponent);
  f.read("charge_floor", c.charge_floor);
  f.read("distinct_vehicles", c.distinct_vehicles);
  f.done();
  c.validate();
  return c;
}

inline json config_to_json(const ScenarioConfig& c) {
  return {{"world", world_to_json(c.world)},
          {"fleet_size", c.fleet_size},
          {"intervals", c.intervals},
          {"epochs_per_interval", c.epochs_per_interval},
          {"interval_minutes", c.interval_minutes},
          {"speed_kmh", c.speed_kmh},
          {"radius_km", c.radius_km},
          {"rates", {{"alpha", c.rates.alpha}, {"beta", c.rates.beta}}},
          {"bids", {{"low", c.bid_low}, {"high", c.bid_high}}},
          {"overreport",
           {{"fraction", c.overreport.fraction},
            {"magnitude_low", c.overreport.magnitude_low},
            {"magnitude_high", c.overreport.magnitude_high}}},
          {"scenario", c.scenario},
          {"remote_fractions", c.remote_fractions},
          {"requests_per_hour", c.requests_per_hour},
          {"seed", c.seed},
          {"reposition_radius_km", c.reposition_radius_km},
          {"rider_patience_epochs", c.rider_patience_epochs},
          {"sensing_exponent", c.sensing_exponent},
          {"charge_floor", c.charge_floor},
          {"distinct_vehicles", c.distinct_vehicles}};
}

inline ScenarioConfig load_config(const std::string& path) {
  return config_from_json(detail::parse_text(read_file(path), path));
}

// ---- matching problems ------------------------------------------------------

inline json edge_to_json(const CandidateEdge& e) {
  return {{"d", e.driver.value},
          {"r", e.rider.value},
          {"tau", e.tau},
          {"tau_min_d", e.tau_min_d},
          {"tau_min_r", e.tau_min_r},
          {"trip_km", e.trip_km},
          {"opportunity_cost", e.opportunity_cost},
          {"b", e.b_reported},
          {"delta", e.delta_reported},
          {"P_d", e.P_d},
          {"P_r", e.P_r},
          {"sigma", e.sigma},
          {"zeta", e.zeta}};
}

/// Edges need d, r, tau, P_d, P_r and zeta; sigma is always P_r - P_d.
/// Participants without edges may be listed under "drivers" / "riders".
inline MatchingProblem problem_from_json(const json& j) {
  MatchingProblem p;
  detail::Fields f(j, "problem");
  std::string objective = "welfare";
  f.read("objective", objective);
  if (objective == "welfare") {
    p.objective = Objective::welfare;
  } else if (objective == "sensing") {
    p.objective = Objective::sensing;
  } else {
    throw ConfigError("problem: objective must be 'welfare' or 'sensing'");
  }
  f.read("welfare_floor", p.welfare_floor);
  std::vector<std::uint32_t> ds;
  std::vector<std::uint32_t> rs;
  f.read("drivers", ds);
  f.read("riders", rs);
  for (auto d : ds) p.drivers.push_back(DriverId{d});
  for (auto r : rs) p.riders.push_back(RiderId{r});
  if (f.has("edges")) {
    const json& edges = f.child("edges");
    if (!edges.is_array()) throw ConfigError("problem: 'edges' must be an array");
    for (const auto& je : edges) {
      CandidateEdge e;
      detail::Fields g(je, "problem.edges");
      g.require("d", e.driver.value);
      g.require("r", e.rider.value);
      g.require("tau", e.tau);
      g.require("P_d", e.P_d);
      g.require("P_r", e.P_r);
      g.require("zeta", e.zeta);
      e.tau_min_d = e.tau_min_r = e.tau;
      g.read("tau_min_d", e.tau_min_d);
      g.read("tau_min_r", e.tau_min_r);
      g.read("trip_km", e.trip_km);
      g.read("opportunity_cost", e.opportunity_cost);
      g.read("b", e.b_reported);
      g.read("delta", e.delta_reported);
      double ignored = 0.0;
      g.read("sigma", ignored);
      g.done();
      e.sigma = social_welfare(e.P_r, e.P_d);
      p.edges.push_back(e);
      p.drivers.push_back(e.driver);
      p.riders.push_back(e.rider);
    }
  }
  f.done();
  canonicalize(p);
  p.validate();
  return p;
}

inline json problem_to_json(const MatchingProblem& p) {
  json j{{"objective", to_string(p.objective)}, {"welfare_floor", p.welfare_floor}};
  j["drivers"] = json::array();
  for (auto d : p.drivers) j["drivers"].push_back(d.value);
  j["riders"] = json::array();
  for (auto r : p.riders) j["riders"].push_back(r.value);
  j["edges"] = json::array();
  for (const auto& e : p.edges) j["edges"].push_back(edge_to_json(e));
  return j;
}

inline MatchingProblem load_problem(const std::string& path) {
  return problem_from_json(detail::parse_text(read_file(path), path));
}

// ---- property-check instances -----------------------------------------------

/// A property-check instance: the reported problem plus the truthful bids it
/// was priced from, enough to replay every check.
inline json instance_to_json(const properties::Instance& inst) {
  json j{{"rates", {{"alpha", inst.rates.alpha}, {"beta", inst.rates.beta}}}, {"problem", problem_to_json(inst.problem)}};
  j["b_true"] = json::object();
  for (const auto& [d, b] : inst.b_true) j["b_true"][std::to_string(d.value)] = b;
  j["delta_true"] = json::object();
  for (const auto& [r, delta] : inst.delta_true) j["delta_true"][std::to_string(r.value)] = delta;
  return j;
}

inline properties::Instance instance_from_json(const json& j) {
  properties::Instance inst;
  detail::Fields f(j, "instance");
  if (f.has("rates")) {
    detail::Fields r(f.child("rates"), "instance.rates");
    r.read("alpha", inst.rates.alpha);
    r.read("beta", inst.rates.beta);
    r.done();
  }
  inst.rates.validate();
  if (!f.has("problem")) throw ConfigError("instance: missing field 'problem'");
  inst.problem = problem_from_json(f.child("problem"));
  std::map<std::string, double> b;
  std::map<std::string, double> delta;
  f.read("b_true", b);
  f.read("delta_true", delta);
  f.done();
  auto id = [](const std::string& key) {
    try {
      std::size_t used = 0;
      const unsigned long v = std::stoul(key, &used);
      if (used == key.size() && v <= std::numeric_limits<std::uint32_t>::max()) return static_cast<std::uint32_t>(v);
    } catch (const std::exception&) {
    }
    throw ConfigError("instance: '" + key + "' is not a participant id");
  };
  for (const auto& [k, v] : b) inst.b_true[DriverId{id(k)}] = v;
  for (const auto& [k, v] : delta) inst.delta_true[RiderId{id(k)}] = v;
  for (auto d : inst.problem.drivers) {
    if (!inst.b_true.count(d)) throw ConfigError("instance: no truthful bid for driver " + std::to_string(d.value));
  }
  for (auto r : inst.problem.riders) {
    if (!inst.delta_true.count(r)) throw ConfigError("instance: no truthful bid for rider " + std::to_string(r.value));
  }
  return inst;
}

inline properties::Instance load_instance(const std::string& path) {
  return instance_from_json(detail::parse_text(read_file(path), path));
}

}  // namespace senseauction::io
